use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Relative slack used when comparing cumulative mass against the target level,
/// so that a level that is an exact multiple of the atom mass hits that atom.
const LEVEL_SLACK: f64 = 1e-12;

/// Finite atoms with nonnegative weights plus a separate mass at `+inf`.
///
/// Weights need not be normalised; queries work on the normalised distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEmpirical {
    atoms: Vec<(f64, f64)>,
    inf_mass: f64,
}

impl WeightedEmpirical {
    pub fn new(atoms: Vec<(f64, f64)>, inf_mass: f64) -> Result<Self> {
        for &(v, w) in &atoms {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidWeight(w));
            }
            if v.is_nan() {
                return Err(Error::Data("NaN atom in weighted empirical distribution".into()));
            }
        }
        if !(inf_mass.is_finite() && inf_mass >= 0.0) {
            return Err(Error::InvalidWeight(inf_mass));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum::<f64>() + inf_mass;
        if total <= 0.0 {
            return Err(Error::EmptyDistribution);
        }
        Ok(WeightedEmpirical { atoms, inf_mass })
    }

    /// Equal mass `1/(n+1)` on each value and on `+inf`.
    pub fn uniform_with_inf(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| (v, 1.0)).collect(), 1.0)
    }

    /// Weighted values without any mass at infinity.
    pub fn from_weighted(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::Dimension {
                expected: values.len(),
                got: weights.len(),
            });
        }
        Self::new(values.iter().copied().zip(weights.iter().copied()).collect(), 0.0)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn inf_mass(&self) -> f64 {
        self.inf_mass
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.inf_mass
    }

    /// `inf{z : F(z) >= level}` on the normalised distribution; `+inf` when the
    /// finite atoms never accumulate `level`.
    pub fn quantile(&self, level: f64) -> Result<f64> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Domain(format!("quantile level {level} outside (0, 1)")));
        }
        let mut sorted: Vec<(f64, f64)> = self.atoms.clone();
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));

        let total = self.total_mass();
        let target = level * total - LEVEL_SLACK * total;
        let mut cum = 0.0;
        let mut i = 0;
        while i < sorted.len() {
            let value = sorted[i].0;
            // Tied atoms are merged before the comparison.
            while i < sorted.len() && sorted[i].0 == value {
                cum += sorted[i].1;
                i += 1;
            }
            if cum >= target && cum > 0.0 {
                return Ok(value);
            }
        }
        Ok(f64::INFINITY)
    }
}
