use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{MaskedDataset, MaskedSample};
use crate::error::{Error, Result};
use crate::mask::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Mcar,
    Mar,
    Mnar,
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mechanism::Mcar => "mcar",
            Mechanism::Mar => "mar",
            Mechanism::Mnar => "mnar",
        })
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mcar" => Ok(Mechanism::Mcar),
            "mar" => Ok(Mechanism::Mar),
            "mnar" => Ok(Mechanism::Mnar),
            other => Err(Error::Config(format!("unknown missingness mechanism {other:?}"))),
        }
    }
}

/// Which columns may go missing by default.
///
/// Under MAR the leading columns stay observed and drive the missingness of the
/// trailing ones: the last two columns for `d <= 5`, the last three for larger `d`.
/// MCAR and MNAR may mask every column.
pub fn default_maskable_columns(mechanism: Mechanism, d: usize) -> Vec<usize> {
    match mechanism {
        Mechanism::Mar => {
            let k = if d <= 5 { 2 } else { 3 }.min(d.saturating_sub(1));
            (d - k..d).collect()
        }
        Mechanism::Mcar | Mechanism::Mnar => (0..d).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmputeConfig {
    pub mechanism: Mechanism,
    /// Target marginal missing probability of every maskable column.
    pub rate: f64,
    pub maskable_columns: Vec<usize>,
    /// Slope of the self-masking logistic link (upper tail goes missing).
    pub mnar_steepness: f64,
    /// Slope of the MAR logistic link on the standardised driver score.
    pub mar_steepness: f64,
}

impl AmputeConfig {
    pub fn new(mechanism: Mechanism, d: usize) -> Self {
        AmputeConfig {
            mechanism,
            rate: 0.2,
            maskable_columns: default_maskable_columns(mechanism, d),
            mnar_steepness: 1.0,
            mar_steepness: 1.0,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(Error::Config(format!("missing rate must lie in (0, 1), got {}", self.rate)));
        }
        if self.maskable_columns.is_empty() {
            return Err(Error::Config("no maskable columns".into()));
        }
        let mut seen = vec![false; d];
        for &j in &self.maskable_columns {
            if j >= d || seen[j] {
                return Err(Error::Config(format!("maskable column {j} invalid or repeated for d = {d}")));
            }
            seen[j] = true;
        }
        if self.mechanism == Mechanism::Mar && self.maskable_columns.len() == d {
            return Err(Error::Config("MAR needs at least one always-observed column".into()));
        }
        if !(self.mnar_steepness > 0.0 && self.mar_steepness > 0.0) {
            return Err(Error::Config("logistic steepness must be positive".into()));
        }
        Ok(())
    }
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

#[derive(Debug, Clone, PartialEq)]
enum Link {
    Mcar,
    /// `logistic(steepness * score + intercept)` with `score` the mean of the
    /// standardised driver columns.
    Mar {
        drivers: Vec<usize>,
        center: Vec<f64>,
        scale: Vec<f64>,
        intercept: f64,
    },
    /// `logistic(steepness * (x_k - threshold_k))` per maskable column.
    Mnar { thresholds: Vec<f64> },
}

/// An amputation mechanism with its link parameters fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct Amputer {
    cfg: AmputeConfig,
    d: usize,
    link: Link,
}

impl Amputer {
    /// Fixes the link intercepts so the expected missing rate on `reference`
    /// equals the configured rate.
    pub fn calibrate(cfg: &AmputeConfig, reference: &[Vec<f64>]) -> Result<Self> {
        let d = reference
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Calibration("empty reference sample".into()))?;
        cfg.validate(d)?;
        if let Some(bad) = reference.iter().find(|r| r.len() != d) {
            return Err(Error::Dimension {
                expected: d,
                got: bad.len(),
            });
        }
        let link = match cfg.mechanism {
            Mechanism::Mcar => Link::Mcar,
            Mechanism::Mar => {
                let drivers: Vec<usize> = (0..d).filter(|j| !cfg.maskable_columns.contains(j)).collect();
                let n = reference.len() as f64;
                let center: Vec<f64> = drivers
                    .iter()
                    .map(|&j| reference.iter().map(|r| r[j]).sum::<f64>() / n)
                    .collect();
                let scale: Vec<f64> = drivers
                    .iter()
                    .zip(&center)
                    .map(|(&j, &c)| {
                        let v = reference.iter().map(|r| (r[j] - c).powi(2)).sum::<f64>() / n;
                        if v > 0.0 {
                            v.sqrt()
                        } else {
                            1.0
                        }
                    })
                    .collect();
                let scores: Vec<f64> = reference
                    .iter()
                    .map(|r| mar_score(r, &drivers, &center, &scale))
                    .collect();
                let s = cfg.mar_steepness;
                let spread = scores.iter().fold(0.0f64, |m, v| m.max(v.abs())) * s + 50.0;
                let intercept = bisect_rate(
                    |a| scores.iter().map(|&z| logistic(s * z + a)).sum::<f64>() / n,
                    cfg.rate,
                    -spread,
                    spread,
                    "MAR intercept",
                )?;
                Link::Mar {
                    drivers,
                    center,
                    scale,
                    intercept,
                }
            }
            Mechanism::Mnar => {
                let s = cfg.mnar_steepness;
                let n = reference.len() as f64;
                let thresholds = cfg
                    .maskable_columns
                    .iter()
                    .map(|&j| {
                        let col: Vec<f64> = reference.iter().map(|r| r[j]).collect();
                        let lo = col.iter().copied().fold(f64::INFINITY, f64::min) - 50.0 / s;
                        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 50.0 / s;
                        // Rate decreases in the threshold; bisect on the negated threshold.
                        bisect_rate(
                            |neg_c| col.iter().map(|&x| logistic(s * (x + neg_c))).sum::<f64>() / n,
                            cfg.rate,
                            -hi,
                            -lo,
                            &format!("MNAR threshold of column {j}"),
                        )
                        .map(|neg_c| -neg_c)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Link::Mnar { thresholds }
            }
        };
        Ok(Amputer {
            cfg: cfg.clone(),
            d,
            link,
        })
    }

    pub fn config(&self) -> &AmputeConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `P{M_j = 1 | x}` for the `k`-th maskable column.
    pub fn missing_probability(&self, x: &[f64], k: usize) -> f64 {
        match &self.link {
            Link::Mcar => self.cfg.rate,
            Link::Mar {
                drivers,
                center,
                scale,
                intercept,
            } => logistic(self.cfg.mar_steepness * mar_score(x, drivers, center, scale) + intercept),
            Link::Mnar { thresholds } => {
                let j = self.cfg.maskable_columns[k];
                logistic(self.cfg.mnar_steepness * (x[j] - thresholds[k]))
            }
        }
    }

    /// Draws one mask; consumes exactly one uniform per maskable column.
    pub fn draw_mask<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Mask {
        let mut bits = vec![false; self.d];
        for (k, &j) in self.cfg.maskable_columns.iter().enumerate() {
            let u: f64 = rng.random();
            bits[j] = u < self.missing_probability(x, k);
        }
        Mask::new(bits)
    }

    /// Masks every row of `x`, attaching responses when given.
    pub fn apply<R: Rng + ?Sized>(&self, x: &[Vec<f64>], y: Option<&[f64]>, rng: &mut R) -> Result<MaskedDataset> {
        if let Some(y) = y {
            if y.len() != x.len() {
                return Err(Error::Dimension {
                    expected: x.len(),
                    got: y.len(),
                });
            }
        }
        let samples = x
            .iter()
            .enumerate()
            .map(|(i, row)| {
                if row.len() != self.d {
                    return Err(Error::Dimension {
                        expected: self.d,
                        got: row.len(),
                    });
                }
                let mask = self.draw_mask(row, rng);
                MaskedSample::from_complete(row, mask, y.map(|y| y[i]))
            })
            .collect::<Result<Vec<_>>>()?;
        MaskedDataset::new(self.d, samples)
    }
}

fn mar_score(x: &[f64], drivers: &[usize], center: &[f64], scale: &[f64]) -> f64 {
    let total: f64 = drivers
        .iter()
        .zip(center.iter().zip(scale))
        .map(|(&j, (c, s))| (x[j] - c) / s)
        .sum();
    total / drivers.len() as f64
}

/// Solves `rate_of(t) = target` for an increasing `rate_of` on `[lo, hi]`.
fn bisect_rate<F: Fn(f64) -> f64>(rate_of: F, target: f64, mut lo: f64, mut hi: f64, what: &str) -> Result<f64> {
    let (r_lo, r_hi) = (rate_of(lo), rate_of(hi));
    if !(r_lo <= target && target <= r_hi) {
        return Err(Error::Calibration(format!(
            "{what}: target rate {target} not bracketed by [{r_lo}, {r_hi}] on [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate_of(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    let achieved = rate_of(t);
    if !achieved.is_finite() || (achieved - target).abs() > 1e-6 {
        return Err(Error::Calibration(format!(
            "{what}: reached rate {achieved} for target {target} at {t}"
        )));
    }
    Ok(t)
}

/// Calibrates the mechanism on `x` itself and masks it.
pub fn ampute<R: Rng + ?Sized>(x: &[Vec<f64>], cfg: &AmputeConfig, rng: &mut R) -> Result<MaskedDataset> {
    Amputer::calibrate(cfg, x)?.apply(x, None, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::synth::{gen_gaussian_linear, DgpConfig};

    fn column_rates(ds: &MaskedDataset) -> Vec<f64> {
        (0..ds.dim())
            .map(|j| ds.samples().iter().filter(|s| s.mask().is_missing(j)).count() as f64 / ds.len() as f64)
            .collect()
    }

    #[test]
    fn mcar_rate() {
        let x = gen_gaussian_linear(&DgpConfig::benchmark(1), 100_000, &mut stream(1, 0, Purpose::Train))
            .unwrap()
            .x;
        let ds = ampute(&x, &AmputeConfig::new(Mechanism::Mcar, 1), &mut stream(1, 0, Purpose::Calib)).unwrap();
        assert!((column_rates(&ds)[0] - 0.2).abs() < 0.005);
    }

    #[test]
    fn vanishing_rate_masks_nothing() {
        let x = gen_gaussian_linear(&DgpConfig::benchmark(3), 2000, &mut stream(2, 0, Purpose::Train))
            .unwrap()
            .x;
        for mech in [Mechanism::Mcar, Mechanism::Mar, Mechanism::Mnar] {
            let mut cfg = AmputeConfig::new(mech, 3);
            cfg.rate = 1e-12;
            let ds = ampute(&x, &cfg, &mut stream(2, 0, Purpose::Calib)).unwrap();
            assert!(ds.samples().iter().all(|s| s.mask().size() == 0), "{mech}");
        }
    }

    #[test]
    fn mar_layout_and_rate() {
        assert_eq!(default_maskable_columns(Mechanism::Mar, 3), vec![1, 2]);
        assert_eq!(default_maskable_columns(Mechanism::Mar, 5), vec![3, 4]);
        assert_eq!(default_maskable_columns(Mechanism::Mar, 8), vec![5, 6, 7]);
        assert_eq!(default_maskable_columns(Mechanism::Mnar, 3), vec![0, 1, 2]);

        let x = gen_gaussian_linear(&DgpConfig::benchmark(3), 50_000, &mut stream(3, 0, Purpose::Train))
            .unwrap()
            .x;
        let ds = ampute(&x, &AmputeConfig::new(Mechanism::Mar, 3), &mut stream(3, 0, Purpose::Calib)).unwrap();
        let rates = column_rates(&ds);
        assert_eq!(rates[0], 0.0);
        assert!((rates[1] - 0.2).abs() < 0.01 && (rates[2] - 0.2).abs() < 0.01, "{rates:?}");
        // Missingness depends on the driver: high x_0 means more missing.
        let (hi, lo): (Vec<_>, Vec<_>) = ds.samples().iter().partition(|s| s.x()[0].unwrap() > 1.0);
        let frac = |v: &[&MaskedSample]| v.iter().filter(|s| s.mask().is_missing(1)).count() as f64 / v.len() as f64;
        assert!(frac(&hi) > frac(&lo));
    }

    #[test]
    fn mnar_self_masking_is_monotone() {
        let x = gen_gaussian_linear(&DgpConfig::benchmark(3), 100_000, &mut stream(4, 0, Purpose::Train))
            .unwrap()
            .x;
        let ds = ampute(&x, &AmputeConfig::new(Mechanism::Mnar, 3), &mut stream(4, 0, Purpose::Calib)).unwrap();
        for j in 0..3 {
            let mut col: Vec<f64> = x.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            let median = col[col.len() / 2];
            let (mut above, mut n_above, mut below, mut n_below) = (0usize, 0usize, 0usize, 0usize);
            for (row, s) in x.iter().zip(ds.samples()) {
                let miss = s.mask().is_missing(j) as usize;
                if row[j] > median {
                    above += miss;
                    n_above += 1;
                } else {
                    below += miss;
                    n_below += 1;
                }
            }
            assert!(above as f64 / n_above as f64 > below as f64 / n_below as f64);
        }
        for r in column_rates(&ds) {
            assert!((r - 0.2).abs() < 0.01);
        }
    }

    #[test]
    fn non_maskable_columns_untouched() {
        let x = gen_gaussian_linear(&DgpConfig::benchmark(4), 3000, &mut stream(5, 0, Purpose::Train))
            .unwrap()
            .x;
        for mech in [Mechanism::Mcar, Mechanism::Mar, Mechanism::Mnar] {
            let mut cfg = AmputeConfig::new(mech, 4);
            cfg.maskable_columns = vec![1, 3];
            let ds = ampute(&x, &cfg, &mut stream(5, 0, Purpose::Calib)).unwrap();
            for (row, s) in x.iter().zip(ds.samples()) {
                assert_eq!(s.x()[0], Some(row[0]));
                assert_eq!(s.x()[2], Some(row[2]));
                for j in 0..4 {
                    assert_eq!(s.x()[j].is_none(), s.mask().is_missing(j));
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = AmputeConfig::new(Mechanism::Mcar, 3);
        cfg.rate = 1.0;
        assert!(cfg.validate(3).is_err());
        let mut cfg = AmputeConfig::new(Mechanism::Mcar, 3);
        cfg.maskable_columns = vec![0, 3];
        assert!(cfg.validate(3).is_err());
        let mut cfg = AmputeConfig::new(Mechanism::Mar, 3);
        cfg.maskable_columns = vec![0, 1, 2];
        assert!(cfg.validate(3).is_err());
        assert!(Amputer::calibrate(&AmputeConfig::new(Mechanism::Mcar, 3), &[]).is_err());
        assert_eq!("MNAR".parse::<Mechanism>().unwrap(), Mechanism::Mnar);
        assert!("foo".parse::<Mechanism>().is_err());
    }

    #[test]
    fn calibration_failure_reports_diagnostics() {
        // A constant driver cannot change the rate, but the intercept still can.
        let x = vec![vec![0.0, 1.0]; 10];
        let cfg = AmputeConfig::new(Mechanism::Mar, 2);
        assert!(Amputer::calibrate(&cfg, &x).is_ok());
        // Non-finite data leaves the target unbracketed.
        let x = vec![vec![f64::NAN, 1.0]; 10];
        let err = Amputer::calibrate(&AmputeConfig::new(Mechanism::Mnar, 2), &x).unwrap_err();
        assert!(matches!(err, Error::Calibration(_)), "{err:?}");
    }
}
