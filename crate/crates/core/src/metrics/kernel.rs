use serde::{Deserialize, Serialize};

use super::distance::heom_squared;
use crate::data::MaskedSample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        let spec = KernelSpec {
            kind: KernelKind::Gaussian,
            bandwidth,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::Config(format!(
                "kernel bandwidth must be positive and finite, got {}",
                self.bandwidth
            )));
        }
        Ok(())
    }

    /// `K(distance / h)`.
    pub fn eval(&self, distance: f64) -> f64 {
        match self.kind {
            KernelKind::Gaussian => gaussian_kernel(distance / self.bandwidth),
        }
    }
}

/// Unnormalised Gaussian kernel `exp(-u^2 / 2)`.
pub fn gaussian_kernel(u: f64) -> f64 {
    (-0.5 * u * u).exp()
}

/// Normalised localisation weights. `uniform_fallback` is set when every
/// kernel value underflowed and equal weights were substituted.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights {
    pub weights: Vec<f64>,
    pub uniform_fallback: bool,
}

/// `p_h(X^(j) | x)` for each target `X^(j)` under HEOM distances.
pub fn kernel_weights(
    targets: &[MaskedSample],
    x: &MaskedSample,
    spec: &KernelSpec,
    spans: &[f64],
) -> Result<KernelWeights> {
    if targets.is_empty() {
        return Err(Error::InsufficientData("kernel weights need at least one target".into()));
    }
    spec.validate()?;
    let distances = targets
        .iter()
        .map(|t| super::heom_distance(t, x, spans))
        .collect::<Result<Vec<_>>>()?;
    Ok(kernel_weights_from_distances(&distances, spec))
}

/// Kernel weights from precomputed distances. `distances` must be nonempty.
pub fn kernel_weights_from_distances(distances: &[f64], spec: &KernelSpec) -> KernelWeights {
    let raw: Vec<f64> = distances.iter().map(|&d| spec.eval(d)).collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 && total.is_finite() {
        KernelWeights {
            weights: raw.into_iter().map(|k| k / total).collect(),
            uniform_fallback: false,
        }
    } else {
        let n = distances.len() as f64;
        KernelWeights {
            weights: vec![1.0 / n; distances.len()],
            uniform_fallback: true,
        }
    }
}

/// Median HEOM distance over all unordered pairs of distinct points.
///
/// A zero median falls back to the smallest positive pairwise distance, and
/// to 1 when every pair coincides.
pub fn median_pairwise_bandwidth(points: &[MaskedSample], spans: &[f64]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "bandwidth needs at least 2 points, got {}",
            points.len()
        )));
    }
    let d = points[0].dim();
    if let Some(bad) = points.iter().find(|p| p.dim() != d) {
        return Err(Error::Dimension {
            expected: d,
            got: bad.dim(),
        });
    }
    if spans.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: spans.len(),
        });
    }
    let mut dists = Vec::with_capacity(points.len() * (points.len() - 1) / 2);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            dists.push(heom_squared(&points[i], &points[j], spans).sqrt());
        }
    }
    let median = median(&mut dists);
    if median > 0.0 {
        return Ok(median);
    }
    let smallest = dists.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    Ok(if smallest.is_finite() { smallest } else { 1.0 })
}

/// Median of a nonempty slice; the mean of the two middle values for even length.
fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn p(x: &[f64]) -> MaskedSample {
        MaskedSample::new(x.iter().map(|&v| Some(v)).collect(), None)
    }

    #[test]
    fn single_target_gets_all_mass() {
        let spec = KernelSpec::gaussian(0.7).unwrap();
        let w = kernel_weights(&[p(&[3.0])], &p(&[0.0]), &spec, &[1.0]).unwrap();
        assert_eq!(w.weights, vec![1.0]);
    }

    #[test]
    fn equidistant_targets_split_evenly() {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let w = kernel_weights(&[p(&[-1.0]), p(&[1.0])], &p(&[0.0]), &spec, &[1.0]).unwrap();
        assert_eq!(w.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn gaussian_weights_at_zero_and_h() {
        // K(0) = 1, K(1) = e^{-1/2}; normalised by hand.
        let h = 0.8;
        let spec = KernelSpec::gaussian(h).unwrap();
        let w = kernel_weights(&[p(&[0.0]), p(&[h])], &p(&[0.0]), &spec, &[1.0]).unwrap();
        let e = (-0.5f64).exp();
        assert_abs_diff_eq!(w.weights[0], 1.0 / (1.0 + e), epsilon = 1e-14);
        assert_abs_diff_eq!(w.weights[0], 0.6225, epsilon = 1e-4);
        assert_abs_diff_eq!(w.weights[1], 0.3775, epsilon = 1e-4);
        assert!(!w.uniform_fallback);
    }

    #[test]
    fn underflow_falls_back_to_uniform() {
        let spec = KernelSpec::gaussian(1e-3).unwrap();
        let w = kernel_weights(&[p(&[5.0]), p(&[9.0])], &p(&[0.0]), &spec, &[1.0]).unwrap();
        assert!(w.uniform_fallback);
        assert_eq!(w.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn bad_inputs() {
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::gaussian(f64::NAN).is_err());
        let spec = KernelSpec::gaussian(1.0).unwrap();
        assert!(kernel_weights(&[], &p(&[0.0]), &spec, &[1.0]).is_err());
        assert!(median_pairwise_bandwidth(&[p(&[0.0])], &[1.0]).is_err());
    }

    #[test]
    fn bandwidth_small_cases() {
        let pts = [p(&[0.0]), p(&[1.0]), p(&[2.0])];
        assert_eq!(median_pairwise_bandwidth(&pts, &[1.0]).unwrap(), 1.0);
        assert_eq!(median_pairwise_bandwidth(&[p(&[0.0]), p(&[5.0])], &[1.0]).unwrap(), 5.0);
        // pairs: 0, 0, 0, 3, 3, 3 -> median 1.5
        let pts = [p(&[0.0]), p(&[0.0]), p(&[0.0]), p(&[3.0])];
        assert_eq!(median_pairwise_bandwidth(&pts, &[1.0]).unwrap(), 1.5);
        // mostly duplicates -> smallest positive distance
        let pts = [p(&[0.0]), p(&[0.0]), p(&[0.0]), p(&[0.0]), p(&[2.0])];
        assert_eq!(median_pairwise_bandwidth(&pts, &[1.0]).unwrap(), 2.0);
        assert_eq!(median_pairwise_bandwidth(&[p(&[1.0]), p(&[1.0])], &[1.0]).unwrap(), 1.0);
    }

    #[test]
    fn bandwidth_matches_brute_force_on_normal_cloud() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<MaskedSample> = (0..100)
            .map(|_| {
                let v: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
                p(&v)
            })
            .collect();
        let spans = [1.5, 2.0, 2.5];
        let mut all = Vec::new();
        for i in 0..100 {
            for j in 0..100 {
                if i < j {
                    let s: f64 = (0..3)
                        .map(|k| {
                            let t = (pts[i].x()[k].unwrap() - pts[j].x()[k].unwrap()) / spans[k];
                            t * t
                        })
                        .sum();
                    all.push(s.sqrt());
                }
            }
        }
        assert_eq!(all.len(), 4950);
        all.sort_by(f64::total_cmp);
        let oracle = 0.5 * (all[2474] + all[2475]);
        assert_abs_diff_eq!(median_pairwise_bandwidth(&pts, &spans).unwrap(), oracle, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn weights_normalised_and_order_equivariant(
            xs in proptest::collection::vec(-3.0f64..3.0, 1..15),
            h in 0.1f64..5.0,
        ) {
            let spec = KernelSpec::gaussian(h).unwrap();
            let targets: Vec<_> = xs.iter().map(|&v| p(&[v])).collect();
            let w = kernel_weights(&targets, &p(&[0.3]), &spec, &[2.0]).unwrap();
            prop_assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.weights.iter().all(|&v| v >= 0.0));
            let rev: Vec<_> = targets.iter().rev().cloned().collect();
            let wr = kernel_weights(&rev, &p(&[0.3]), &spec, &[2.0]).unwrap();
            for (a, b) in w.weights.iter().zip(wr.weights.iter().rev()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
