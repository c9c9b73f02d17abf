//! Conditional variance of `Y = b1 X1 + b2 X2 + eps` when `X1` goes missing
//! above `tau1` and `X2` below `tau2`.
//!
//! Given the observed coordinate, the missing one is a truncated conditional
//! normal, so its variance carries the usual inverse-Mills-ratio correction.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::mask::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Example1Params {
    pub beta1: f64,
    pub beta2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub noise_sd: f64,
    /// `M1 = 1` iff `X1 > tau1`.
    pub tau1: f64,
    /// `M2 = 1` iff `X2 < tau2`.
    pub tau2: f64,
}

impl Example1Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma1 > 0.0 && self.sigma2 > 0.0 && self.noise_sd > 0.0) {
            return Err(Error::Config("standard deviations must be positive".into()));
        }
        if self.rho.is_nan() || self.rho.abs() >= 1.0 {
            return Err(Error::Config(format!("|rho| must be < 1, got {}", self.rho)));
        }
        Ok(())
    }

    /// Mean and standard deviation of `X1 | X2 = x2`.
    pub fn x1_given_x2(&self, x2: f64) -> (f64, f64) {
        (
            self.mu1 + self.rho * self.sigma1 / self.sigma2 * (x2 - self.mu2),
            self.sigma1 * (1.0 - self.rho * self.rho).sqrt(),
        )
    }

    /// Mean and standard deviation of `X2 | X1 = x1`.
    pub fn x2_given_x1(&self, x1: f64) -> (f64, f64) {
        (
            self.mu2 + self.rho * self.sigma2 / self.sigma1 * (x1 - self.mu1),
            self.sigma2 * (1.0 - self.rho * self.rho).sqrt(),
        )
    }
}

/// `Var(Y | X_obs(m), M = m)` for `m` in `{00, 10, 01}`; `x_obs` is the single
/// observed coordinate (ignored for `00`).
pub fn example1_conditional_variance(p: &Example1Params, mask: &Mask, x_obs: f64) -> Result<f64> {
    p.validate()?;
    let noise = p.noise_sd * p.noise_sd;
    let std = Normal::standard();
    match mask.bits() {
        [false, false] => Ok(noise),
        [true, false] => {
            // X1 | X2 = x_obs truncated to (tau1, inf).
            let (mean, sd) = p.x1_given_x2(x_obs);
            let a = (p.tau1 - mean) / sd;
            let correction = if a == f64::NEG_INFINITY {
                1.0
            } else {
                let lambda = std.pdf(a) / std.sf(a);
                1.0 + a * lambda - lambda * lambda
            };
            Ok(p.beta1 * p.beta1 * sd * sd * correction + noise)
        }
        [false, true] => {
            // X2 | X1 = x_obs truncated to (-inf, tau2).
            let (mean, sd) = p.x2_given_x1(x_obs);
            let b = (p.tau2 - mean) / sd;
            let correction = if b == f64::INFINITY {
                1.0
            } else {
                let lambda = std.pdf(b) / std.cdf(b);
                1.0 - b * lambda - lambda * lambda
            };
            Ok(p.beta2 * p.beta2 * sd * sd * correction + noise)
        }
        _ => Err(Error::Domain(format!(
            "conditional variance is defined for masks 00, 10 and 01, got {mask}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn params() -> Example1Params {
        Example1Params {
            beta1: 1.5,
            beta2: -2.0,
            mu1: 0.5,
            mu2: -0.3,
            sigma1: 1.2,
            sigma2: 0.8,
            rho: 0.6,
            noise_sd: 0.7,
            tau1: 0.9,
            tau2: -0.1,
        }
    }

    fn m(s: &str) -> Mask {
        Mask::parse(s).unwrap()
    }

    #[test]
    fn fully_observed_is_noise_variance() {
        let p = params();
        assert_eq!(example1_conditional_variance(&p, &m("00"), 3.0).unwrap(), p.noise_sd * p.noise_sd);
    }

    #[test]
    fn no_truncation_no_correlation() {
        let mut p = params();
        p.rho = 0.0;
        p.tau1 = f64::NEG_INFINITY;
        let v = example1_conditional_variance(&p, &m("10"), 0.2).unwrap();
        assert!((v - (p.beta1.powi(2) * p.sigma1.powi(2) + 0.49)).abs() < 1e-12);
        p.tau2 = f64::INFINITY;
        let v = example1_conditional_variance(&p, &m("01"), 0.2).unwrap();
        assert!((v - (p.beta2.powi(2) * p.sigma2.powi(2) + 0.49)).abs() < 1e-12);
    }

    #[test]
    fn unsupported_mask() {
        assert!(matches!(
            example1_conditional_variance(&params(), &m("11"), 0.0),
            Err(Error::Domain(_))
        ));
        let mut p = params();
        p.rho = 1.0;
        assert!(example1_conditional_variance(&p, &m("10"), 0.0).is_err());
    }

    #[test]
    fn missingness_never_reduces_variance() {
        let base = params();
        for &rho in &[-0.9, -0.3, 0.0, 0.5, 0.95] {
            for &tau in &[-4.0, -1.0, 0.0, 1.0, 4.0] {
                for &x in &[-2.0, 0.0, 2.0] {
                    let p = Example1Params { rho, tau1: tau, tau2: tau, ..base };
                    for mask in ["10", "01"] {
                        let v = example1_conditional_variance(&p, &m(mask), x).unwrap();
                        assert!(v >= 0.49, "rho={rho} tau={tau} x={x} mask={mask}: {v}");
                    }
                }
            }
        }
    }

    /// Rejection sampling over the truncated conditional normal.
    fn monte_carlo_variance(p: &Example1Params, mask: &str, x_obs: f64, accepted: usize) -> f64 {
        let mut rng = stream(42, 0, Purpose::Train);
        let (mean, sd) = if mask == "10" { p.x1_given_x2(x_obs) } else { p.x2_given_x1(x_obs) };
        let mut ys = Vec::with_capacity(accepted);
        while ys.len() < accepted {
            let z: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            let xm = mean + sd * z;
            let y = if mask == "10" {
                if xm <= p.tau1 {
                    continue;
                }
                p.beta1 * xm + p.beta2 * x_obs + p.noise_sd * e
            } else {
                if xm >= p.tau2 {
                    continue;
                }
                p.beta1 * x_obs + p.beta2 * xm + p.noise_sd * e
            };
            ys.push(y);
        }
        let n = ys.len() as f64;
        let mean_y = ys.iter().sum::<f64>() / n;
        ys.iter().map(|y| (y - mean_y).powi(2)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn matches_rejection_sampling() {
        let p = params();
        for (mask, x) in [("10", 0.4), ("01", 1.1)] {
            let analytic = example1_conditional_variance(&p, &m(mask), x).unwrap();
            let mc = monte_carlo_variance(&p, mask, x, 200_000);
            assert!((analytic - mc).abs() / mc < 0.02, "{mask}: {analytic} vs {mc}");
        }
    }
}
