use serde::{Deserialize, Serialize};

use super::linear::{solve_ols, LinearModel};
use super::pipeline::FittedRegressor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileConfig {
    pub max_iter: usize,
    /// Relative objective improvement below which a window counts as stalled.
    pub tol: f64,
    /// Iterations without sufficient improvement before stopping.
    pub patience: usize,
}

impl Default for QuantileConfig {
    fn default() -> Self {
        QuantileConfig {
            max_iter: 20_000,
            tol: 1e-6,
            patience: 1_000,
        }
    }
}

/// Check loss `r (tau - 1{r < 0})`.
pub fn pinball_loss(residual: f64, tau: f64) -> f64 {
    if residual < 0.0 {
        (tau - 1.0) * residual
    } else {
        tau * residual
    }
}

fn mean_pinball(z: &[Vec<f64>], y: &[f64], theta: &[f64], tau: f64) -> f64 {
    z.iter()
        .zip(y)
        .map(|(row, &yi)| pinball_loss(yi - predict_std(theta, row), tau))
        .sum::<f64>()
        / y.len() as f64
}

fn predict_std(theta: &[f64], row: &[f64]) -> f64 {
    theta[0] + theta[1..].iter().zip(row).map(|(t, v)| t * v).sum::<f64>()
}

/// One linear quantile fit on standardised covariates. Returns the model in the
/// original coordinates and whether the objective stalled before `max_iter`.
fn fit_level(x: &[Vec<f64>], y: &[f64], tau: f64, cfg: &QuantileConfig) -> Result<(LinearModel, bool)> {
    let n = y.len();
    let d = x[0].len();
    let nf = n as f64;
    let center: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let v = x.iter().map(|r| (r[j] - center[j]).powi(2)).sum::<f64>() / nf;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|r| (0..d).map(|j| (r[j] - center[j]) / scale[j]).collect())
        .collect();

    // Warm start: least squares shifted by the empirical tau-quantile of residuals.
    let rows: Vec<usize> = (0..n).collect();
    let cols: Vec<usize> = (0..d).collect();
    let (ls, _) = solve_ols(&z, y, &rows, &cols)?;
    let mut theta: Vec<f64> = std::iter::once(ls.intercept).chain(ls.coef.iter().copied()).collect();
    let mut resid: Vec<f64> = z.iter().zip(y).map(|(r, &yi)| yi - predict_std(&theta, r)).collect();
    resid.sort_by(f64::total_cmp);
    let k = ((tau * nf).ceil() as usize).clamp(1, n) - 1;
    theta[0] += resid[k];

    let y_mean = y.iter().sum::<f64>() / nf;
    let y_sd = (y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / nf).sqrt();
    let step0 = 0.05 * if y_sd > 0.0 { y_sd } else { 1.0 };

    let mut best = theta.clone();
    let mut best_obj = mean_pinball(&z, y, &theta, tau);
    let mut since_improvement = 0usize;
    let mut converged = false;
    let mut grad = vec![0.0; d + 1];
    for t in 0..cfg.max_iter {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (row, &yi) in z.iter().zip(y) {
            let r = yi - predict_std(&theta, row);
            let w = if r < 0.0 { 1.0 - tau } else { -tau };
            grad[0] += w;
            for (g, v) in grad[1..].iter_mut().zip(row) {
                *g += w * v;
            }
        }
        let step = step0 / ((t + 1) as f64).sqrt();
        for (th, g) in theta.iter_mut().zip(&grad) {
            *th -= step * g / nf;
        }
        let obj = mean_pinball(&z, y, &theta, tau);
        if obj < best_obj * (1.0 - cfg.tol) {
            best_obj = obj;
            best.clone_from(&theta);
            since_improvement = 0;
        } else {
            if obj < best_obj {
                best_obj = obj;
                best.clone_from(&theta);
            }
            since_improvement += 1;
            if since_improvement >= cfg.patience {
                converged = true;
                break;
            }
        }
        if best_obj == 0.0 {
            converged = true;
            break;
        }
    }

    let coef: Vec<f64> = (0..d).map(|j| best[j + 1] / scale[j]).collect();
    let intercept = best[0] - coef.iter().zip(&center).map(|(c, m)| c * m).sum::<f64>();
    Ok((
        LinearModel {
            intercept,
            coef,
            predictors: None,
        },
        converged,
    ))
}

/// Linear quantile regressions at levels `alpha/2` and `1 - alpha/2`, fitted by
/// subgradient descent on the pinball loss.
pub fn fit_quantile_pair(x: &[Vec<f64>], y: &[f64], alpha: f64, cfg: &QuantileConfig) -> Result<FittedRegressor> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x.first().map_or(0, Vec::len);
    if x.len() <= d {
        return Err(Error::InsufficientData(format!(
            "quantile regression needs more rows ({}) than covariates ({d})",
            x.len()
        )));
    }
    let (lo, lo_ok) = fit_level(x, y, alpha / 2.0, cfg)?;
    let (hi, hi_ok) = fit_level(x, y, 1.0 - alpha / 2.0, cfg)?;
    if !(lo_ok && hi_ok) {
        log::warn!("quantile regression hit max_iter = {} before stalling", cfg.max_iter);
    }
    Ok(FittedRegressor::Quantile {
        lo,
        hi,
        converged: lo_ok && hi_ok,
    })
}
