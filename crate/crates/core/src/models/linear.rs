use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::pipeline::FittedRegressor;
use crate::error::{Error, Result};

/// Penalty added to the scaled Gram matrix when it is numerically singular.
pub const RIDGE_PENALTY: f64 = 1e-8;

/// `intercept + coef' x[predictors]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
    /// Input coordinates the coefficients apply to; `None` means all, in order.
    pub predictors: Option<Vec<usize>>,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match &self.predictors {
            None => self.intercept + self.coef.iter().zip(x).map(|(c, v)| c * v).sum::<f64>(),
            Some(idx) => self.intercept + self.coef.iter().zip(idx).map(|(c, &j)| c * x[j]).sum::<f64>(),
        }
    }
}

/// Least squares with intercept over the listed columns of the listed rows.
/// Returns the model and whether the ridge fallback was needed.
pub(crate) fn solve_ols(
    x: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    columns: &[usize],
) -> Result<(LinearModel, bool)> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::InsufficientData("least squares needs at least one row".into()));
    }
    let p = columns.len();
    let nf = n as f64;
    let y_mean = rows.iter().map(|&i| y[i]).sum::<f64>() / nf;
    let x_mean: Vec<f64> = columns
        .iter()
        .map(|&j| rows.iter().map(|&i| x[i][j]).sum::<f64>() / nf)
        .collect();

    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    for &i in rows {
        let centered: Vec<f64> = columns.iter().zip(&x_mean).map(|(&j, m)| x[i][j] - m).collect();
        let yc = y[i] - y_mean;
        for a in 0..p {
            xty[a] += centered[a] * yc;
            for b in a..p {
                gram[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    gram /= nf;
    xty /= nf;

    let (beta, ridge) = if p == 0 {
        (DVector::zeros(0), false)
    } else {
        match well_conditioned_solve(&gram, &xty) {
            Some(b) => (b, false),
            None => {
                let penalised = &gram + DMatrix::<f64>::identity(p, p) * RIDGE_PENALTY;
                let b = nalgebra::Cholesky::new(penalised)
                    .ok_or_else(|| Error::Data("least squares system is not finite".into()))?
                    .solve(&xty);
                (b, true)
            }
        }
    };
    if beta.iter().any(|v| !v.is_finite()) || !y_mean.is_finite() {
        return Err(Error::Data("least squares produced non-finite coefficients".into()));
    }
    let intercept = y_mean - beta.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    Ok((
        LinearModel {
            intercept,
            coef: beta.iter().copied().collect(),
            predictors: Some(columns.to_vec()),
        },
        ridge,
    ))
}

fn well_conditioned_solve(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = gram.diagonal().iter().fold(0.0f64, |m, v| m.max(*v));
    if scale <= 0.0 || !scale.is_finite() {
        return None;
    }
    let chol = nalgebra::Cholesky::new(gram.clone())?;
    let l = chol.l_dirty();
    let min_pivot = (0..gram.nrows()).map(|k| l[(k, k)] * l[(k, k)]).fold(f64::INFINITY, f64::min);
    if min_pivot < 1e-12 * scale {
        return None;
    }
    Some(chol.solve(rhs))
}

/// Ordinary least squares with intercept on a complete design. Requires `n > d`.
pub fn fit_least_squares(x: &[Vec<f64>], y: &[f64]) -> Result<FittedRegressor> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x.first().map_or(0, Vec::len);
    if let Some(bad) = x.iter().find(|r| r.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            got: bad.len(),
        });
    }
    if x.len() <= d {
        return Err(Error::InsufficientData(format!(
            "least squares needs more rows ({}) than covariates ({d})",
            x.len()
        )));
    }
    let rows: Vec<usize> = (0..x.len()).collect();
    let columns: Vec<usize> = (0..d).collect();
    let (mut model, ridge) = solve_ols(x, y, &rows, &columns)?;
    model.predictors = None;
    if ridge {
        log::warn!("rank-deficient design: least squares used ridge penalty {RIDGE_PENALTY}");
    }
    Ok(FittedRegressor::LeastSquares { model, ridge })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn unwrap_ls(r: FittedRegressor) -> (LinearModel, bool) {
        match r {
            FittedRegressor::LeastSquares { model, ridge } => (model, ridge),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn noiseless_line() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.37 - 2.0, ((i * 7) % 5) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] + 1.0).collect();
        let (m, ridge) = unwrap_ls(fit_least_squares(&x, &y).unwrap());
        assert!(!ridge);
        assert!((m.coef[0] - 2.0).abs() < 1e-8);
        assert!(m.coef[1].abs() < 1e-8);
        assert!((m.intercept - 1.0).abs() < 1e-8);
    }

    #[test]
    fn constant_response() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y = vec![3.5; 10];
        let (m, _) = unwrap_ls(fit_least_squares(&x, &y).unwrap());
        assert!(m.coef.iter().all(|c| c.abs() < 1e-12));
        assert!((m.intercept - 3.5).abs() < 1e-12);
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = stream(5, 0, Purpose::Train);
        let n = 200;
        let d = 4;
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| 0.5 - r[0] + 2.0 * r[2] + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        // Uncentred normal equations with an explicit intercept column, solved by LU.
        let design = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
        let target = DVector::from_vec(y.clone());
        let oracle = (design.transpose() * &design).lu().solve(&(design.transpose() * target)).unwrap();
        let (m, _) = unwrap_ls(fit_least_squares(&x, &y).unwrap());
        assert!((m.intercept - oracle[0]).abs() < 1e-8);
        for j in 0..d {
            assert!((m.coef[j] - oracle[j + 1]).abs() < 1e-8);
        }
    }

    #[test]
    fn rank_deficient_uses_ridge() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 3.0 * i as f64).collect();
        let (m, ridge) = unwrap_ls(fit_least_squares(&x, &y).unwrap());
        assert!(ridge);
        let pred = m.predict(&[4.0, 8.0]);
        assert!((pred - 12.0).abs() < 1e-6);
    }

    #[test]
    fn needs_more_rows_than_columns() {
        let x = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert!(matches!(fit_least_squares(&x, &[1.0, 2.0]), Err(Error::InsufficientData(_))));
        assert!(fit_least_squares(&x, &[1.0]).is_err());
    }
}
