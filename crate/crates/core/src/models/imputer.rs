use serde::{Deserialize, Serialize};

use super::linear::{solve_ols, LinearModel};
use crate::data::{MaskedDataset, MaskedSample};
use crate::error::{Error, Result};

pub const DEFAULT_CHAINED_ITERS: usize = 5;

/// Rounds of the chained update applied when imputing a new sample.
const TRANSFORM_MAX_ROUNDS: usize = 200;
const TRANSFORM_TOL: f64 = 1e-12;

/// Chained-equations imputer: one linear conditional-mean model per column,
/// regressed on every other column, plus column means as the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedImputer {
    means: Vec<f64>,
    /// `None` for a column with no observed training value, or when fitted
    /// with zero iterations (pure mean imputation).
    models: Vec<Option<LinearModel>>,
    iters: usize,
    /// Columns that were entirely missing in training and fall back to 0.
    pub all_missing_columns: Vec<usize>,
    /// Columns whose conditional model needed the ridge fallback.
    pub ridge_columns: Vec<usize>,
}

impl FittedImputer {
    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn iters(&self) -> usize {
        self.iters
    }

    /// Completes `s`: observed coordinates pass through untouched; missing ones
    /// start at the column means and are refined by cycling the column models in
    /// index order until they stop moving.
    pub fn impute(&self, s: &MaskedSample) -> Vec<f64> {
        assert_eq!(s.dim(), self.dim(), "sample dimension does not match imputer");
        let mut x: Vec<f64> = s
            .x()
            .iter()
            .zip(&self.means)
            .map(|(v, m)| v.unwrap_or(*m))
            .collect();
        let missing: Vec<usize> = s
            .mask()
            .mis_indices()
            .into_iter()
            .filter(|&j| self.models[j].is_some())
            .collect();
        if missing.is_empty() {
            return x;
        }
        for _ in 0..TRANSFORM_MAX_ROUNDS {
            let mut moved = 0.0f64;
            for &j in &missing {
                let model = self.models[j].as_ref().expect("filtered above");
                let new = model.predict(&x);
                moved = moved.max((new - x[j]).abs() / (1.0 + x[j].abs()));
                x[j] = new;
            }
            if moved <= TRANSFORM_TOL {
                break;
            }
        }
        x
    }
}

/// Fits the chained imputer on `train` (responses are ignored). Rows are put
/// in canonical order first, so the result does not depend on their order.
///
/// Missing entries start at column means; each of `iters` sweeps refits every
/// incomplete column on the current completion (rows where it is observed) and
/// refreshes its imputed entries. The stored per-column models come from the
/// final completion.
pub fn fit_chained_imputer(train: &MaskedDataset, iters: usize) -> Result<FittedImputer> {
    if train.is_empty() {
        return Err(Error::InsufficientData("imputer needs at least one training sample".into()));
    }
    let train = train.canonical();
    let d = train.dim();
    let samples = train.samples();
    let observed_rows: Vec<Vec<usize>> = (0..d)
        .map(|j| (0..samples.len()).filter(|&i| samples[i].x()[j].is_some()).collect())
        .collect();
    let missing_rows: Vec<Vec<usize>> = (0..d)
        .map(|j| (0..samples.len()).filter(|&i| samples[i].x()[j].is_none()).collect())
        .collect();

    let mut all_missing_columns = Vec::new();
    let means: Vec<f64> = (0..d)
        .map(|j| {
            let rows = &observed_rows[j];
            if rows.is_empty() {
                all_missing_columns.push(j);
                0.0
            } else {
                rows.iter().map(|&i| samples[i].x()[j].unwrap()).sum::<f64>() / rows.len() as f64
            }
        })
        .collect();
    if !all_missing_columns.is_empty() {
        log::warn!("columns {all_missing_columns:?} have no observed value; imputing 0");
    }

    let mut completed: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.x().iter().zip(&means).map(|(v, m)| v.unwrap_or(*m)).collect())
        .collect();

    if iters == 0 {
        return Ok(FittedImputer {
            means,
            models: vec![None; d],
            iters,
            all_missing_columns,
            ridge_columns: Vec::new(),
        });
    }

    let others = |j: usize| -> Vec<usize> { (0..d).filter(|&k| k != j).collect() };
    // Observed target values per column, for the regression response.
    let targets: Vec<Vec<f64>> = (0..d)
        .map(|j| samples.iter().map(|s| s.x()[j].unwrap_or(f64::NAN)).collect())
        .collect();

    for _ in 0..iters {
        for j in 0..d {
            if missing_rows[j].is_empty() || observed_rows[j].is_empty() {
                continue;
            }
            let (model, _) = solve_ols(&completed, &targets[j], &observed_rows[j], &others(j))?;
            for &i in &missing_rows[j] {
                completed[i][j] = model.predict(&completed[i]);
            }
        }
    }

    let mut ridge_columns = Vec::new();
    let models = (0..d)
        .map(|j| {
            if observed_rows[j].is_empty() {
                return Ok(None);
            }
            let (model, ridge) = solve_ols(&completed, &targets[j], &observed_rows[j], &others(j))?;
            if ridge {
                ridge_columns.push(j);
            }
            Ok(Some(model))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(FittedImputer {
        means,
        models,
        iters,
        all_missing_columns,
        ridge_columns,
    })
}

pub fn impute(imp: &FittedImputer, s: &MaskedSample) -> Vec<f64> {
    imp.impute(s)
}
