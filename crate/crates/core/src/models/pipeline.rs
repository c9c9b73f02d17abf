use serde::{Deserialize, Serialize};

use super::imputer::{fit_chained_imputer, FittedImputer, DEFAULT_CHAINED_ITERS};
use super::linear::{fit_least_squares, LinearModel};
use super::quantile::{fit_quantile_pair, QuantileConfig};
use crate::data::{MaskedDataset, MaskedSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedRegressor {
    LeastSquares {
        model: LinearModel,
        ridge: bool,
    },
    /// Lower and upper conditional quantile planes.
    Quantile {
        lo: LinearModel,
        hi: LinearModel,
        converged: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    Point(f64),
    /// Always ordered: `lo <= hi`.
    Band { lo: f64, hi: f64 },
}

impl FittedRegressor {
    pub fn predict(&self, x: &[f64]) -> Prediction {
        match self {
            FittedRegressor::LeastSquares { model, .. } => Prediction::Point(model.predict(x)),
            FittedRegressor::Quantile { lo, hi, .. } => {
                let (a, b) = (lo.predict(x), hi.predict(x));
                // Crossing planes are repaired by swapping.
                Prediction::Band {
                    lo: a.min(b),
                    hi: a.max(b),
                }
            }
        }
    }

    /// Point prediction; for a quantile pair, the band midpoint.
    pub fn predict_point(&self, x: &[f64]) -> f64 {
        match self.predict(x) {
            Prediction::Point(v) => v,
            Prediction::Band { lo, hi } => 0.5 * (lo + hi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    LeastSquares,
    QuantilePair,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub imputer_iters: usize,
    pub quantile: QuantileConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            imputer_iters: DEFAULT_CHAINED_ITERS,
            quantile: QuantileConfig::default(),
        }
    }
}

/// Imputer followed by a regressor, both fitted on the same training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub imputer: FittedImputer,
    pub regressor: FittedRegressor,
}

impl FittedPipeline {
    /// Fits the imputer on `train`, then the regressor on the imputed training
    /// covariates. Every training sample needs a response.
    pub fn fit(train: &MaskedDataset, kind: RegressorKind, alpha: f64, cfg: &PipelineConfig) -> Result<Self> {
        let imputer = fit_chained_imputer(train, cfg.imputer_iters)?;
        Self::fit_with_imputer(train, imputer, kind, alpha, cfg)
    }

    /// Fits only the regressor, reusing an imputer already fitted on `train`.
    /// Like the imputer, the regressor sees the rows in canonical order.
    pub fn fit_with_imputer(
        train: &MaskedDataset,
        imputer: FittedImputer,
        kind: RegressorKind,
        alpha: f64,
        cfg: &PipelineConfig,
    ) -> Result<Self> {
        let train = train.canonical();
        let y = responses(&train)?;
        let x: Vec<Vec<f64>> = train.samples().iter().map(|s| imputer.impute(s)).collect();
        let regressor = match kind {
            RegressorKind::LeastSquares => fit_least_squares(&x, &y)?,
            RegressorKind::QuantilePair => fit_quantile_pair(&x, &y, alpha, &cfg.quantile)?,
        };
        Ok(FittedPipeline { imputer, regressor })
    }

    pub fn kind(&self) -> RegressorKind {
        match self.regressor {
            FittedRegressor::LeastSquares { .. } => RegressorKind::LeastSquares,
            FittedRegressor::Quantile { .. } => RegressorKind::QuantilePair,
        }
    }

    pub fn predict(&self, s: &MaskedSample) -> Prediction {
        self.regressor.predict(&self.imputer.impute(s))
    }

    pub fn predict_point(&self, s: &MaskedSample) -> f64 {
        self.regressor.predict_point(&self.imputer.impute(s))
    }
}

/// Responses of every sample, or a data error naming the first missing one.
pub fn responses(ds: &MaskedDataset) -> Result<Vec<f64>> {
    ds.samples()
        .iter()
        .enumerate()
        .map(|(i, s)| s.y().ok_or_else(|| Error::Data(format!("sample {i} has no response"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::synth::{AmputeConfig, Amputer, DgpConfig, GaussianLinear, Mechanism};

    fn train_set(seed: u64) -> MaskedDataset {
        let gen = GaussianLinear::new(DgpConfig::benchmark(3)).unwrap();
        let data = gen.sample(300, &mut stream(seed, 0, Purpose::Train));
        let amp = Amputer::calibrate(&AmputeConfig::new(Mechanism::Mcar, 3), &data.x).unwrap();
        amp.apply(&data.x, Some(&data.y), &mut stream(seed, 0, Purpose::Calib)).unwrap()
    }

    #[test]
    fn crossing_planes_are_swapped() {
        let r = FittedRegressor::Quantile {
            lo: LinearModel { intercept: 1.0, coef: vec![1.0], predictors: None },
            hi: LinearModel { intercept: 0.0, coef: vec![-1.0], predictors: None },
            converged: true,
        };
        assert_eq!(r.predict(&[2.0]), Prediction::Band { lo: -2.0, hi: 3.0 });
    }

    #[test]
    fn missing_response_rejected() {
        let ds = MaskedDataset::new(1, vec![MaskedSample::new(vec![Some(1.0)], None)]).unwrap();
        assert!(matches!(
            FittedPipeline::fit(&ds, RegressorKind::LeastSquares, 0.1, &PipelineConfig::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn repeated_fits_are_identical() {
        let ds = train_set(3);
        let cfg = PipelineConfig::default();
        for kind in [RegressorKind::LeastSquares, RegressorKind::QuantilePair] {
            let a = FittedPipeline::fit(&ds, kind, 0.1, &cfg).unwrap();
            let b = FittedPipeline::fit(&ds, kind, 0.1, &cfg).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.kind(), kind);
        }
    }

    #[test]
    fn row_order_does_not_matter() {
        let ds = train_set(5);
        let mut rows = ds.samples().to_vec();
        rows.reverse();
        rows.rotate_left(17);
        let shuffled = MaskedDataset::new(3, rows).unwrap();
        for kind in [RegressorKind::LeastSquares, RegressorKind::QuantilePair] {
            let a = FittedPipeline::fit(&ds, kind, 0.1, &PipelineConfig::default()).unwrap();
            let b = FittedPipeline::fit(&shuffled, kind, 0.1, &PipelineConfig::default()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn pipeline_predicts_close_to_truth_when_complete() {
        let ds = train_set(4);
        let p = FittedPipeline::fit(&ds, RegressorKind::LeastSquares, 0.1, &PipelineConfig::default()).unwrap();
        let s = MaskedSample::new(vec![Some(1.0), Some(1.0), Some(1.0)], None);
        // beta'x = 1 + 2 - 1 = 2
        assert!((p.predict_point(&s) - 2.0).abs() < 0.3);
    }
}
