use super::{abs_residual, check_alpha};
use crate::conformal::PredictionInterval;
use crate::data::{MaskedDataset, MaskedSample};
use crate::error::{Error, Result};
use crate::metrics::WeightedEmpirical;
use crate::models::FittedPipeline;

/// `(1 - alpha)` quantile of the scores with equal mass on each score and on
/// `+inf`. An empty score set gives `+inf`.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    WeightedEmpirical::uniform_with_inf(scores)?.quantile(1.0 - alpha)
}

/// Split conformal calibration with absolute-residual scores, ignoring masks.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCalibration {
    pub scores: Vec<f64>,
    pub half_width: f64,
}

impl SplitCalibration {
    pub fn new(pipeline: &FittedPipeline, calib: &MaskedDataset, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if calib.is_empty() {
            return Err(Error::InsufficientData("split conformal needs calibration samples".into()));
        }
        let scores = calib
            .samples()
            .iter()
            .map(|s| abs_residual(pipeline, s))
            .collect::<Result<Vec<_>>>()?;
        let half_width = conformal_quantile(&scores, alpha)?;
        Ok(SplitCalibration { scores, half_width })
    }

    pub fn interval(&self, pipeline: &FittedPipeline, test: &MaskedSample) -> PredictionInterval {
        PredictionInterval::new(pipeline.predict_point(test), self.half_width)
    }
}

pub fn split_cp(
    pipeline: &FittedPipeline,
    calib: &MaskedDataset,
    test: &MaskedSample,
    alpha: f64,
) -> Result<PredictionInterval> {
    super::check_dim(calib, test)?;
    Ok(SplitCalibration::new(pipeline, calib, alpha)?.interval(pipeline, test))
}
