use super::{check_alpha, check_dim, conformal_quantile};
use crate::conformal::{Diagnostic, PredictionInterval};
use crate::data::{available_cases, MaskedDataset, MaskedSample};
use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::models::{FittedPipeline, Prediction};

fn band(pipeline: &FittedPipeline, s: &MaskedSample) -> Result<(f64, f64)> {
    match pipeline.predict(s) {
        Prediction::Band { lo, hi } => Ok((lo, hi)),
        Prediction::Point(_) => Err(Error::Config("CQR needs a quantile-regression pipeline".into())),
    }
}

/// `max(lo - y, y - hi)`; negative inside the band.
pub fn cqr_score(lo: f64, hi: f64, y: f64) -> f64 {
    (lo - y).max(y - hi)
}

fn scored(pipeline: &FittedPipeline, s: &MaskedSample) -> Result<f64> {
    let y = s.y().ok_or_else(|| Error::Data("calibration sample has no response".into()))?;
    let (lo, hi) = band(pipeline, s)?;
    Ok(cqr_score(lo, hi, y))
}

/// `[lo - q, hi + q]` as a centred interval.
fn extend(lo: f64, hi: f64, q: f64) -> PredictionInterval {
    PredictionInterval::new(0.5 * (lo + hi), 0.5 * (hi - lo) + q)
}

/// Conformalised quantile regression on the imputed calibration points.
#[derive(Debug, Clone, PartialEq)]
pub struct CqrCalibration {
    pub scores: Vec<f64>,
    pub correction: f64,
}

impl CqrCalibration {
    pub fn new(pipeline: &FittedPipeline, calib: &MaskedDataset, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if calib.is_empty() {
            return Err(Error::InsufficientData("CQR needs calibration samples".into()));
        }
        let scores = calib
            .samples()
            .iter()
            .map(|s| scored(pipeline, s))
            .collect::<Result<Vec<_>>>()?;
        let correction = conformal_quantile(&scores, alpha)?;
        Ok(CqrCalibration { scores, correction })
    }

    pub fn interval(&self, pipeline: &FittedPipeline, test: &MaskedSample) -> Result<PredictionInterval> {
        let (lo, hi) = band(pipeline, test)?;
        Ok(extend(lo, hi, self.correction))
    }
}

/// CQR with available cases remasked to the test mask and equal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CqrMdaCalibration {
    pub mask: Mask,
    pub available: Vec<usize>,
    pub scores: Vec<f64>,
    pub correction: f64,
}

impl CqrMdaCalibration {
    pub fn for_mask(pipeline: &FittedPipeline, calib: &MaskedDataset, mask: &Mask, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let available = available_cases(calib, mask)?;
        let scores = available
            .iter()
            .map(|&i| scored(pipeline, &calib.get(i).remask(mask)?))
            .collect::<Result<Vec<_>>>()?;
        let correction = conformal_quantile(&scores, alpha)?;
        Ok(CqrMdaCalibration {
            mask: mask.clone(),
            available,
            scores,
            correction,
        })
    }

    pub fn interval(&self, pipeline: &FittedPipeline, test: &MaskedSample) -> Result<PredictionInterval> {
        super::check_mask(&self.mask, test)?;
        let (lo, hi) = band(pipeline, test)?;
        let diagnostic = self.available.is_empty().then_some(Diagnostic::NoAvailableCalibration);
        Ok(extend(lo, hi, self.correction).with_diagnostic(diagnostic))
    }
}

pub fn cqr(
    q_pipeline: &FittedPipeline,
    calib: &MaskedDataset,
    test: &MaskedSample,
    alpha: f64,
) -> Result<PredictionInterval> {
    check_dim(calib, test)?;
    CqrCalibration::new(q_pipeline, calib, alpha)?.interval(q_pipeline, test)
}

pub fn cqr_mda_exact(
    q_pipeline: &FittedPipeline,
    calib: &MaskedDataset,
    test: &MaskedSample,
    alpha: f64,
) -> Result<PredictionInterval> {
    check_dim(calib, test)?;
    CqrMdaCalibration::for_mask(q_pipeline, calib, test.mask(), alpha)?.interval(q_pipeline, test)
}
