use super::{abs_residual, check_alpha, check_dim, check_mask, conformal_quantile};
use crate::conformal::{Diagnostic, PredictionInterval};
use crate::data::{available_cases, MaskedDataset, MaskedSample};
use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::metrics::{heom_distance, kernel_weights_from_distances, KernelSpec, WeightedEmpirical};
use crate::models::FittedPipeline;

/// Score recentred by its kernel-localised training quantile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizedScore {
    pub base: f64,
    pub local_quantile: f64,
    pub adjusted: f64,
}

impl LocalizedScore {
    pub fn new(base: f64, local_quantile: f64) -> Self {
        LocalizedScore {
            base,
            local_quantile,
            adjusted: base - local_quantile,
        }
    }
}

/// Training and calibration quantities for one test mask. Distances are taken
/// between samples remasked to that mask.
#[derive(Debug, Clone, PartialEq)]
pub struct LcpCalibration {
    pub mask: Mask,
    pub alpha: f64,
    pub kernel: KernelSpec,
    pub train_available: Vec<usize>,
    pub train_scores: Vec<f64>,
    pub calib_available: Vec<usize>,
    /// Aligned with `calib_available`.
    pub localized: Vec<LocalizedScore>,
    /// `(1 - alpha)` uniform-plus-infinity quantile of the adjusted scores.
    pub correction: f64,
    /// Some calibration point needed the uniform kernel fallback.
    pub kernel_fallback: bool,
    train_cases: Vec<MaskedSample>,
    spans: Vec<f64>,
}

impl LcpCalibration {
    #[allow(clippy::too_many_arguments)]
    pub fn for_mask(
        pipeline: &FittedPipeline,
        train: &MaskedDataset,
        calib: &MaskedDataset,
        mask: &Mask,
        alpha: f64,
        kernel: KernelSpec,
        spans: &[f64],
    ) -> Result<Self> {
        check_alpha(alpha)?;
        kernel.validate()?;
        if spans.len() != mask.len() || train.dim() != mask.len() || calib.dim() != mask.len() {
            return Err(Error::Dimension {
                expected: mask.len(),
                got: spans.len(),
            });
        }
        let train_available = available_cases(train, mask)?;
        let train_cases = train_available
            .iter()
            .map(|&i| train.get(i).remask(mask))
            .collect::<Result<Vec<_>>>()?;
        let train_scores = train_cases
            .iter()
            .map(|s| abs_residual(pipeline, s))
            .collect::<Result<Vec<_>>>()?;
        let calib_available = available_cases(calib, mask)?;

        let mut cal = LcpCalibration {
            mask: mask.clone(),
            alpha,
            kernel,
            train_available,
            train_scores,
            calib_available,
            localized: Vec::new(),
            correction: f64::INFINITY,
            kernel_fallback: false,
            train_cases,
            spans: spans.to_vec(),
        };
        if cal.train_cases.is_empty() {
            return Ok(cal);
        }
        let mut localized = Vec::with_capacity(cal.calib_available.len());
        for &i in &cal.calib_available {
            let r = calib.get(i).remask(mask)?;
            let (q, fallback) = cal.local_quantile(&r)?;
            cal.kernel_fallback |= fallback;
            localized.push(LocalizedScore::new(abs_residual(pipeline, &r)?, q));
        }
        let adjusted: Vec<f64> = localized.iter().map(|l| l.adjusted).collect();
        cal.correction = conformal_quantile(&adjusted, alpha)?;
        cal.localized = localized;
        Ok(cal)
    }

    /// `(1 - alpha)` quantile of the kernel-weighted training scores around
    /// `x`, and whether the uniform fallback was used. `x` must carry the
    /// calibration mask.
    pub fn local_quantile(&self, x: &MaskedSample) -> Result<(f64, bool)> {
        if self.train_cases.is_empty() {
            return Err(Error::InsufficientData("no training case available for this mask".into()));
        }
        let distances = self
            .train_cases
            .iter()
            .map(|t| heom_distance(t, x, &self.spans))
            .collect::<Result<Vec<_>>>()?;
        let w = kernel_weights_from_distances(&distances, &self.kernel);
        let q = WeightedEmpirical::from_weighted(&self.train_scores, &w.weights)?.quantile(1.0 - self.alpha)?;
        Ok((q, w.uniform_fallback))
    }

    pub fn interval(&self, pipeline: &FittedPipeline, test: &MaskedSample) -> Result<PredictionInterval> {
        check_mask(&self.mask, test)?;
        let center = pipeline.predict_point(test);
        if self.train_cases.is_empty() {
            return Ok(PredictionInterval::infinite(center, Diagnostic::NoAvailableTraining));
        }
        if self.calib_available.is_empty() {
            return Ok(PredictionInterval::infinite(center, Diagnostic::NoAvailableCalibration));
        }
        let (q, fallback) = self.local_quantile(test)?;
        let diagnostic = (fallback || self.kernel_fallback).then_some(Diagnostic::KernelFallback);
        Ok(PredictionInterval::new(center, q + self.correction).with_diagnostic(diagnostic))
    }
}

#[allow(clippy::too_many_arguments)]
pub fn lcp(
    pipeline: &FittedPipeline,
    train: &MaskedDataset,
    calib: &MaskedDataset,
    test: &MaskedSample,
    alpha: f64,
    kernel: KernelSpec,
    spans: &[f64],
) -> Result<PredictionInterval> {
    check_dim(calib, test)?;
    LcpCalibration::for_mask(pipeline, train, calib, test.mask(), alpha, kernel, spans)?.interval(pipeline, test)
}
