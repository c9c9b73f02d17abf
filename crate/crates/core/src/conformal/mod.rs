//! Interval constructors.
//!
//! Each method is split into a calibration step that depends only on the test
//! mask (or on nothing, for the mask-blind methods) and a cheap per-point step,
//! so batch evaluation can reuse the calibration across test points that share
//! a mask. The free functions ([`split_cp`], [`nexcp`], ...) run both steps for
//! a single test point.

mod cqr;
mod engine;
mod interval;
mod lcp;
mod nexcp;
mod split;

pub use cqr::{cqr, cqr_mda_exact, cqr_score, CqrCalibration, CqrMdaCalibration};
pub use engine::{EngineConfig, IntervalEngine};
pub use interval::{Diagnostic, Method, PredictionInterval};
pub use lcp::{lcp, LcpCalibration, LocalizedScore};
pub use nexcp::{nexcp, nexcp_threshold, nexcp_weights, NexcpCalibration, NexcpWeights, DEFAULT_RHO};
pub use split::{conformal_quantile, split_cp, SplitCalibration};

use crate::data::{MaskedDataset, MaskedSample};
use crate::error::{Error, Result};
use crate::models::FittedPipeline;

/// Absolute residual `|y - prediction|` for one sample.
pub(crate) fn abs_residual(pipeline: &FittedPipeline, s: &MaskedSample) -> Result<f64> {
    let y = s.y().ok_or_else(|| Error::Data("calibration sample has no response".into()))?;
    Ok((y - pipeline.predict_point(s)).abs())
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

pub(crate) fn check_dim(ds: &MaskedDataset, s: &MaskedSample) -> Result<()> {
    if ds.dim() != s.dim() {
        return Err(Error::Dimension {
            expected: ds.dim(),
            got: s.dim(),
        });
    }
    Ok(())
}

pub(crate) fn check_mask(expected: &crate::mask::Mask, s: &MaskedSample) -> Result<()> {
    if s.mask() != expected {
        return Err(Error::Config(format!(
            "calibration built for mask {expected} used on mask {}",
            s.mask()
        )));
    }
    Ok(())
}
