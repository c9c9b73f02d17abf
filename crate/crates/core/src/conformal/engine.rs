use std::collections::BTreeMap;

use super::{
    check_alpha, check_dim, CqrCalibration, CqrMdaCalibration, LcpCalibration, Method, NexcpCalibration,
    PredictionInterval, SplitCalibration,
};
use crate::data::{MaskedDataset, MaskedSample};
use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::metrics::KernelSpec;
use crate::models::FittedPipeline;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub alpha: f64,
    pub rho: f64,
    pub kernel: KernelSpec,
}

/// Evaluates any method on many test points, building each calibration once
/// (per test mask where the method depends on it).
///
/// HEOM ranges come from the training split.
pub struct IntervalEngine<'a> {
    train: &'a MaskedDataset,
    calib: &'a MaskedDataset,
    mean: Option<&'a FittedPipeline>,
    quantile: Option<&'a FittedPipeline>,
    cfg: EngineConfig,
    spans: Vec<f64>,
    split: Option<SplitCalibration>,
    cqr: Option<CqrCalibration>,
    nexcp: BTreeMap<Mask, NexcpCalibration>,
    lcp: BTreeMap<Mask, LcpCalibration>,
    mda: BTreeMap<Mask, CqrMdaCalibration>,
}

impl<'a> IntervalEngine<'a> {
    /// `mean` serves cp, nexcp and lcp; `quantile` serves the CQR variants.
    pub fn new(
        train: &'a MaskedDataset,
        calib: &'a MaskedDataset,
        mean: Option<&'a FittedPipeline>,
        quantile: Option<&'a FittedPipeline>,
        cfg: EngineConfig,
    ) -> Result<Self> {
        check_alpha(cfg.alpha)?;
        cfg.kernel.validate()?;
        if train.dim() != calib.dim() {
            return Err(Error::Dimension {
                expected: train.dim(),
                got: calib.dim(),
            });
        }
        Ok(IntervalEngine {
            train,
            calib,
            mean,
            quantile,
            cfg,
            spans: train.spans(),
            split: None,
            cqr: None,
            nexcp: BTreeMap::new(),
            lcp: BTreeMap::new(),
            mda: BTreeMap::new(),
        })
    }

    pub fn spans(&self) -> &[f64] {
        &self.spans
    }

    fn pipeline(&self, method: Method) -> Result<&'a FittedPipeline> {
        let p = if method.uses_quantile_pipeline() { self.quantile } else { self.mean };
        p.ok_or_else(|| Error::Config(format!("no fitted pipeline for method {method}")))
    }

    pub fn interval(&mut self, method: Method, test: &MaskedSample) -> Result<PredictionInterval> {
        check_dim(self.calib, test)?;
        let p = self.pipeline(method)?;
        let cfg = self.cfg;
        let mask = test.mask();
        match method {
            Method::Cp => {
                if self.split.is_none() {
                    self.split = Some(SplitCalibration::new(p, self.calib, cfg.alpha)?);
                }
                Ok(self.split.as_ref().expect("set above").interval(p, test))
            }
            Method::Cqr => {
                if self.cqr.is_none() {
                    self.cqr = Some(CqrCalibration::new(p, self.calib, cfg.alpha)?);
                }
                self.cqr.as_ref().expect("set above").interval(p, test)
            }
            Method::CqrMdaExact => {
                if !self.mda.contains_key(mask) {
                    let c = CqrMdaCalibration::for_mask(p, self.calib, mask, cfg.alpha)?;
                    self.mda.insert(mask.clone(), c);
                }
                self.mda[mask].interval(p, test)
            }
            Method::Nexcp => {
                if !self.nexcp.contains_key(mask) {
                    let c = NexcpCalibration::for_mask(p, self.calib, mask, cfg.alpha, cfg.rho, &self.spans)?;
                    self.nexcp.insert(mask.clone(), c);
                }
                self.nexcp[mask].interval(p, test)
            }
            Method::Lcp => {
                if !self.lcp.contains_key(mask) {
                    let c = LcpCalibration::for_mask(p, self.train, self.calib, mask, cfg.alpha, cfg.kernel, &self.spans)?;
                    self.lcp.insert(mask.clone(), c);
                }
                self.lcp[mask].interval(p, test)
            }
        }
    }
}
