use super::{abs_residual, check_alpha, check_dim};
use crate::conformal::{Diagnostic, PredictionInterval};
use crate::data::{available_cases, MaskedDataset, MaskedSample};
use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::metrics::{heom_distance, WeightedEmpirical};
use crate::models::FittedPipeline;

pub const DEFAULT_RHO: f64 = 0.99;

/// Weights over distance-sorted available cases (farthest first) plus the test
/// point.
#[derive(Debug, Clone, PartialEq)]
pub struct NexcpWeights {
    pub rho: f64,
    /// Unnormalised `w_1, ..., w_k` by sorted position.
    pub weights: Vec<f64>,
    /// Unnormalised test-point weight, always 1.
    pub test_weight: f64,
    pub normalized: Vec<f64>,
    pub normalized_test: f64,
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Config(format!("rho must lie in (0, 1), got {rho}")));
    }
    Ok(())
}

/// `same_mask[i]` tells whether the case at sorted position `i + 1` has exactly
/// the test mask. Those get weight 1; the others get `rho^(k + 1 - i)`.
pub fn nexcp_weights(same_mask: &[bool], rho: f64) -> Result<NexcpWeights> {
    check_rho(rho)?;
    let k = same_mask.len();
    let weights: Vec<f64> = same_mask
        .iter()
        .enumerate()
        .map(|(pos, &same)| if same { 1.0 } else { rho.powi((k - pos) as i32) })
        .collect();
    let test_weight = 1.0;
    let total = test_weight + weights.iter().sum::<f64>();
    Ok(NexcpWeights {
        rho,
        normalized: weights.iter().map(|w| w / total).collect(),
        normalized_test: test_weight / total,
        weights,
        test_weight,
    })
}

/// Half-width from scores already arranged by sorted position.
pub fn nexcp_threshold(sorted_scores: &[f64], same_mask: &[bool], rho: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if sorted_scores.len() != same_mask.len() {
        return Err(Error::Dimension {
            expected: sorted_scores.len(),
            got: same_mask.len(),
        });
    }
    let w = nexcp_weights(same_mask, rho)?;
    let atoms = sorted_scores.iter().copied().zip(w.weights).collect();
    WeightedEmpirical::new(atoms, w.test_weight)?.quantile(1.0 - alpha)
}

/// Scores of the available cases for one test mask. Only the distance ordering
/// depends on the individual test point.
#[derive(Debug, Clone, PartialEq)]
pub struct NexcpCalibration {
    pub mask: Mask,
    pub alpha: f64,
    pub rho: f64,
    pub available: Vec<usize>,
    /// Remasked scores, aligned with `available`.
    pub scores: Vec<f64>,
    cases: Vec<MaskedSample>,
    same_mask: Vec<bool>,
    spans: Vec<f64>,
}

impl NexcpCalibration {
    pub fn for_mask(
        pipeline: &FittedPipeline,
        calib: &MaskedDataset,
        mask: &Mask,
        alpha: f64,
        rho: f64,
        spans: &[f64],
    ) -> Result<Self> {
        check_alpha(alpha)?;
        check_rho(rho)?;
        if spans.len() != calib.dim() {
            return Err(Error::Dimension {
                expected: calib.dim(),
                got: spans.len(),
            });
        }
        let available = available_cases(calib, mask)?;
        let mut scores = Vec::with_capacity(available.len());
        let mut cases = Vec::with_capacity(available.len());
        let mut same_mask = Vec::with_capacity(available.len());
        for &i in &available {
            let s = calib.get(i);
            scores.push(abs_residual(pipeline, &s.remask(mask)?)?);
            same_mask.push(s.mask() == mask);
            cases.push(s.clone());
        }
        Ok(NexcpCalibration {
            mask: mask.clone(),
            alpha,
            rho,
            available,
            scores,
            cases,
            same_mask,
            spans: spans.to_vec(),
        })
    }

    /// Positions into `available`, farthest from `test` first; ties keep
    /// calibration order.
    pub fn order(&self, test: &MaskedSample) -> Result<Vec<usize>> {
        super::check_mask(&self.mask, test)?;
        let distances = self
            .cases
            .iter()
            .map(|c| heom_distance(c, test, &self.spans))
            .collect::<Result<Vec<_>>>()?;
        let mut order: Vec<usize> = (0..self.cases.len()).collect();
        order.sort_by(|&a, &b| distances[b].total_cmp(&distances[a]));
        Ok(order)
    }

    pub fn weights(&self, test: &MaskedSample) -> Result<(Vec<usize>, NexcpWeights)> {
        let order = self.order(test)?;
        let same: Vec<bool> = order.iter().map(|&p| self.same_mask[p]).collect();
        Ok((order, nexcp_weights(&same, self.rho)?))
    }

    pub fn half_width(&self, test: &MaskedSample) -> Result<f64> {
        let order = self.order(test)?;
        let scores: Vec<f64> = order.iter().map(|&p| self.scores[p]).collect();
        let same: Vec<bool> = order.iter().map(|&p| self.same_mask[p]).collect();
        nexcp_threshold(&scores, &same, self.rho, self.alpha)
    }

    pub fn interval(&self, pipeline: &FittedPipeline, test: &MaskedSample) -> Result<PredictionInterval> {
        super::check_mask(&self.mask, test)?;
        let center = pipeline.predict_point(test);
        if self.available.is_empty() {
            return Ok(PredictionInterval::infinite(center, Diagnostic::NoAvailableCalibration));
        }
        Ok(PredictionInterval::new(center, self.half_width(test)?))
    }
}

pub fn nexcp(
    pipeline: &FittedPipeline,
    calib: &MaskedDataset,
    test: &MaskedSample,
    alpha: f64,
    rho: f64,
    spans: &[f64],
) -> Result<PredictionInterval> {
    check_dim(calib, test)?;
    NexcpCalibration::for_mask(pipeline, calib, test.mask(), alpha, rho, spans)?.interval(pipeline, test)
}
