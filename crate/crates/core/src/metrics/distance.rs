use crate::data::MaskedSample;
use crate::error::{Error, Result};

/// Heterogeneous Euclidean-Overlap Metric over incomplete continuous vectors.
///
/// Per coordinate the contribution is `|a_j - b_j| / span_j` when both values
/// are observed and `1` when either is missing.
pub fn heom_distance(a: &MaskedSample, b: &MaskedSample, spans: &[f64]) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if spans.len() != a.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            got: spans.len(),
        });
    }
    Ok(heom_squared(a, b, spans).sqrt())
}

pub(crate) fn heom_squared(a: &MaskedSample, b: &MaskedSample, spans: &[f64]) -> f64 {
    a.x()
        .iter()
        .zip(b.x())
        .zip(spans)
        .map(|((u, v), s)| match (u, v) {
            (Some(u), Some(v)) => {
                let t = (u - v) / s;
                t * t
            }
            _ => 1.0,
        })
        .sum()
}
