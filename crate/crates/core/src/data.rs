//! Masked samples, datasets and available-case selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::Mask;

/// One `(X, M, Y)` triple. Missing covariates carry no value at all, so a NaN
/// read from a file is a value, never a missing marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedSample {
    x: Vec<Option<f64>>,
    mask: Mask,
    y: Option<f64>,
}

impl MaskedSample {
    /// Builds a sample whose mask is read off the presence of each value.
    pub fn new(x: Vec<Option<f64>>, y: Option<f64>) -> Self {
        let mask = Mask::new(x.iter().map(Option::is_none).collect());
        MaskedSample { x, mask, y }
    }

    /// Builds a sample from values and an explicit mask, checking that they agree.
    pub fn with_mask(x: Vec<Option<f64>>, mask: Mask, y: Option<f64>) -> Result<Self> {
        if x.len() != mask.len() {
            return Err(Error::Dimension {
                expected: mask.len(),
                got: x.len(),
            });
        }
        if let Some(index) = (0..x.len()).find(|&j| x[j].is_none() != mask.is_missing(j)) {
            return Err(Error::MaskValueMismatch { index });
        }
        Ok(MaskedSample { x, mask, y })
    }

    /// Hides the coordinates of a complete vector that `mask` marks as missing.
    pub fn from_complete(x: &[f64], mask: Mask, y: Option<f64>) -> Result<Self> {
        if x.len() != mask.len() {
            return Err(Error::Dimension {
                expected: mask.len(),
                got: x.len(),
            });
        }
        let values = x
            .iter()
            .enumerate()
            .map(|(j, &v)| (!mask.is_missing(j)).then_some(v))
            .collect();
        Ok(MaskedSample { x: values, mask, y })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[Option<f64>] {
        &self.x
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn y(&self) -> Option<f64> {
        self.y
    }

    pub fn with_y(mut self, y: Option<f64>) -> Self {
        self.y = y;
        self
    }

    /// Hides additional coordinates so the sample carries exactly `target`.
    /// Requires `self.mask ⪯ target`; observed values are never revealed.
    pub fn remask(&self, target: &Mask) -> Result<MaskedSample> {
        if !self.mask.precedes(target)? {
            return Err(Error::MaskOrder {
                from: self.mask.to_string(),
                to: target.to_string(),
            });
        }
        let x = self
            .x
            .iter()
            .enumerate()
            .map(|(j, v)| if target.is_missing(j) { None } else { *v })
            .collect();
        Ok(MaskedSample {
            x,
            mask: target.clone(),
            y: self.y,
        })
    }
}

/// Observed minimum and maximum of one column. Both are zero when the column
/// has no observed entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    /// Normalising span for HEOM; a constant column spans 1.
    pub fn span(&self) -> f64 {
        let r = self.max - self.min;
        if r > 0.0 {
            r
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedDataset {
    samples: Vec<MaskedSample>,
    d: usize,
    column_ranges: Vec<ColumnRange>,
}

impl MaskedDataset {
    pub fn new(d: usize, samples: Vec<MaskedSample>) -> Result<Self> {
        if let Some(bad) = samples.iter().find(|s| s.dim() != d) {
            return Err(Error::Dimension {
                expected: d,
                got: bad.dim(),
            });
        }
        let column_ranges = (0..d)
            .map(|j| {
                let mut observed = samples.iter().filter_map(|s| s.x[j]).peekable();
                if observed.peek().is_none() {
                    return ColumnRange { min: 0.0, max: 0.0 };
                }
                let (min, max) = observed.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
                ColumnRange { min, max }
            })
            .collect();
        Ok(MaskedDataset {
            samples,
            d,
            column_ranges,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[MaskedSample] {
        &self.samples
    }

    pub fn get(&self, i: usize) -> &MaskedSample {
        &self.samples[i]
    }

    pub fn column_ranges(&self) -> &[ColumnRange] {
        &self.column_ranges
    }

    /// Per-column HEOM normalisers.
    pub fn spans(&self) -> Vec<f64> {
        self.column_ranges.iter().map(ColumnRange::span).collect()
    }

    /// Concatenates two datasets of the same dimension; ranges are recomputed.
    pub fn concat(&self, other: &MaskedDataset) -> Result<MaskedDataset> {
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        MaskedDataset::new(self.d, samples)
    }

    /// The same samples in a fixed order that depends only on their values
    /// (missing before observed, then by value, coordinate by coordinate, then
    /// response). Fitting on this order makes a fit independent of row order.
    pub fn canonical(&self) -> MaskedDataset {
        fn key(a: &Option<f64>, b: &Option<f64>) -> std::cmp::Ordering {
            match (a, b) {
                (None, None) => std::cmp::Ordering::Equal,
                (None, Some(_)) => std::cmp::Ordering::Less,
                (Some(_), None) => std::cmp::Ordering::Greater,
                (Some(u), Some(v)) => u.total_cmp(v),
            }
        }
        let mut samples = self.samples.clone();
        samples.sort_by(|a, b| {
            a.x.iter()
                .zip(&b.x)
                .map(|(u, v)| key(u, v))
                .find(|o| o.is_ne())
                .unwrap_or_else(|| key(&a.y, &b.y))
        });
        MaskedDataset {
            samples,
            d: self.d,
            column_ranges: self.column_ranges.clone(),
        }
    }

    /// Subset by index, in the order given.
    pub fn select(&self, indices: &[usize]) -> Result<MaskedDataset> {
        MaskedDataset::new(self.d, indices.iter().map(|&i| self.samples[i].clone()).collect())
    }
}

/// Indices `i` with `M^(i) ⪯ m`, in dataset order.
pub fn available_cases(ds: &MaskedDataset, m: &Mask) -> Result<Vec<usize>> {
    if m.len() != ds.dim() {
        return Err(Error::Dimension {
            expected: ds.dim(),
            got: m.len(),
        });
    }
    let mut out = Vec::new();
    for (i, s) in ds.samples.iter().enumerate() {
        if s.mask().precedes(m)? {
            out.push(i);
        }
    }
    Ok(out)
}
