//! Missingness masks and their partial order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary missingness pattern: `true` marks a missing coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mask(Vec<bool>);

impl Mask {
    pub fn new(bits: Vec<bool>) -> Self {
        Mask(bits)
    }

    /// Parses 0/1 integers. Any other value is a domain error.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Domain(format!("mask entry {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Mask)
    }

    /// Parses a compact string such as `"110"`, with or without brackets.
    pub fn parse(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
        inner
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Domain(format!("mask character {other:?} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Mask)
    }

    pub fn zeros(d: usize) -> Self {
        Mask(vec![false; d])
    }

    pub fn ones(d: usize) -> Self {
        Mask(vec![true; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_missing(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Number of missing coordinates.
    pub fn size(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn obs_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| !self.0[j]).collect()
    }

    pub fn mis_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.0[j]).collect()
    }

    /// `self ⪯ other`: every coordinate missing in `self` is missing in `other`.
    pub fn precedes(&self, other: &Mask) -> Result<bool> {
        if self.len() != other.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(self.0.iter().zip(&other.0).all(|(&a, &b)| !a || b))
    }

    /// All `2^d` masks in lexicographic order of their bit strings.
    pub fn enumerate(d: usize) -> Vec<Mask> {
        (0..1usize << d)
            .map(|code| Mask((0..d).map(|j| code >> (d - 1 - j) & 1 == 1).collect()))
            .collect()
    }
}

impl fmt::Display for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// `m_tilde ⪯ m`.
pub fn mask_precedes(m_tilde: &Mask, m: &Mask) -> Result<bool> {
    m_tilde.precedes(m)
}
