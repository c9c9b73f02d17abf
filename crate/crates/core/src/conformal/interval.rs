use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cp,
    Cqr,
    CqrMdaExact,
    Nexcp,
    Lcp,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Cp, Method::Cqr, Method::CqrMdaExact, Method::Nexcp, Method::Lcp];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cp => "cp",
            Method::Cqr => "cqr",
            Method::CqrMdaExact => "cqr_mda_exact",
            Method::Nexcp => "nexcp",
            Method::Lcp => "lcp",
        }
    }

    /// Whether the method needs the quantile-regression pipeline.
    pub fn uses_quantile_pipeline(self) -> bool {
        matches!(self, Method::Cqr | Method::CqrMdaExact)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == key)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Why an interval is degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnostic {
    /// No calibration sample is an available case for the test mask.
    NoAvailableCalibration,
    /// No training sample is an available case for the test mask.
    NoAvailableTraining,
    /// Every kernel weight underflowed; uniform weights were used.
    KernelFallback,
}

impl Diagnostic {
    pub fn as_str(self) -> &'static str {
        match self {
            Diagnostic::NoAvailableCalibration => "no_available_calibration",
            Diagnostic::NoAvailableTraining => "no_available_training",
            Diagnostic::KernelFallback => "kernel_fallback",
        }
    }
}

/// `[center - half_width, center + half_width]`; the half-width may be `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub center: f64,
    pub half_width: f64,
    pub diagnostic: Option<Diagnostic>,
}

impl PredictionInterval {
    pub fn new(center: f64, half_width: f64) -> Self {
        PredictionInterval {
            center,
            half_width: half_width.max(0.0),
            diagnostic: None,
        }
    }

    pub fn infinite(center: f64, diagnostic: Diagnostic) -> Self {
        PredictionInterval {
            center,
            half_width: f64::INFINITY,
            diagnostic: Some(diagnostic),
        }
    }

    pub fn with_diagnostic(mut self, diagnostic: Option<Diagnostic>) -> Self {
        if diagnostic.is_some() {
            self.diagnostic = diagnostic;
        }
        self
    }

    pub fn lower(&self) -> f64 {
        if self.half_width.is_infinite() {
            f64::NEG_INFINITY
        } else {
            self.center - self.half_width
        }
    }

    pub fn upper(&self) -> f64 {
        if self.half_width.is_infinite() {
            f64::INFINITY
        } else {
            self.center + self.half_width
        }
    }

    pub fn is_finite(&self) -> bool {
        self.half_width.is_finite()
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_width
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower() <= y && y <= self.upper()
    }
}
