//! Conformal prediction for regression when covariates are partially missing.
//!
//! The crate is organised bottom-up:
//!
//! - [`mask`] and [`data`]: missingness masks, masked samples and datasets,
//!   available-case selection and remasking.
//! - [`metrics`]: the weighted empirical quantile with a mass at `+inf`,
//!   HEOM distances, Gaussian kernel weights and the median-distance bandwidth.
//! - [`synth`]: Gaussian linear data, MCAR/MAR/MNAR amputation, and the closed
//!   form conditional variance of a thresholded bivariate model.
//! - [`models`]: chained-equations imputation, least squares and linear
//!   quantile regression, composed into a [`models::FittedPipeline`].
//! - [`conformal`]: split CP, CQR, CQR-MDA-Exact, nonexchangeable CP and
//!   localized CP for missing covariates.
//! - [`harness`]: seeded Monte-Carlo coverage/length experiments.

pub mod conformal;
pub mod data;
pub mod error;
pub mod harness;
pub mod mask;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod synth;

pub use conformal::{Method, PredictionInterval};
pub use data::{MaskedDataset, MaskedSample};
pub use error::{Error, Result};
pub use mask::Mask;
