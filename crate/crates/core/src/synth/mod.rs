//! Synthetic data: Gaussian linear model, amputation mechanisms, and the
//! analytic conditional variance of the thresholded bivariate example.

mod ampute;
mod dgp;
mod example1;

pub use ampute::{ampute, default_maskable_columns, AmputeConfig, Amputer, Mechanism};
pub use dgp::{gen_gaussian_linear, CompleteData, DgpConfig, GaussianLinear, REFERENCE_BETA};
pub use example1::{example1_conditional_variance, Example1Params};
