//! Imputation and regression learners composing the prediction pipeline.

mod imputer;
mod linear;
mod pipeline;
mod quantile;

pub use imputer::{fit_chained_imputer, impute, FittedImputer, DEFAULT_CHAINED_ITERS};
pub use linear::{fit_least_squares, LinearModel, RIDGE_PENALTY};
pub use pipeline::{FittedPipeline, FittedRegressor, PipelineConfig, Prediction, RegressorKind};
pub use quantile::{fit_quantile_pair, pinball_loss, QuantileConfig};
