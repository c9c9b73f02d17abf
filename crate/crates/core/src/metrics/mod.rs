//! Distance, kernel and quantile primitives.

mod distance;
mod kernel;
mod quantile;

pub use distance::heom_distance;
pub use kernel::{
    gaussian_kernel, kernel_weights, kernel_weights_from_distances, median_pairwise_bandwidth,
    KernelKind, KernelSpec, KernelWeights,
};
pub use quantile::WeightedEmpirical;
