//! Gaussian-process conditional mean with optional shrinkage towards a linear subspace.

pub mod hyper;
pub mod kernel;
pub mod posterior;
pub mod predict;
pub mod projection;
pub mod shrinkage;

pub use hyper::{gaussian_marginal_loglik, sample_kernel_hyper};
pub use kernel::{gaussian_kernel_matrix, KernelHyper};
pub use posterior::{omega, sample_f, subspace_kernel, FPosterior};
pub use predict::gp_predict;
pub use projection::{projection_matrix, ProjectionBasis, ProjectionMatrix};
pub use shrinkage::{sample_tau2, truncated_gamma, ScalePrior};
