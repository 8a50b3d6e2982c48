//! Bayesian nonparametric density forecasting of inflation: Gaussian-process
//! conditional means with subspace shrinkage, Dirichlet-process-mixture and
//! stochastic-volatility errors, recursive forecast experiments and scoring.

pub mod data;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod eval;
pub mod filter;
pub mod gp;
pub mod lasso;
pub mod linalg;
pub mod mh;
pub mod noise;
pub mod stats;

pub use error::{Error, Result};
