use thiserror::Error;

use crate::data::Quarter;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("transformation error in series `{series}` at {date}: {reason}")]
    Transform {
        series: String,
        date: String,
        reason: String,
    },

    #[error("target is empty: horizon {horizon} leaves no observations out of {len}")]
    EmptyTarget { horizon: usize, len: usize },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("series `{series}` has an interior missing value at {date}")]
    InteriorMissing { series: String, date: Quarter },

    #[error("invalid panel: {0}")]
    Panel(String),

    #[error("rank-deficient projection basis (rank {rank} of {cols} columns); use principal components or prune columns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("kernel matrix is not positive definite after jitter {jitter:e}")]
    SingularKernel { jitter: f64 },

    #[error("non-finite state in block `{block}` at iteration {iteration}")]
    NonFinite {
        block: &'static str,
        iteration: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("coordinate descent did not converge after {sweeps} sweeps (max change {max_change:e}, residual norm {residual_norm:e})")]
    NoConvergence {
        sweeps: usize,
        max_change: f64,
        residual_norm: f64,
    },

    #[error("invalid date `{0}`")]
    Date(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
