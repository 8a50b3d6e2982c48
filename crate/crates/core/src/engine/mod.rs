//! Model grid, MCMC driver, predictive simulation and the recursive
//! expanding-window experiment.

mod chain;
mod gp_route;
mod predictive;
mod recursive;
mod spec;
mod uc;

pub use chain::{
    mcmc_step, run_chain, ChainData, ChainState, MeanState, PosteriorDraws, PredictiveComponent,
    Trace,
};
pub use predictive::{predictive_simulate, PredictiveDraws, P_GRID};
pub use recursive::{cell_seed, recursive_forecast, run_cell, window_data, CellResult, MIN_TRAIN};
pub use spec::{
    derive_seed, model_id, parse_model_id, McmcConfig, MeanKind, ModelPriors, ModelSpec,
    BENCHMARK_ID,
};
pub use uc::{uc_trend_update, TrendPrior};
