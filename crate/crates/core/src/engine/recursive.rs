use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Design, ForecastWindow, Quarter};
use crate::engine::chain::{run_chain, ChainData};
use crate::engine::predictive::{predictive_simulate, PredictiveDraws};
use crate::engine::spec::{derive_seed, McmcConfig, ModelPriors, ModelSpec};
use crate::error::Result;

/// Shortest estimation window a forecast origin may have.
pub const MIN_TRAIN: usize = 40;

/// Output of one (model, origin) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub model: String,
    pub seed: u64,
    pub predictive: PredictiveDraws,
    pub inefficiency: Vec<(String, f64)>,
    pub hyper_acceptance: Option<f64>,
}

/// Chain seed of a cell; depends only on the master seed and the cell's identity.
pub fn cell_seed(master: u64, spec: &ModelSpec, origin: Quarter) -> u64 {
    derive_seed(
        master,
        &[
            &spec.id(),
            spec.dataset.variant.slug(),
            &spec.dataset.target_series,
            &spec.horizon().to_string(),
            &origin.to_string(),
        ],
    )
}

pub fn window_data(spec: &ModelSpec, window: &ForecastWindow) -> Result<ChainData> {
    ChainData::new(
        spec.mean,
        &window.train.y,
        &window.train.x,
        Some(&window.x_origin),
        spec.horizon(),
    )
}

/// Fits the model on data available at `origin` and simulates the predictive of
/// the outcome `h` quarters later. `None` when the window is shorter than
/// [`MIN_TRAIN`].
pub fn run_cell(
    spec: &ModelSpec,
    design: &Design,
    origin: Quarter,
    config: &McmcConfig,
    priors: &ModelPriors,
) -> Result<Option<CellResult>> {
    let window = design.window(origin)?;
    if window.train.len() < MIN_TRAIN {
        warn!(
            "{} at {origin}: {} training observations, below the minimum of {MIN_TRAIN}; skipped",
            spec.id(),
            window.train.len()
        );
        return Ok(None);
    }
    let seed = cell_seed(config.seed, spec, origin);
    let cfg = McmcConfig {
        seed,
        ..config.clone()
    };
    let data = window_data(spec, &window)?;
    let posterior = run_chain(spec, &data, &cfg, priors)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["predictive"]));
    let mut predictive = predictive_simulate(&posterior, origin, spec.horizon(), &mut rng)?;
    predictive.outcome = window.outcome;
    Ok(Some(CellResult {
        model: spec.id(),
        seed,
        predictive,
        inefficiency: posterior.inefficiency,
        hyper_acceptance: posterior.hyper_acceptance,
    }))
}

/// Expanding-window forecasts for every origin whose outcome date lies in
/// `[eval_start, eval_end]`; each origin gets a fresh chain.
pub fn recursive_forecast(
    spec: &ModelSpec,
    design: &Design,
    eval_start: Quarter,
    eval_end: Quarter,
    config: &McmcConfig,
    priors: &ModelPriors,
) -> Result<Vec<CellResult>> {
    let mut out = Vec::new();
    for origin in design.origins_for_outcomes(eval_start, eval_end) {
        if let Some(cell) = run_cell(spec, design, origin, config, priors)? {
            out.push(cell);
        }
    }
    Ok(out)
}
