//! Shared fixtures for the sampler benchmarks.

use nalgebra::DMatrix;
use npinfl_core::data::synthetic::SYNTHETIC_TARGET;
use npinfl_core::data::{
    assemble_design, synthetic_panel, DatasetSpec, DatasetVariant, SyntheticConfig,
};
use npinfl_core::engine::{
    window_data, ChainData, ChainState, McmcConfig, MeanKind, ModelPriors, ModelSpec,
};
use npinfl_core::noise::ErrorKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Training window of the last origin of the bundled panel's moderate dataset.
pub fn moderate_window(mean: MeanKind, error: ErrorKind) -> (ModelSpec, ChainData) {
    let panel = synthetic_panel(&SyntheticConfig::default());
    let ds = DatasetSpec::new(DatasetVariant::Moderate, SYNTHETIC_TARGET, 1);
    let design = assemble_design(&panel, &ds).expect("synthetic design");
    let origin = *design.dates.last().expect("non-empty design");
    let window = design.window(origin).expect("origin in sample");
    let spec = ModelSpec::new(mean, error, ds);
    let data = window_data(&spec, &window).expect("window data");
    (spec, data)
}

/// A chain state after `warm` sweeps, so benchmarks time a typical iteration.
pub fn warmed_state(spec: &ModelSpec, data: &ChainData, warm: usize) -> (ChainState, ChaCha8Rng) {
    let config = McmcConfig::short(warm + 1, 0, 1);
    let priors = ModelPriors::default();
    let mut state = ChainState::init(spec, data, &config, &priors).expect("initial state");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..warm {
        npinfl_core::engine::mcmc_step(data, &mut state, &config, &priors, &mut rng)
            .expect("warm-up sweep");
    }
    (state, rng)
}

pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}
