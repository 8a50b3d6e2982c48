use nalgebra::{DMatrix, DVector};
use npinfl_core::data::{
    assemble_design, synthetic_panel, DatasetSpec, DatasetVariant, Quarter, SyntheticConfig,
};
use npinfl_core::engine::{
    recursive_forecast, run_cell, run_chain, ChainData, McmcConfig, MeanKind, ModelPriors,
    ModelSpec, MIN_TRAIN,
};
use npinfl_core::noise::ErrorKind;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn spec(mean: MeanKind, error: ErrorKind) -> ModelSpec {
    ModelSpec::new(
        mean,
        error,
        DatasetSpec::new(DatasetVariant::Moderate, "CPIAUCSL", 1),
    )
}

fn regression(t: usize, k: usize, noise: f64, seed: u64) -> (Vec<f64>, DMatrix<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(t, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = (0..t)
        .map(|i| {
            2.0 + (0..k)
                .map(|j| (j as f64 + 1.0) * 0.5 * x[(i, j)])
                .sum::<f64>()
                + noise * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let x_new = (0..k)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    (y, x, x_new)
}

fn ols_fit(y: &[f64], x: &DMatrix<f64>) -> Vec<f64> {
    let t = y.len();
    let design = DMatrix::from_fn(
        t,
        x.ncols() + 1,
        |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] },
    );
    let beta = design
        .clone()
        .svd(true, true)
        .solve(&DVector::from_column_slice(y), 1e-12)
        .unwrap();
    (design * beta).iter().copied().collect()
}

#[test]
fn linear_homoskedastic_fit_matches_least_squares() {
    let (y, x, x_new) = regression(80, 3, 0.3, 1);
    let data = ChainData::new(MeanKind::Linear, &y, &x, Some(&x_new), 1).unwrap();
    let cfg = McmcConfig {
        keep_fitted: true,
        ..McmcConfig::short(3000, 500, 7)
    };
    let post = run_chain(
        &spec(MeanKind::Linear, ErrorKind::Homosk),
        &data,
        &cfg,
        &ModelPriors::default(),
    )
    .unwrap();
    let ols = ols_fit(&y, &x);
    let traces = post.fitted_traces.as_ref().unwrap();
    for (i, o) in ols.iter().enumerate() {
        let sd = npinfl_core::stats::variance(&traces[i]).sqrt();
        let mcse = sd / (traces[i].len() as f64).sqrt();
        assert!(
            (post.fitted_mean[i] - o).abs() < 4.0 * mcse + 1e-9,
            "row {i}: {} vs {o} (mcse {mcse})",
            post.fitted_mean[i]
        );
    }
    assert_eq!(post.components.len(), 2500);
}

#[test]
fn same_seed_gives_identical_draws() {
    let (y, x, x_new) = regression(50, 2, 0.5, 2);
    let s = spec(MeanKind::GpSub, ErrorKind::DpmSv);
    let data = ChainData::new(s.mean, &y, &x, Some(&x_new), 1).unwrap();
    let cfg = McmcConfig::short(60, 20, 11);
    let a = run_chain(&s, &data, &cfg, &ModelPriors::default()).unwrap();
    let b = run_chain(&s, &data, &cfg, &ModelPriors::default()).unwrap();
    assert_eq!(a.components, b.components);
    assert_eq!(a.traces, b.traces);
    let c = run_chain(
        &s,
        &data,
        &McmcConfig::short(60, 20, 12),
        &ModelPriors::default(),
    )
    .unwrap();
    assert_ne!(a.components, c.components);
}

#[test]
fn burn_in_of_all_but_one_keeps_a_single_draw() {
    let (y, x, x_new) = regression(45, 2, 0.5, 3);
    for mean in MeanKind::ALL {
        let s = spec(mean, ErrorKind::Sv);
        let data = ChainData::new(mean, &y, &x, Some(&x_new), 1).unwrap();
        let post = run_chain(
            &s,
            &data,
            &McmcConfig::short(25, 24, 5),
            &ModelPriors::default(),
        )
        .unwrap();
        assert_eq!(post.components.len(), 1, "{}", s.id());
        assert!(post.traces.iter().all(|t| t.values.len() == 1));
    }
}

#[test]
fn unit_linear_weight_reproduces_the_linear_model() {
    let (y, x, x_new) = regression(60, 3, 0.4, 4);
    let priors = ModelPriors::default();
    let cfg = McmcConfig::short(400, 100, 9);
    let lin = run_chain(
        &spec(MeanKind::Linear, ErrorKind::Homosk),
        &ChainData::new(MeanKind::Linear, &y, &x, Some(&x_new), 1).unwrap(),
        &cfg,
        &priors,
    )
    .unwrap();
    let pinned = McmcConfig {
        fixed_omega: Some(1.0),
        ..cfg
    };
    let sub = run_chain(
        &spec(MeanKind::GpSub, ErrorKind::Homosk),
        &ChainData::new(MeanKind::GpSub, &y, &x, Some(&x_new), 1).unwrap(),
        &pinned,
        &priors,
    )
    .unwrap();
    let m = |p: &npinfl_core::engine::PosteriorDraws| {
        p.components.iter().map(|c| c.mean).sum::<f64>() / p.components.len() as f64
    };
    assert!((m(&lin) - m(&sub)).abs() < 1e-10);
}

#[test]
fn trend_model_follows_a_random_walk() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = 120;
    let mut level = 3.0;
    let y: Vec<f64> = (0..t)
        .map(|_| {
            level += 0.2 * rng.sample::<f64, _>(StandardNormal);
            level + 0.3 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let s = spec(MeanKind::Uc, ErrorKind::Sv);
    let data = ChainData::new(MeanKind::Uc, &y, &DMatrix::zeros(0, 0), None, 1).unwrap();
    let post = run_chain(
        &s,
        &data,
        &McmcConfig::short(2000, 1000, 3),
        &ModelPriors::default(),
    )
    .unwrap();
    let centre = post.components.iter().map(|c| c.mean).sum::<f64>() / post.components.len() as f64;
    let recent = y[t - 8..].iter().sum::<f64>() / 8.0;
    assert!((centre - recent).abs() < 0.5, "{centre} vs {recent}");
    assert!(post.max_inefficiency() < 40.0, "{:?}", post.inefficiency);
}

#[test]
fn subspace_chain_mixes() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let t = 100;
    let x = DMatrix::from_fn(t, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y: Vec<f64> = (0..t)
        .map(|i| {
            (1.5 * x[(i, 0)]).sin() + 0.5 * x[(i, 1)] + 0.2 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let s = spec(MeanKind::GpSub, ErrorKind::Homosk);
    let data = ChainData::new(s.mean, &y, &x, Some(&[0.5, 0.0]), 1).unwrap();
    let post = run_chain(
        &s,
        &data,
        &McmcConfig::short(3000, 1000, 21),
        &ModelPriors::default(),
    )
    .unwrap();
    let omega = post.trace("omega").unwrap();
    assert!(omega.iter().all(|w| *w > 0.0 && *w <= 1.0));
    let rate = post.hyper_acceptance.unwrap();
    assert!((0.1..0.7).contains(&rate), "{rate}");
    assert!(post.max_inefficiency() < 40.0, "{:?}", post.inefficiency);
    assert!(post
        .components
        .iter()
        .all(|c| c.mean.is_finite() && c.var >= 0.0));
}

#[test]
fn recursive_windows_cover_the_evaluation_range() {
    let panel = synthetic_panel(&SyntheticConfig::default());
    let ds = DatasetSpec::new(DatasetVariant::Ar1, "CPIAUCSL", 4);
    let design = assemble_design(&panel, &ds).unwrap();
    let s = ModelSpec::new(MeanKind::Linear, ErrorKind::Homosk, ds);
    let start = Quarter::new(2000, 1).unwrap();
    let end = Quarter::new(2001, 4).unwrap();
    let cells = recursive_forecast(
        &s,
        &design,
        start,
        end,
        &McmcConfig::short(20, 10, 1),
        &ModelPriors::default(),
    )
    .unwrap();
    assert_eq!(cells.len(), 8);
    assert_eq!(
        cells.last().unwrap().predictive.origin,
        Quarter::new(2000, 4).unwrap()
    );
    for c in &cells {
        let realized = c.predictive.origin.add(4);
        assert!(realized >= start && realized <= end);
        assert_eq!(c.predictive.draws.len(), 10);
        let w = design.window(c.predictive.origin).unwrap();
        assert_eq!(c.predictive.outcome, w.outcome);
        assert!(w
            .train
            .origin_dates
            .iter()
            .all(|d| d.add(4) <= c.predictive.origin));
    }
    // seeds differ across origins
    assert_ne!(cells[0].seed, cells[1].seed);
}

#[test]
fn short_windows_are_skipped() {
    let panel = synthetic_panel(&SyntheticConfig::default());
    let ds = DatasetSpec::new(DatasetVariant::Ar1, "CPIAUCSL", 1);
    let design = assemble_design(&panel, &ds).unwrap();
    let s = ModelSpec::new(MeanKind::Linear, ErrorKind::Homosk, ds);
    let early = design.dates[MIN_TRAIN - 1];
    assert!(run_cell(
        &s,
        &design,
        early,
        &McmcConfig::short(10, 5, 1),
        &ModelPriors::default()
    )
    .unwrap()
    .is_none());
    let ok = design.dates[MIN_TRAIN + 1];
    assert!(run_cell(
        &s,
        &design,
        ok,
        &McmcConfig::short(10, 5, 1),
        &ModelPriors::default()
    )
    .unwrap()
    .is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn chains_stay_finite_with_positive_variances(
        seed in 0u64..1000,
        mean_ix in 0usize..4,
        err_ix in 0usize..4,
    ) {
        let (y, x, x_new) = regression(45, 2, 0.6, seed);
        let s = spec(MeanKind::ALL[mean_ix], ErrorKind::ALL[err_ix]);
        let data = ChainData::new(s.mean, &y, &x, Some(&x_new), 1).unwrap();
        let post = run_chain(&s, &data, &McmcConfig::short(40, 20, seed), &ModelPriors::default()).unwrap();
        prop_assert_eq!(post.components.len(), 20);
        for c in &post.components {
            prop_assert!(c.mean.is_finite() && c.var >= 0.0);
            let w: f64 = c.error.weights.iter().sum();
            prop_assert!((w - 1.0).abs() < 1e-9);
            prop_assert!(c.error.vars.iter().all(|v| *v > 0.0 && v.is_finite()));
        }
        if let Some(om) = post.trace("omega") {
            prop_assert!(om.iter().all(|w| *w > 0.0 && *w < 1.0));
        }
    }
}
