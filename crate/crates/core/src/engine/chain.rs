use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Standardizer;
use crate::diagnostics::inefficiency_factor;
use crate::engine::gp_route::{
    jittered_kernel, plain_draw, plain_marginal, span_draw, subspace_draw, subspace_marginal,
    KernelCache,
};
use crate::engine::spec::{McmcConfig, MeanKind, ModelPriors, ModelSpec};
use crate::engine::uc::{uc_trend_update, TrendPrior};
use crate::error::{Error, Result};
use crate::gp::kernel::{squared_distances, squared_distances_to};
use crate::gp::{sample_kernel_hyper, sample_tau2, KernelHyper, ProjectionBasis};
use crate::mh::AdaptiveStep;
use crate::noise::{ErrorPredictive, ErrorState};

/// One estimation window on the standardized scale, with the predictor row at the
/// forecast origin when there is one.
#[derive(Debug, Clone)]
pub struct ChainData {
    pub mean: MeanKind,
    /// standardized outcomes
    pub y: DVector<f64>,
    pub horizon: usize,
    /// location and scale mapping standardized outcomes back to data units
    pub loc: f64,
    pub scale: f64,
    x: Option<DMatrix<f64>>,
    dist: Option<DMatrix<f64>>,
    basis: Option<ProjectionBasis>,
    x_new: Option<Vec<f64>>,
    dist_new: Option<DVector<f64>>,
    b_new: Option<DVector<f64>>,
    ref_var: f64,
}

impl ChainData {
    /// Standardizes `y` and the columns of `x` on this window. `x` is ignored for
    /// the trend model.
    pub fn new(
        mean: MeanKind,
        y: &[f64],
        x: &DMatrix<f64>,
        x_new: Option<&[f64]>,
        horizon: usize,
    ) -> Result<Self> {
        let t = y.len();
        if t < 3 {
            return Err(Error::Dimension(format!(
                "estimation window has only {t} observations"
            )));
        }
        if mean.uses_predictors() && x.nrows() != t {
            return Err(Error::Dimension(format!(
                "{} predictor rows for {t} outcomes",
                x.nrows()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("outcomes must be finite".into()));
        }
        let (loc, scale) = Standardizer::fit_vec(y);
        let ys = DVector::from_iterator(t, y.iter().map(|v| (v - loc) / scale));
        let mut data = Self {
            mean,
            y: ys,
            horizon,
            loc,
            scale,
            x: None,
            dist: None,
            basis: None,
            x_new: None,
            dist_new: None,
            b_new: None,
            ref_var: 1.0,
        };
        if !mean.uses_predictors() {
            return Ok(data);
        }
        let st = Standardizer::fit(x);
        let xs = st.transform(x);
        let basis = match ProjectionBasis::new(&xs) {
            Ok(b) => Some(b),
            Err(e) if mean == MeanKind::Gp => {
                debug!("no projection basis for the plain GP ({e}); using the outcome variance as reference");
                None
            }
            Err(e) => return Err(e),
        };
        if let Some(b) = &basis {
            let resid = &data.y - b.project(&data.y);
            let dof = (t.saturating_sub(b.rank())).max(1) as f64;
            let v = resid.norm_squared() / dof;
            if v.is_finite() && v > 1e-8 {
                data.ref_var = v;
            }
        }
        if let Some(row) = x_new {
            if row.len() != x.ncols() {
                return Err(Error::Dimension(format!(
                    "origin row has {} predictors, window has {}",
                    row.len(),
                    x.ncols()
                )));
            }
            let r = st.transform_row(row);
            data.dist_new = Some(squared_distances_to(&xs, &r));
            data.b_new = basis.as_ref().map(|b| b.row_for(&r));
            data.x_new = Some(r);
        }
        if matches!(mean, MeanKind::Gp | MeanKind::GpSub) {
            data.dist = Some(squared_distances(&xs));
        }
        data.basis = basis;
        data.x = Some(xs);
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Residual variance of the linear fit on the standardized scale (1 without predictors).
    pub fn reference_variance(&self) -> f64 {
        self.ref_var
    }

    pub fn has_origin(&self) -> bool {
        self.x_new.is_some() || self.mean == MeanKind::Uc
    }
}

/// Conditional-mean block of a chain state.
#[derive(Debug, Clone)]
pub enum MeanState {
    Trend {
        path: Vec<f64>,
        eta_var: f64,
    },
    Span {
        coef: DVector<f64>,
        f: DVector<f64>,
    },
    Function {
        f: DVector<f64>,
        hyper: KernelHyper,
        /// shrinkage scale; `None` for the plain kernel
        tau2: Option<f64>,
        step: AdaptiveStep,
        cache: Box<KernelCache>,
    },
}

#[derive(Debug, Clone)]
pub struct ChainState {
    pub mean: MeanState,
    pub error: ErrorState,
}

impl ChainState {
    /// Neutral starting point: zero latent function, kernel hyperparameters at
    /// their prior midpoints, unit shrinkage scale, a single mixture cluster and a
    /// flat volatility path at the reference variance.
    pub fn init(
        spec: &ModelSpec,
        data: &ChainData,
        config: &McmcConfig,
        priors: &ModelPriors,
    ) -> Result<Self> {
        let t = data.len();
        let error = ErrorState::init(spec.error, t, data.reference_variance(), &priors.error);
        let mean = match route(spec.mean, config) {
            Route::Trend => MeanState::Trend {
                path: vec![data.y[0]; t],
                eta_var: priors.trend_scale / (priors.trend_shape - 1.0),
            },
            Route::Span => {
                let basis = data.basis.as_ref().expect("linear mean has a basis");
                MeanState::Span {
                    coef: DVector::zeros(basis.rank()),
                    f: DVector::zeros(t),
                }
            }
            Route::Function { subspace } => {
                let hyper = config.fixed_hyper.unwrap_or_default();
                let basis = if subspace { data.basis.as_ref() } else { None };
                let cache = KernelCache::build(
                    data.dist.as_ref().expect("kernel distances"),
                    hyper,
                    basis,
                )?;
                let tau2 = subspace.then(|| match config.fixed_omega {
                    Some(w) => (1.0 - w) / w,
                    None => 1.0,
                });
                MeanState::Function {
                    f: DVector::zeros(t),
                    hyper,
                    tau2,
                    step: AdaptiveStep::new(config.initial_step),
                    cache: Box::new(cache),
                }
            }
        };
        Ok(Self { mean, error })
    }

    /// Fitted conditional mean on the standardized scale.
    pub fn fitted(&self) -> DVector<f64> {
        match &self.mean {
            MeanState::Trend { path, .. } => DVector::from_column_slice(path),
            MeanState::Span { f, .. } | MeanState::Function { f, .. } => f.clone(),
        }
    }

    /// Named scalars whose traces are monitored.
    pub fn monitored(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        match &self.mean {
            MeanState::Trend { eta_var, .. } => out.push(("trend_var", *eta_var)),
            MeanState::Span { .. } => {}
            MeanState::Function { hyper, tau2, .. } => {
                out.push(("xi", hyper.xi));
                out.push(("phi", hyper.phi));
                if let Some(t2) = tau2 {
                    out.push(("omega", crate::gp::omega(*t2)));
                }
            }
        }
        out.extend(self.error.monitored());
        out
    }

    fn is_finite(&self) -> (bool, bool) {
        let mean_ok = self.fitted().iter().all(|v| v.is_finite())
            && match &self.mean {
                MeanState::Trend { eta_var, .. } => eta_var.is_finite() && *eta_var > 0.0,
                MeanState::Function { tau2, .. } => tau2.is_none_or(|t| t.is_finite() && t > 0.0),
                MeanState::Span { .. } => true,
            };
        let err_ok = self.error.monitored().iter().all(|(_, v)| v.is_finite())
            && self.error.variance_diag(1).iter().all(|v| v.is_finite());
        (mean_ok, err_ok)
    }
}

enum Route {
    Trend,
    Span,
    Function { subspace: bool },
}

/// The linear mean and a subspace kernel pinned at unit linear weight share the
/// span sampler.
fn route(mean: MeanKind, config: &McmcConfig) -> Route {
    match mean {
        MeanKind::Uc => Route::Trend,
        MeanKind::Linear => Route::Span,
        MeanKind::GpSub if config.fixed_omega == Some(1.0) => Route::Span,
        MeanKind::GpSub => Route::Function { subspace: true },
        MeanKind::Gp => Route::Function { subspace: false },
    }
}

/// One full sweep: the error block given the current mean, then the mean block
/// given the error state.
pub fn mcmc_step<R: Rng + ?Sized>(
    data: &ChainData,
    state: &mut ChainState,
    config: &McmcConfig,
    priors: &ModelPriors,
    rng: &mut R,
) -> Result<()> {
    let t = data.len();
    let fitted = state.fitted();
    let resid: Vec<f64> = (0..t).map(|i| data.y[i] - fitted[i]).collect();
    state.error.update(&resid, &priors.error, rng);
    let sigma = state.error.variance_diag(t);
    let offsets = state.error.mean_offsets(t);
    let r = DVector::from_fn(t, |i, _| data.y[i] - offsets[i]);

    match &mut state.mean {
        MeanState::Trend { path, eta_var } => {
            let prior = TrendPrior {
                shape: priors.trend_shape,
                scale: priors.trend_scale,
                init_var: priors.trend_init_var,
            };
            let z: Vec<f64> = r.iter().copied().collect();
            let (p, e) = uc_trend_update(&z, &sigma, *eta_var, &prior, rng);
            *path = p;
            *eta_var = e;
        }
        MeanState::Span { coef, f } => {
            let basis = data.basis.as_ref().expect("linear mean has a basis");
            let (c, fit) = span_draw(basis, &sigma, &r, rng)?;
            *coef = c;
            *f = fit;
        }
        MeanState::Function {
            f,
            hyper,
            tau2,
            step,
            cache,
        } => {
            let dist = data.dist.as_ref().expect("kernel distances");
            match *tau2 {
                None => {
                    let (ll, mut a) = plain_marginal(&cache.k, &sigma, &r)?;
                    if config.fixed_hyper.is_none() {
                        let mut stash: Option<(DMatrix<f64>, _)> = None;
                        let (h, _, accepted) = sample_kernel_hyper(
                            *hyper,
                            ll,
                            |cand| {
                                let k = jittered_kernel(dist, cand);
                                let (l, c) = plain_marginal(&k, &sigma, &r).ok()?;
                                stash = Some((k, c));
                                Some(l)
                            },
                            step,
                            rng,
                        );
                        if accepted {
                            let (k, c) = stash.expect("accepted proposal was evaluated");
                            *hyper = h;
                            **cache = KernelCache::build(dist, h, None)?;
                            // the factor only carries over when no extra jitter was needed
                            a = if cache.k == k {
                                c
                            } else {
                                plain_marginal(&cache.k, &sigma, &r)?.1
                            };
                        }
                    }
                    *f = plain_draw(cache, &a, &sigma, &r, rng);
                }
                Some(t2) => {
                    let basis = data.basis.as_ref().expect("subspace kernel has a basis");
                    let (ll, post) = subspace_marginal(cache, t2, &sigma, &r)?;
                    let mut post = post;
                    if config.fixed_hyper.is_none() {
                        let mut stash: Option<(KernelCache, _)> = None;
                        let (h, _, accepted) = sample_kernel_hyper(
                            *hyper,
                            ll,
                            |cand| {
                                let c = KernelCache::build(dist, cand, Some(basis)).ok()?;
                                let (l, p) = subspace_marginal(&c, t2, &sigma, &r).ok()?;
                                stash = Some((c, p));
                                Some(l)
                            },
                            step,
                            rng,
                        );
                        if accepted {
                            let (c, p) = stash.expect("accepted proposal was evaluated");
                            *hyper = h;
                            **cache = c;
                            post = p;
                        }
                    }
                    *f = subspace_draw(cache, &post, rng);
                    if config.fixed_omega.is_none() {
                        let quad = basis.residual_quad(f);
                        *tau2 = Some(sample_tau2(t2, quad, t, basis.rank(), priors.scale, rng));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Gaussian predictive component of one retained draw in data units: the latent
/// mean's moments plus the error distribution at the target date.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveComponent {
    pub mean: f64,
    pub var: f64,
    pub error: ErrorPredictive,
}

/// Trace of one monitored scalar over the retained draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub name: String,
    pub values: Vec<f64>,
}

/// Retained output of one chain.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub traces: Vec<Trace>,
    pub inefficiency: Vec<(String, f64)>,
    /// per retained draw; empty when the window has no origin row
    pub components: Vec<PredictiveComponent>,
    /// posterior mean of the fitted conditional mean, in data units
    pub fitted_mean: Vec<f64>,
    /// per-draw fitted values (`[t][draw]`, data units) when requested
    pub fitted_traces: Option<Vec<Vec<f64>>>,
    /// post-burn-in acceptance rate of the kernel hyperparameter step
    pub hyper_acceptance: Option<f64>,
    pub loc: f64,
    pub scale: f64,
}

impl PosteriorDraws {
    pub fn trace(&self, name: &str) -> Option<&[f64]> {
        self.traces
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.values.as_slice())
    }

    pub fn max_inefficiency(&self) -> f64 {
        self.inefficiency
            .iter()
            .map(|(_, v)| *v)
            .fold(0.0, f64::max)
    }
}

fn predictive_component<R: Rng + ?Sized>(
    data: &ChainData,
    state: &ChainState,
    rng: &mut R,
) -> Option<PredictiveComponent> {
    let h = data.horizon;
    let (m, v) = match &state.mean {
        MeanState::Trend { path, eta_var } => (*path.last()?, h as f64 * eta_var),
        MeanState::Span { coef, .. } => (data.b_new.as_ref()?.dot(coef), 0.0),
        MeanState::Function { f, tau2, cache, .. } => cache.predict(
            data.dist_new.as_ref()?,
            f,
            *tau2,
            data.basis.as_ref(),
            data.b_new.as_ref(),
        ),
    };
    let mut error = state.error.predictive(h, rng);
    error.rescale(data.scale);
    Some(PredictiveComponent {
        mean: data.loc + data.scale * m,
        var: data.scale * data.scale * v,
        error,
    })
}

/// Runs one chain from the neutral initialization; deterministic given the seed.
pub fn run_chain(
    spec: &ModelSpec,
    data: &ChainData,
    config: &McmcConfig,
    priors: &ModelPriors,
) -> Result<PosteriorDraws> {
    config.validate()?;
    if spec.mean != data.mean {
        return Err(Error::Config(format!(
            "window prepared for the {} mean, model is {}",
            data.mean.slug(),
            spec.id()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = ChainState::init(spec, data, config, priors)?;
    let t = data.len();
    let mut traces: Vec<Trace> = Vec::new();
    let mut components = Vec::with_capacity(config.retained());
    let mut fitted_sum = DVector::zeros(t);
    let mut fitted_traces = config
        .keep_fitted
        .then(|| vec![Vec::with_capacity(config.retained()); t]);
    let mut kept = 0usize;
    for it in 0..config.n_iter {
        if it == config.n_burn {
            if let MeanState::Function { step, .. } = &mut state.mean {
                step.freeze();
            }
            state.error.freeze_adaptation();
        }
        mcmc_step(data, &mut state, config, priors, &mut rng)?;
        let (mean_ok, err_ok) = state.is_finite();
        if !mean_ok || !err_ok {
            return Err(Error::NonFinite {
                block: if mean_ok { "error" } else { "mean" },
                iteration: it,
            });
        }
        if it < config.n_burn || (it - config.n_burn) % config.thin != 0 {
            continue;
        }
        kept += 1;
        let mon = state.monitored();
        if traces.is_empty() {
            traces = mon
                .iter()
                .map(|(n, _)| Trace {
                    name: n.to_string(),
                    values: Vec::new(),
                })
                .collect();
        }
        for (tr, (_, v)) in traces.iter_mut().zip(&mon) {
            tr.values.push(*v);
        }
        let fit = state.fitted();
        fitted_sum += &fit;
        if let Some(ft) = fitted_traces.as_mut() {
            for (i, col) in ft.iter_mut().enumerate() {
                col.push(data.loc + data.scale * fit[i]);
            }
        }
        if data.has_origin() {
            if let Some(c) = predictive_component(data, &state, &mut rng) {
                components.push(c);
            }
        }
    }
    let inefficiency = traces
        .iter()
        .map(|tr| (tr.name.clone(), inefficiency_factor(&tr.values)))
        .collect();
    let hyper_acceptance = match &state.mean {
        MeanState::Function { step, .. } if config.fixed_hyper.is_none() => {
            Some(step.acceptance_rate())
        }
        _ => None,
    };
    Ok(PosteriorDraws {
        traces,
        inefficiency,
        components,
        fitted_mean: fitted_sum
            .iter()
            .map(|v| data.loc + data.scale * v / kept as f64)
            .collect(),
        fitted_traces,
        hyper_acceptance,
        loc: data.loc,
        scale: data.scale,
    })
}
