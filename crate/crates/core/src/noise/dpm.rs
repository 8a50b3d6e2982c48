//! Dirichlet-process mixture of Gaussians for the regression errors, sampled with
//! a slice sampler over a deterministic decreasing sequence.

use log::warn;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};

use crate::mh::AdaptiveStep;
use crate::stats::normal_logpdf;

/// Hard cap on the number of instantiated components.
pub const MAX_COMPONENTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpmPrior {
    /// variance of the zero-centred normal prior on component means
    pub mean_var: f64,
    /// shape and rate of the Gamma prior on component precisions
    pub prec_shape: f64,
    pub prec_rate: f64,
    /// shape and rate of the Gamma prior on the concentration
    pub alpha_shape: f64,
    pub alpha_rate: f64,
    /// decay of the slice sequence `(1 - kappa) kappa^{j-1}`
    pub kappa: f64,
}

impl Default for DpmPrior {
    fn default() -> Self {
        Self {
            mean_var: 4.0,
            prec_shape: 10.0,
            prec_rate: 5.0,
            alpha_shape: 2.0,
            alpha_rate: 4.0,
            kappa: 0.8,
        }
    }
}

impl DpmPrior {
    /// Slice level of component `j` (zero-based).
    pub fn level(&self, j: usize) -> f64 {
        (1.0 - self.kappa) * self.kappa.powi(j as i32)
    }
}

#[derive(Debug, Clone)]
pub struct DpmState {
    /// stick proportions; the last one is 1 so the weights sum to one
    pub sticks: Vec<f64>,
    pub weights: Vec<f64>,
    /// zero-based component of each observation
    pub alloc: Vec<usize>,
    pub slice_u: Vec<f64>,
    pub means: Vec<f64>,
    /// component variances; `None` when the variance comes from a volatility path
    pub vars: Option<Vec<f64>>,
    pub alpha: f64,
    pub alpha_step: AdaptiveStep,
}

impl DpmState {
    /// A single component holding every observation.
    pub fn single(t: usize, var: Option<f64>, alpha: f64) -> Self {
        Self {
            sticks: vec![1.0],
            weights: vec![1.0],
            alloc: vec![0; t],
            slice_u: vec![0.5; t],
            means: vec![0.0],
            vars: var.map(|v| vec![v]),
            alpha,
            alpha_step: AdaptiveStep::new(1.0),
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        counts(&self.alloc, self.len())
    }

    pub fn occupied(&self) -> usize {
        self.counts().iter().filter(|c| **c > 0).count()
    }

    /// Checks the structural invariants.
    pub fn is_valid(&self) -> bool {
        let j = self.len();
        let sum: f64 = self.weights.iter().sum();
        j >= 1
            && self.sticks.len() == j
            && self.weights.len() == j
            && self
                .vars
                .as_ref()
                .is_none_or(|v| v.len() == j && v.iter().all(|x| *x > 0.0))
            && (sum - 1.0).abs() < 1e-12
            && self.weights.iter().all(|w| *w >= 0.0)
            && self.alloc.iter().all(|&d| d < j && self.weights[d] > 0.0)
            && self.alpha > 0.0
    }
}

pub fn counts(alloc: &[usize], j: usize) -> Vec<usize> {
    let mut c = vec![0; j];
    for &d in alloc {
        if d < j {
            c[d] += 1;
        }
    }
    c
}

/// `w_1 = v_1`, `w_j = v_j prod_{i<j} (1 - v_i)`.
pub fn stick_to_weights(sticks: &[f64]) -> Vec<f64> {
    let mut rest = 1.0;
    sticks
        .iter()
        .map(|v| {
            let w = v * rest;
            rest *= 1.0 - v;
            w
        })
        .collect()
}

fn beta_draw<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    // Beta can return exactly 0 or 1 in extreme cases; keep sticks in the open interval
    Beta::new(a, b)
        .unwrap()
        .sample(rng)
        .clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

/// Posterior draws of the first `n` sticks given allocation counts.
fn posterior_sticks<R: Rng + ?Sized>(
    counts: &[usize],
    alpha: f64,
    n: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut tail: usize = counts.iter().take(n).sum();
    (0..n)
        .map(|j| {
            let c = counts.get(j).copied().unwrap_or(0);
            tail -= c;
            beta_draw(1.0 + c as f64, alpha + tail as f64, rng)
        })
        .collect()
}

/// `v_j ~ Beta(1 + T_j, alpha + sum_{i>j} T_i)` for `j < J` and `v_J = 1`.
pub fn sample_sticks<R: Rng + ?Sized>(
    alloc: &[usize],
    alpha: f64,
    j: usize,
    rng: &mut R,
) -> Vec<f64> {
    let c = counts(alloc, j);
    let mut s = posterior_sticks(&c, alpha, j.saturating_sub(1), rng);
    s.push(1.0);
    s
}

/// Smallest `J` with `1 - sum_{j<=J} w_j < min_u`, or `None` when `weights` is too short.
pub fn truncation_level(weights: &[f64], min_u: f64) -> Option<usize> {
    let mut cum = 0.0;
    for (j, w) in weights.iter().enumerate() {
        cum += w;
        if 1.0 - cum < min_u {
            return Some(j + 1);
        }
    }
    None
}

/// Grows `sticks` with prior draws until the weights satisfy the truncation rule for
/// `min_u`, or the cap is reached. Returns the truncation level.
pub fn update_truncation<R: Rng + ?Sized>(
    sticks: &mut Vec<f64>,
    alpha: f64,
    min_u: f64,
    rng: &mut R,
) -> usize {
    loop {
        let w = stick_to_weights(sticks);
        if let Some(j) = truncation_level(&w, min_u) {
            return j;
        }
        if sticks.len() >= MAX_COMPONENTS {
            warn!("mixture truncation capped at {MAX_COMPONENTS} components");
            return MAX_COMPONENTS;
        }
        sticks.push(beta_draw(1.0, alpha, rng));
    }
}

fn log_alpha_target(alpha: f64, sticks: &[f64], prior: &DpmPrior) -> f64 {
    // Beta(v; 1, alpha) = alpha (1 - v)^{alpha - 1}; log-scale Jacobian adds log alpha
    let mut lp = (prior.alpha_shape - 1.0) * alpha.ln() - prior.alpha_rate * alpha + alpha.ln();
    for &v in sticks {
        if v < 1.0 {
            lp += alpha.ln() + (alpha - 1.0) * (1.0 - v).ln();
        }
    }
    lp
}

/// Random-walk update of the concentration on the log scale given the sticks.
pub fn sample_alpha<R: Rng + ?Sized>(
    alpha: f64,
    sticks: &[f64],
    prior: &DpmPrior,
    step: &mut AdaptiveStep,
    rng: &mut R,
) -> f64 {
    let cur = log_alpha_target(alpha, sticks, prior);
    let (x, _, _) = step.step(
        &[alpha.ln()],
        cur,
        |p| Some(log_alpha_target(p[0].exp(), sticks, prior)),
        rng,
    );
    x[0].exp()
}

/// Conjugate draw of one component mean given its residuals and their variances.
pub fn component_mean_posterior(resid: &[f64], vars: &[f64], prior_var: f64) -> (f64, f64) {
    let mut prec = 1.0 / prior_var;
    let mut lin = 0.0;
    for (e, v) in resid.iter().zip(vars) {
        prec += 1.0 / v;
        lin += e / v;
    }
    (lin / prec, 1.0 / prec)
}

/// Parameters `(shape, scale)` of the inverse-Gamma posterior of a component variance.
pub fn component_var_posterior(resid: &[f64], mean: f64, prior: &DpmPrior) -> (f64, f64) {
    let ss: f64 = resid.iter().map(|e| (e - mean) * (e - mean)).sum();
    (
        prior.prec_shape + resid.len() as f64 / 2.0,
        prior.prec_rate + 0.5 * ss,
    )
}

fn inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    1.0 / Gamma::new(shape, 1.0 / scale).unwrap().sample(rng)
}

fn prior_mean<R: Rng + ?Sized>(prior: &DpmPrior, rng: &mut R) -> f64 {
    Normal::new(0.0, prior.mean_var.sqrt()).unwrap().sample(rng)
}

fn prior_var<R: Rng + ?Sized>(prior: &DpmPrior, rng: &mut R) -> f64 {
    inv_gamma(prior.prec_shape, prior.prec_rate, rng)
}

/// Draws the component means (and variances, when owned) for the first `n`
/// components given the current allocation; empty components come from the prior.
pub fn sample_components<R: Rng + ?Sized>(
    state: &mut DpmState,
    resid: &[f64],
    obs_var: Option<&[f64]>,
    prior: &DpmPrior,
    rng: &mut R,
) {
    let j = state.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); j];
    for (t, &d) in state.alloc.iter().enumerate() {
        members[d].push(t);
    }
    for (c, idx) in members.iter().enumerate() {
        if idx.is_empty() {
            state.means[c] = prior_mean(prior, rng);
            if let Some(v) = state.vars.as_mut() {
                v[c] = prior_var(prior, rng);
            }
            continue;
        }
        let e: Vec<f64> = idx.iter().map(|&t| resid[t]).collect();
        let v: Vec<f64> = match (obs_var, state.vars.as_ref()) {
            (Some(ov), _) => idx.iter().map(|&t| ov[t]).collect(),
            (None, Some(cv)) => vec![cv[c]; idx.len()],
            (None, None) => vec![1.0; idx.len()],
        };
        let (m, s2) = component_mean_posterior(&e, &v, prior.mean_var);
        state.means[c] = m + s2.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal);
        if obs_var.is_none() {
            if let Some(cv) = state.vars.as_mut() {
                let (a, b) = component_var_posterior(&e, state.means[c], prior);
                cv[c] = inv_gamma(a, b, rng);
            }
        }
    }
}

/// Unnormalized log allocation masses of observation `e` over components with
/// slice level above `u`. Components outside the slice get `-inf`.
pub fn allocation_log_masses(
    e: f64,
    u: f64,
    var_t: Option<f64>,
    state: &DpmState,
    prior: &DpmPrior,
) -> Vec<f64> {
    (0..state.len())
        .map(|j| {
            let lvl = prior.level(j);
            if u >= lvl || state.weights[j] <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let var = var_t.unwrap_or_else(|| state.vars.as_ref().map_or(1.0, |v| v[j]));
            state.weights[j].ln() - lvl.ln() + normal_logpdf(e, state.means[j], var)
        })
        .collect()
}

fn draw_discrete<R: Rng + ?Sized>(logm: &[f64], rng: &mut R) -> usize {
    let max = logm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        warn!("all allocation masses vanished; keeping the most likely component");
        return logm
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
    }
    let p: Vec<f64> = logm.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = p.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, pi) in p.iter().enumerate() {
        if *pi > 0.0 {
            if u < *pi {
                return i;
            }
            u -= pi;
        }
    }
    p.iter().rposition(|x| *x > 0.0).unwrap_or(0)
}

/// Draws the slice variables `u_t ~ U(0, level(delta_t))` and then the allocations.
///
/// The state must already hold enough components to cover the slice.
pub fn sample_slice_and_alloc<R: Rng + ?Sized>(
    resid: &[f64],
    obs_var: Option<&[f64]>,
    state: &mut DpmState,
    prior: &DpmPrior,
    rng: &mut R,
) {
    for t in 0..resid.len() {
        state.slice_u[t] = rng.random::<f64>() * prior.level(state.alloc[t]);
    }
    allocate(resid, obs_var, state, prior, rng);
}

fn allocate<R: Rng + ?Sized>(
    resid: &[f64],
    obs_var: Option<&[f64]>,
    state: &mut DpmState,
    prior: &DpmPrior,
    rng: &mut R,
) {
    for t in 0..resid.len() {
        let var_t = obs_var.map(|v| v[t]);
        let logm = allocation_log_masses(resid[t], state.slice_u[t], var_t, state, prior);
        state.alloc[t] = draw_discrete(&logm, rng);
    }
}

/// One full sweep of the mixture given residuals (and a per-observation variance
/// path when the variance is not component-specific).
pub fn dpm_sweep<R: Rng + ?Sized>(
    state: &mut DpmState,
    resid: &[f64],
    obs_var: Option<&[f64]>,
    prior: &DpmPrior,
    rng: &mut R,
) {
    let n = resid.len();
    if state.alloc.len() != n {
        state.alloc = vec![0; n];
        state.slice_u = vec![0.5; n];
    }

    sample_components(state, resid, obs_var, prior, rng);

    // sticks for the occupied range, then the concentration
    let c = state.counts();
    let m = c.iter().rposition(|x| *x > 0).map_or(1, |i| i + 1);
    let mut sticks = posterior_sticks(&c, state.alpha, m, rng);
    state.alpha = sample_alpha(state.alpha, &sticks, prior, &mut state.alpha_step, rng);

    for t in 0..n {
        state.slice_u[t] = rng.random::<f64>() * prior.level(state.alloc[t]);
    }
    let min_u = state.slice_u.iter().copied().fold(f64::INFINITY, f64::min);

    // components needed by the slice: every j with level(j) > min u
    let mut need = 1;
    while need < MAX_COMPONENTS && prior.level(need) > min_u {
        need += 1;
    }
    if need == MAX_COMPONENTS && prior.level(need) > min_u {
        warn!("mixture truncation capped at {MAX_COMPONENTS} components");
    }
    state.means.truncate(m);
    if let Some(v) = state.vars.as_mut() {
        v.truncate(m);
    }
    while sticks.len() < need {
        sticks.push(beta_draw(1.0, state.alpha, rng));
    }
    let j = update_truncation(&mut sticks, state.alpha, min_u, rng).max(need);
    sticks.truncate(j.max(m));
    while state.means.len() < sticks.len() {
        state.means.push(prior_mean(prior, rng));
        if let Some(v) = state.vars.as_mut() {
            v.push(prior_var(prior, rng));
        }
    }
    state.sticks = sticks;
    state.weights = stick_to_weights(&state.sticks);

    allocate(resid, obs_var, state, prior, rng);

    // keep the occupied range plus whatever the weights-tail rule asks for, and close
    // the last stick so the stored weights sum to one
    let occ = state
        .counts()
        .iter()
        .rposition(|x| *x > 0)
        .map_or(1, |i| i + 1);
    let tail = truncation_level(&state.weights, min_u).unwrap_or(state.len());
    let keep = occ.max(tail).min(state.len());
    state.sticks.truncate(keep);
    state.means.truncate(keep);
    if let Some(v) = state.vars.as_mut() {
        v.truncate(keep);
    }
    *state.sticks.last_mut().unwrap() = 1.0;
    state.weights = stick_to_weights(&state.sticks);
}

/// Log density of the mixture `sum_j w_j N(y; loc + mu_j, var_j + extra)`.
pub fn mixture_logpdf(
    state: &DpmState,
    y: f64,
    loc: f64,
    extra_var: f64,
    common_var: Option<f64>,
) -> f64 {
    let terms: Vec<f64> = (0..state.len())
        .filter(|&j| state.weights[j] > 0.0)
        .map(|j| {
            let v = common_var.unwrap_or_else(|| state.vars.as_ref().map_or(1.0, |v| v[j]));
            state.weights[j].ln() + normal_logpdf(y, loc + state.means[j], v + extra_var)
        })
        .collect();
    crate::stats::log_sum_exp(&terms)
}

/// Draws a component index from the weights.
pub fn draw_component<R: Rng + ?Sized>(state: &DpmState, rng: &mut R) -> usize {
    let logw: Vec<f64> = state.weights.iter().map(|w| w.ln()).collect();
    draw_discrete(&logw, rng)
}
