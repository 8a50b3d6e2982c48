//! Stochastic volatility: the log variance follows a stationary AR(1). Paths are
//! drawn by forward filtering and backward sampling under a seven-component normal
//! mixture approximation of the log chi-square distribution; the AR parameters use
//! a centred step followed by an ancillarity-sufficiency interweaving step.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal, StandardNormal};

use crate::filter::{ffbs, StateDynamics};
use crate::stats::normal_logpdf;

/// Offset added to squared residuals before taking logs.
pub const LOG_OFFSET: f64 = 1e-6;

/// Mixture approximation of `log(chi^2_1)`: probabilities, means and variances.
pub const MIX_PROB: [f64; 7] = [
    0.00730, 0.10556, 0.00002, 0.04395, 0.34001, 0.24566, 0.25750,
];
pub const MIX_MEAN: [f64; 7] = [
    -10.12999 - 1.2704,
    -3.97281 - 1.2704,
    -8.56686 - 1.2704,
    2.77786 - 1.2704,
    0.61942 - 1.2704,
    1.79518 - 1.2704,
    -1.08819 - 1.2704,
];
pub const MIX_VAR: [f64; 7] = [
    5.79596, 2.61369, 5.17950, 0.16735, 0.64009, 0.34023, 1.26261,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvPrior {
    pub mu_mean: f64,
    pub mu_var: f64,
    /// Beta prior on `(rho + 1) / 2`
    pub rho_a: f64,
    pub rho_b: f64,
    /// `sigma2 ~ Gamma(1/2, rate 1/(2 B))`, equivalently `sigma ~ N(0, B)`
    pub sigma2_scale: f64,
}

impl Default for SvPrior {
    fn default() -> Self {
        Self {
            mu_mean: 0.0,
            mu_var: 10.0,
            rho_a: 25.0,
            rho_b: 5.0,
            sigma2_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvState {
    pub h: Vec<f64>,
    pub mu: f64,
    pub rho: f64,
    pub sigma2: f64,
}

impl SvState {
    /// Flat path at a given log variance.
    pub fn flat(t: usize, log_var: f64) -> Self {
        Self {
            h: vec![log_var; t],
            mu: log_var,
            rho: 0.9,
            sigma2: 0.1,
        }
    }

    pub fn variances(&self) -> Vec<f64> {
        self.h.iter().map(|h| h.exp()).collect()
    }

    /// Simulates the log variance `steps` periods past the end of the path.
    pub fn forecast_log_var<R: Rng + ?Sized>(&self, steps: usize, rng: &mut R) -> f64 {
        let mut h = *self.h.last().unwrap_or(&self.mu);
        let sd = self.sigma2.sqrt();
        for _ in 0..steps {
            h = self.mu + self.rho * (h - self.mu) + sd * rng.sample::<f64, _>(StandardNormal);
        }
        h
    }
}

/// Samples the mixture indicator of each transformed observation.
fn sample_indicators<R: Rng + ?Sized>(z: &[f64], h: &[f64], rng: &mut R) -> Vec<usize> {
    z.iter()
        .zip(h)
        .map(|(&zt, &ht)| {
            let mut lp = [0.0; 7];
            let mut max = f64::NEG_INFINITY;
            for i in 0..7 {
                lp[i] = MIX_PROB[i].ln() + normal_logpdf(zt, ht + MIX_MEAN[i], MIX_VAR[i]);
                max = max.max(lp[i]);
            }
            let p: Vec<f64> = lp.iter().map(|l| (l - max).exp()).collect();
            let mut u = rng.random::<f64>() * p.iter().sum::<f64>();
            for (i, pi) in p.iter().enumerate() {
                if u < *pi {
                    return i;
                }
                u -= pi;
            }
            6
        })
        .collect()
}

fn beta_logpdf_unnorm(x: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln()
}

/// Log of the stationary density of the first state times the prior on `rho`.
fn rho_weight(rho: f64, h1c: f64, sigma2: f64, prior: &SvPrior) -> f64 {
    let stat_var = sigma2 / (1.0 - rho * rho);
    normal_logpdf(h1c, 0.0, stat_var)
        + beta_logpdf_unnorm((rho + 1.0) / 2.0, prior.rho_a, prior.rho_b)
}

/// Centred-parameterization updates of `(mu, rho, sigma2)` given the path.
fn centred_step<R: Rng + ?Sized>(st: &mut SvState, prior: &SvPrior, rng: &mut R) {
    let h = &st.h;
    let n = h.len();
    if n < 2 {
        return;
    }

    // mu: normal prior, stationary first state and the AR transitions
    {
        let (rho, s2) = (st.rho, st.sigma2);
        let mut prec = 1.0 / prior.mu_var + (1.0 - rho * rho) / s2;
        let mut lin = prior.mu_mean / prior.mu_var + (1.0 - rho * rho) * h[0] / s2;
        let k = (1.0 - rho) * (1.0 - rho) / s2;
        prec += (n - 1) as f64 * k;
        for t in 1..n {
            lin += (1.0 - rho) * (h[t] - rho * h[t - 1]) / s2;
        }
        st.mu = lin / prec + rng.sample::<f64, _>(StandardNormal) / prec.sqrt();
    }

    // rho: independence proposal from the regression conditional
    {
        let mu = st.mu;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for t in 1..n {
            let x = h[t - 1] - mu;
            sxx += x * x;
            sxy += x * (h[t] - mu);
        }
        if sxx > 0.0 {
            let prop = sxy / sxx + (st.sigma2 / sxx).sqrt() * rng.sample::<f64, _>(StandardNormal);
            if prop.abs() < 1.0 {
                let h1c = h[0] - mu;
                let log_ratio = rho_weight(prop, h1c, st.sigma2, prior)
                    - rho_weight(st.rho, h1c, st.sigma2, prior);
                if rng.random::<f64>().ln() < log_ratio {
                    st.rho = prop;
                }
            }
        }
    }

    // sigma2: inverse-Gamma proposal, corrected for the Gamma(1/2) prior
    {
        let (mu, rho) = (st.mu, st.rho);
        let mut ssr = (1.0 - rho * rho) * (h[0] - mu).powi(2);
        for t in 1..n {
            let e = h[t] - mu - rho * (h[t - 1] - mu);
            ssr += e * e;
        }
        let shape = n as f64 / 2.0;
        let prop = 1.0 / Gamma::new(shape, 2.0 / ssr.max(1e-12)).unwrap().sample(rng);
        let b = prior.sigma2_scale;
        let lw = |x: f64| 0.5 * x.ln() - x / (2.0 * b);
        if rng.random::<f64>().ln() < lw(prop) - lw(st.sigma2) {
            st.sigma2 = prop;
        }
    }
}

/// Interweaving step: redraw `(mu, sigma)` in the non-centred parameterization
/// `z_t - m_{s_t} = mu + sigma * h~_t + noise` and map back to the centred path.
fn noncentred_step<R: Rng + ?Sized>(
    st: &mut SvState,
    y: &[f64],
    v: &[f64],
    prior: &SvPrior,
    rng: &mut R,
) {
    let sigma = st.sigma2.sqrt();
    let mut ht: Vec<f64> = st.h.iter().map(|h| (h - st.mu) / sigma).collect();
    // weighted regression of y on [1, h~] with prior precision diag(1/mu_var, 1/B)
    let mut a11 = 1.0 / prior.mu_var;
    let mut a12 = 0.0;
    let mut a22 = 1.0 / prior.sigma2_scale;
    let mut b1 = prior.mu_mean / prior.mu_var;
    let mut b2 = 0.0;
    for t in 0..y.len() {
        let w = 1.0 / v[t];
        a11 += w;
        a12 += w * ht[t];
        a22 += w * ht[t] * ht[t];
        b1 += w * y[t];
        b2 += w * ht[t] * y[t];
    }
    let det = a11 * a22 - a12 * a12;
    if !(det > 0.0) {
        return;
    }
    let m1 = (a22 * b1 - a12 * b2) / det;
    let m2 = (a11 * b2 - a12 * b1) / det;
    // covariance = A^{-1}; draw via its Cholesky factor
    let c11 = a22 / det;
    let c12 = -a12 / det;
    let c22 = a11 / det;
    let l11 = c11.sqrt();
    let l21 = c12 / l11;
    let l22 = (c22 - l21 * l21).max(0.0).sqrt();
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let mu = m1 + l11 * z1;
    let mut s = m2 + l21 * z1 + l22 * z2;
    if s < 0.0 {
        s = -s;
        ht.iter_mut().for_each(|x| *x = -*x);
    }
    if s <= 1e-12 {
        return;
    }
    st.mu = mu;
    st.sigma2 = s * s;
    for (h, x) in st.h.iter_mut().zip(&ht) {
        *h = mu + s * x;
    }
}

/// One full update of the volatility block given (mean-adjusted) residuals.
pub fn sv_update<R: Rng + ?Sized>(resid: &[f64], st: &mut SvState, prior: &SvPrior, rng: &mut R) {
    let n = resid.len();
    if st.h.len() != n {
        st.h = vec![st.mu; n];
    }
    let z: Vec<f64> = resid.iter().map(|e| (e * e + LOG_OFFSET).ln()).collect();
    let s = sample_indicators(&z, &st.h, rng);
    let y: Vec<f64> = z.iter().zip(&s).map(|(zt, &i)| zt - MIX_MEAN[i]).collect();
    let v: Vec<f64> = s.iter().map(|&i| MIX_VAR[i]).collect();
    let dyn_ = StateDynamics {
        c: st.mu * (1.0 - st.rho),
        a: st.rho,
        q: st.sigma2,
        m0: st.mu,
        p0: st.sigma2 / (1.0 - st.rho * st.rho),
    };
    st.h = ffbs(&dyn_, &y, &v, rng);
    centred_step(st, prior, rng);
    noncentred_step(st, &y, &v, prior, rng);
}

/// Draws from the prior of the AR parameters, used by prior-predictive checks.
pub fn prior_draw<R: Rng + ?Sized>(prior: &SvPrior, rng: &mut R) -> (f64, f64, f64) {
    let mu = Normal::new(prior.mu_mean, prior.mu_var.sqrt())
        .unwrap()
        .sample(rng);
    let rho = 2.0 * Beta::new(prior.rho_a, prior.rho_b).unwrap().sample(rng) - 1.0;
    let s: f64 = rng.sample::<f64, _>(StandardNormal) * prior.sigma2_scale.sqrt();
    (mu, rho, s * s)
}
