//! Error specifications: homoskedastic Gaussian, Dirichlet-process mixture,
//! stochastic volatility, and mixture means with a common volatility path.

pub mod dpm;
pub mod sv;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

pub use dpm::{
    dpm_sweep, sample_alpha, sample_slice_and_alloc, sample_sticks, stick_to_weights,
    truncation_level, update_truncation, DpmPrior, DpmState,
};
pub use sv::{sv_update, SvPrior, SvState};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorKind {
    #[serde(rename = "homosk")]
    Homosk,
    #[serde(rename = "dpm")]
    Dpm,
    #[serde(rename = "sv")]
    Sv,
    #[serde(rename = "dpmsv")]
    DpmSv,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 4] = [
        ErrorKind::Homosk,
        ErrorKind::Dpm,
        ErrorKind::Sv,
        ErrorKind::DpmSv,
    ];

    pub fn slug(&self) -> &'static str {
        match self {
            ErrorKind::Homosk => "homosk",
            ErrorKind::Dpm => "dpm",
            ErrorKind::Sv => "sv",
            ErrorKind::DpmSv => "dpmsv",
        }
    }
}

impl std::str::FromStr for ErrorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ErrorKind::ALL
            .into_iter()
            .find(|k| k.slug().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown error kind `{s}`")))
    }
}

/// Priors of all error blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorPriors {
    pub dpm: DpmPrior,
    pub sv: SvPrior,
    /// shape of the inverse-Gamma prior on the homoskedastic variance; the scale is
    /// `shape * s2` for a reference variance `s2`
    pub homosk_shape: f64,
}

impl Default for ErrorPriors {
    fn default() -> Self {
        Self {
            dpm: DpmPrior::default(),
            sv: SvPrior::default(),
            homosk_shape: 3.0,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ErrorState {
    Homosk { sigma2: f64, prior_scale: f64 },
    Dpm(DpmState),
    Sv(SvState),
    DpmSv(DpmState, SvState),
}

/// Per-draw predictive error distribution: a weighted set of mean offsets sharing
/// one variance, or carrying their own.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorPredictive {
    pub weights: Vec<f64>,
    pub offsets: Vec<f64>,
    pub vars: Vec<f64>,
}

impl ErrorPredictive {
    pub fn gaussian(var: f64) -> Self {
        Self {
            weights: vec![1.0],
            offsets: vec![0.0],
            vars: vec![var],
        }
    }

    /// Draws one component and returns `(offset, variance)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let mut u = rng.random::<f64>() * self.weights.iter().sum::<f64>();
        for j in 0..self.weights.len() {
            if u < self.weights[j] {
                return (self.offsets[j], self.vars[j]);
            }
            u -= self.weights[j];
        }
        let j = self.weights.len() - 1;
        (self.offsets[j], self.vars[j])
    }

    /// Rescales from standardized to original units: `y = loc + scale * y_std`.
    pub fn rescale(&mut self, scale: f64) {
        self.offsets.iter_mut().for_each(|o| *o *= scale);
        self.vars.iter_mut().for_each(|v| *v *= scale * scale);
    }
}

impl ErrorState {
    /// Initial state for a kind given a reference residual variance.
    pub fn init(kind: ErrorKind, t: usize, ref_var: f64, priors: &ErrorPriors) -> Self {
        let ref_var = if ref_var.is_finite() && ref_var > 0.0 {
            ref_var
        } else {
            1.0
        };
        match kind {
            ErrorKind::Homosk => ErrorState::Homosk {
                sigma2: ref_var,
                prior_scale: priors.homosk_shape * ref_var,
            },
            ErrorKind::Dpm => ErrorState::Dpm(DpmState::single(t, Some(ref_var), 0.5)),
            ErrorKind::Sv => ErrorState::Sv(SvState::flat(t, ref_var.ln())),
            ErrorKind::DpmSv => ErrorState::DpmSv(
                DpmState::single(t, None, 0.5),
                SvState::flat(t, ref_var.ln()),
            ),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            ErrorState::Homosk { .. } => ErrorKind::Homosk,
            ErrorState::Dpm(_) => ErrorKind::Dpm,
            ErrorState::Sv(_) => ErrorKind::Sv,
            ErrorState::DpmSv(..) => ErrorKind::DpmSv,
        }
    }

    /// Per-observation error variances.
    pub fn variance_diag(&self, t: usize) -> Vec<f64> {
        match self {
            ErrorState::Homosk { sigma2, .. } => vec![*sigma2; t],
            ErrorState::Dpm(d) => {
                let v = d.vars.as_ref().expect("mixture owns its variances");
                d.alloc.iter().map(|&j| v[j]).collect()
            }
            ErrorState::Sv(s) | ErrorState::DpmSv(_, s) => s.variances(),
        }
    }

    /// Per-observation error means (component means for mixtures, zero otherwise).
    pub fn mean_offsets(&self, t: usize) -> Vec<f64> {
        match self {
            ErrorState::Dpm(d) | ErrorState::DpmSv(d, _) => {
                d.alloc.iter().map(|&j| d.means[j]).collect()
            }
            _ => vec![0.0; t],
        }
    }

    /// Updates the error block given residuals `y - f`.
    pub fn update<R: Rng + ?Sized>(&mut self, resid: &[f64], priors: &ErrorPriors, rng: &mut R) {
        match self {
            ErrorState::Homosk {
                sigma2,
                prior_scale,
            } => {
                let ss: f64 = resid.iter().map(|e| e * e).sum();
                let shape = priors.homosk_shape + resid.len() as f64 / 2.0;
                let scale = *prior_scale + 0.5 * ss;
                *sigma2 = 1.0 / Gamma::new(shape, 1.0 / scale).unwrap().sample(rng);
            }
            ErrorState::Dpm(d) => dpm_sweep(d, resid, None, &priors.dpm, rng),
            ErrorState::Sv(s) => sv_update(resid, s, &priors.sv, rng),
            ErrorState::DpmSv(d, s) => {
                if d.alloc.len() != resid.len() {
                    d.alloc = vec![0; resid.len()];
                    d.slice_u = vec![0.5; resid.len()];
                }
                let centred: Vec<f64> = resid
                    .iter()
                    .zip(&d.alloc)
                    .map(|(e, &j)| e - d.means[j])
                    .collect();
                sv_update(&centred, s, &priors.sv, rng);
                let vars = s.variances();
                dpm_sweep(d, resid, Some(&vars), &priors.dpm, rng);
            }
        }
    }

    /// Predictive error distribution `horizon` periods after the last observation.
    pub fn predictive<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> ErrorPredictive {
        match self {
            ErrorState::Homosk { sigma2, .. } => ErrorPredictive::gaussian(*sigma2),
            ErrorState::Dpm(d) => ErrorPredictive {
                weights: d.weights.clone(),
                offsets: d.means.clone(),
                vars: d.vars.clone().expect("mixture owns its variances"),
            },
            ErrorState::Sv(s) => ErrorPredictive::gaussian(s.forecast_log_var(horizon, rng).exp()),
            ErrorState::DpmSv(d, s) => {
                let v = s.forecast_log_var(horizon, rng).exp();
                ErrorPredictive {
                    weights: d.weights.clone(),
                    offsets: d.means.clone(),
                    vars: vec![v; d.len()],
                }
            }
        }
    }

    /// Draws a single `(offset, variance)` pair from the predictive error distribution.
    pub fn predictive_draw<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> (f64, f64) {
        self.predictive(horizon, rng).draw(rng)
    }

    /// Scalars monitored for convergence.
    pub fn monitored(&self) -> Vec<(&'static str, f64)> {
        match self {
            ErrorState::Homosk { sigma2, .. } => vec![("sigma2", *sigma2)],
            ErrorState::Dpm(d) => vec![("alpha", d.alpha), ("clusters", d.occupied() as f64)],
            ErrorState::Sv(s) => vec![("sv_mu", s.mu), ("sv_rho", s.rho), ("sv_sigma2", s.sigma2)],
            ErrorState::DpmSv(d, s) => vec![
                ("alpha", d.alpha),
                ("clusters", d.occupied() as f64),
                ("sv_mu", s.mu),
                ("sv_rho", s.rho),
                ("sv_sigma2", s.sigma2),
            ],
        }
    }

    /// Ends step-size adaptation of any Metropolis steps.
    pub fn freeze_adaptation(&mut self) {
        if let ErrorState::Dpm(d) | ErrorState::DpmSv(d, _) = self {
            d.alpha_step.freeze();
        }
    }
}
