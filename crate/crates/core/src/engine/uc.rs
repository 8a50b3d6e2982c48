use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::filter::{ffbs, StateDynamics};

/// Prior of the random-walk trend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendPrior {
    pub shape: f64,
    pub scale: f64,
    /// variance of the first trend value around the first observation
    pub init_var: f64,
}

/// One update of the random-walk trend `trend_t = trend_{t-1} + eta_t` given
/// observations `z_t = y_t - offset_t` with variances `obs_var`: the path by
/// forward filtering and backward sampling, then the innovation variance from its
/// inverse-Gamma full conditional.
pub fn uc_trend_update<R: Rng + ?Sized>(
    z: &[f64],
    obs_var: &[f64],
    eta_var: f64,
    prior: &TrendPrior,
    rng: &mut R,
) -> (Vec<f64>, f64) {
    let dyn_ = StateDynamics {
        c: 0.0,
        a: 1.0,
        q: eta_var,
        m0: z[0],
        p0: prior.init_var,
    };
    let path = ffbs(&dyn_, z, obs_var, rng);
    let ss: f64 = path.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let shape = prior.shape + (path.len() - 1) as f64 / 2.0;
    let scale = prior.scale + 0.5 * ss;
    let eta = 1.0 / Gamma::new(shape, 1.0 / scale).unwrap().sample(rng);
    (path, eta)
}
