use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Quarter;
use crate::engine::chain::{PosteriorDraws, PredictiveComponent};
use crate::error::{Error, Result};
use crate::stats::{mean, quantiles};

/// Probabilities at which predictive quantiles are reported and scored.
pub const P_GRID: [f64; 5] = [0.05, 0.1, 0.5, 0.9, 0.95];

/// Simulated predictive distribution of the outcome `horizon` quarters after `origin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDraws {
    pub origin: Quarter,
    pub horizon: usize,
    pub draws: Vec<f64>,
    pub point: f64,
    /// quantiles at [`P_GRID`]
    pub quantiles: Vec<f64>,
    /// per-draw Gaussian components for analytic density evaluation
    #[serde(skip)]
    pub components: Vec<PredictiveComponent>,
    pub outcome: Option<f64>,
}

impl PredictiveDraws {
    pub fn from_draws(
        origin: Quarter,
        horizon: usize,
        draws: Vec<f64>,
        components: Vec<PredictiveComponent>,
        outcome: Option<f64>,
    ) -> Self {
        Self {
            origin,
            horizon,
            point: mean(&draws),
            quantiles: quantiles(&draws, &P_GRID),
            draws,
            components,
            outcome,
        }
    }
}

/// One outcome draw per retained posterior draw:
/// `y ~ N(mean + offset, var_f + var_e)` with `(offset, var_e)` drawn from that
/// draw's error distribution.
pub fn predictive_simulate<R: Rng + ?Sized>(
    posterior: &PosteriorDraws,
    origin: Quarter,
    horizon: usize,
    rng: &mut R,
) -> Result<PredictiveDraws> {
    if posterior.components.is_empty() {
        return Err(Error::Config(
            "posterior carries no predictive components; the window had no origin row".into(),
        ));
    }
    let draws = posterior
        .components
        .iter()
        .map(|c| {
            let (offset, var_e) = c.error.draw(rng);
            let z: f64 = rng.sample(StandardNormal);
            c.mean + offset + (c.var + var_e).max(0.0).sqrt() * z
        })
        .collect();
    Ok(PredictiveDraws::from_draws(
        origin,
        horizon,
        draws,
        posterior.components.clone(),
        None,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::ErrorPredictive;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn posterior(components: Vec<PredictiveComponent>) -> PosteriorDraws {
        PosteriorDraws {
            traces: Vec::new(),
            inefficiency: Vec::new(),
            components,
            fitted_mean: Vec::new(),
            fitted_traces: None,
            hyper_acceptance: None,
            loc: 0.0,
            scale: 1.0,
        }
    }

    #[test]
    fn gaussian_components_give_closed_form_moments() {
        let comp = PredictiveComponent {
            mean: 1.5,
            var: 0.3,
            error: ErrorPredictive::gaussian(0.7),
        };
        let post = posterior(vec![comp; 200_000]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = predictive_simulate(&post, Quarter::new(2000, 1).unwrap(), 1, &mut rng).unwrap();
        let v = crate::stats::variance(&p.draws);
        assert!((p.point - 1.5).abs() < 0.01);
        assert!((v - 1.0).abs() < 0.02);
        assert_eq!(p.draws.len(), 200_000);
        assert!(p.quantiles.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn separated_mixture_is_bimodal() {
        let comp = PredictiveComponent {
            mean: 0.0,
            var: 0.0,
            error: ErrorPredictive {
                weights: vec![0.5, 0.5],
                offsets: vec![-4.0, 4.0],
                vars: vec![0.25, 0.25],
            },
        };
        let post = posterior(vec![comp; 50_000]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = predictive_simulate(&post, Quarter::new(2000, 1).unwrap(), 1, &mut rng).unwrap();
        let count =
            |lo: f64, hi: f64| p.draws.iter().filter(|d| **d >= lo && **d < hi).count() as f64;
        let (left, mid, right) = (count(-4.5, -3.5), count(-0.5, 0.5), count(3.5, 4.5));
        assert!(mid < 0.01 * left.min(right), "{left} {mid} {right}");
        // a dip this deep is far outside what a unimodal density with these side masses allows
        let expected_share = 0.5 * (crate::stats::normal_cdf(1.0) - crate::stats::normal_cdf(-1.0));
        assert!((left / 50_000.0 - expected_share).abs() < 0.01);
    }
}
