//! Slice sampler for the subspace shrinkage scale.

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::gamma_lr;

/// Hyperparameters of the beta-prime prior on the shrinkage scale; `(0.5, 0.5)`
/// makes the scale's square root half-Cauchy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalePrior {
    pub d0: f64,
    pub d1: f64,
}

impl Default for ScalePrior {
    fn default() -> Self {
        Self { d0: 0.5, d1: 0.5 }
    }
}

impl ScalePrior {
    /// Unnormalized prior density of `tau`, `(tau^2)^{d1 - 1/2} / (1 + tau^2)^{d0 + d1}`.
    pub fn tau_density(&self, tau: f64) -> f64 {
        let t2 = tau * tau;
        t2.powf(self.d1 - 0.5) / (1.0 + t2).powf(self.d0 + self.d1)
    }
}

/// Draws from Gamma(shape, rate) truncated to `(0, upper)`.
///
/// Plain rejection when the truncation keeps most of the mass, inverse CDF otherwise.
/// A vanishing rate degenerates to the power law `upper * U^{1/shape}`.
pub fn truncated_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, upper: f64, rng: &mut R) -> f64 {
    if !upper.is_finite() {
        if rate > 0.0 {
            return Gamma::new(shape, 1.0 / rate).unwrap().sample(rng);
        }
        return f64::MAX;
    }
    let power_law = |rng: &mut R| upper * rng.random::<f64>().powf(1.0 / shape);
    if rate <= 0.0 || rate * upper < 1e-12 * shape {
        return power_law(rng);
    }
    let mass = gamma_lr(shape, rate * upper);
    if mass > 0.5 {
        let g = Gamma::new(shape, 1.0 / rate).unwrap();
        loop {
            let x = g.sample(rng);
            if x < upper {
                return x;
            }
        }
    }
    if mass <= f64::MIN_POSITIVE || !mass.is_finite() {
        return power_law(rng);
    }
    let target = rng.random::<f64>() * mass;
    let (mut lo, mut hi) = (0.0, upper);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gamma_lr(shape, rate * mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// One slice update of the shrinkage scale given `quad = f'(I - Phi0) f`.
///
/// With `zeta = 1/tau2` the full conditional is
/// `zeta^{a-1} exp(-quad zeta / 2) (1 + zeta)^{-(d0+d1)}`, `a = d0 + (T - rank)/2`;
/// the last factor is sliced away, leaving a truncated Gamma.
pub fn sample_tau2<R: Rng + ?Sized>(
    tau2: f64,
    quad: f64,
    t: usize,
    rank: usize,
    prior: ScalePrior,
    rng: &mut R,
) -> f64 {
    let e = prior.d0 + prior.d1;
    let height = (1.0 / tau2 + 1.0).powf(-e);
    let u = rng.random::<f64>() * height;
    let upper = u.powf(-1.0 / e) - 1.0;
    let shape = prior.d0 + (t.saturating_sub(rank)) as f64 / 2.0;
    let rate = if quad <= 1e-300 {
        warn!("residual quadratic form vanished; drawing the shrinkage scale from its truncation");
        0.0
    } else {
        quad / 2.0
    };
    let zeta = truncated_gamma(shape, rate, upper, rng).max(1e-300);
    1.0 / zeta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_test;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// CDF of an unnormalized density on `(0, upper)` by composite Simpson quadrature.
    fn quadrature_cdf<F: Fn(f64) -> f64>(density: F, upper: f64, n: usize) -> impl Fn(f64) -> f64 {
        let h = upper / n as f64;
        let mut cum = vec![0.0; n + 1];
        for i in 0..n {
            let a = i as f64 * h;
            let b = a + h;
            cum[i + 1] =
                cum[i] + h / 6.0 * (density(a) + 4.0 * density(0.5 * (a + b)) + density(b));
        }
        let total = cum[n];
        move |x: f64| {
            if x <= 0.0 {
                return 0.0;
            }
            if x >= upper {
                return 1.0;
            }
            let pos = x / h;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            (cum[i] + frac * (cum[i + 1] - cum[i])) / total
        }
    }

    #[test]
    fn half_cauchy_density_ratios() {
        let p = ScalePrior::default();
        for tau in [0.5, 1.0, 2.0] {
            let want = (1.0 + 1.0) / (1.0 + tau * tau);
            assert!((p.tau_density(tau) / p.tau_density(1.0) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn truncated_gamma_matches_inverse_cdf_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for &(shape, rate, upper) in &[(3.5, 2.0, 1.0), (2.0, 1.0, 6.0), (40.0, 0.5, 30.0)] {
            let draws: Vec<f64> = (0..100_000)
                .map(|_| truncated_gamma(shape, rate, upper, &mut rng))
                .collect();
            assert!(draws.iter().all(|x| *x > 0.0 && *x < upper));
            let cdf = quadrature_cdf(
                |x: f64| {
                    if x <= 0.0 {
                        0.0
                    } else {
                        x.powf(shape - 1.0) * (-rate * x).exp()
                    }
                },
                upper,
                20_000,
            );
            let (d, _) = ks_test(&draws, cdf);
            assert!(d < 0.02, "shape {shape} rate {rate} upper {upper}: KS {d}");
        }
    }

    #[test]
    fn zero_rate_uses_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws: Vec<f64> = (0..50_000)
            .map(|_| truncated_gamma(2.0, 0.0, 2.0, &mut rng))
            .collect();
        let (d, _) = ks_test(&draws, |x| (x / 2.0).powi(2));
        assert!(d < 0.02);
        let t = sample_tau2(1.0, 0.0, 20, 3, ScalePrior::default(), &mut rng);
        assert!(t.is_finite() && t > 0.0);
    }

    #[test]
    fn slice_chain_targets_full_conditional() {
        let (t, rank, quad) = (12usize, 3usize, 6.0);
        let prior = ScalePrior::default();
        let a = prior.d0 + (t - rank) as f64 / 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut tau2 = 1.0;
        let mut zetas = Vec::new();
        for i in 0..200_000 {
            tau2 = sample_tau2(tau2, quad, t, rank, prior, &mut rng);
            if i >= 1000 && i % 5 == 0 {
                zetas.push(1.0 / tau2);
            }
        }
        let upper = 40.0;
        let cdf = quadrature_cdf(
            |z: f64| {
                if z <= 0.0 {
                    0.0
                } else {
                    z.powf(a - 1.0)
                        * (-quad / 2.0 * z).exp()
                        * (1.0 + z).powf(-(prior.d0 + prior.d1))
                }
            },
            upper,
            40_000,
        );
        let (d, pval) = ks_test(&zetas, cdf);
        assert!(d < 0.02 && pval > 0.01, "KS {d}, p {pval}");
    }
}
