use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::Result;
use crate::gp::kernel::KernelHyper;
use crate::linalg::{chol_logdet, chol_spd, solve_lower};
use crate::mh::{inv_logit, logit, AdaptiveStep};
use crate::stats::LN_2PI;

/// Log density of `r ~ N(0, C + diag(sigma))`.
pub fn gaussian_marginal_loglik(
    c: &DMatrix<f64>,
    sigma: &DVector<f64>,
    r: &DVector<f64>,
) -> Result<f64> {
    let n = c.nrows();
    let mut a = c.clone();
    for i in 0..n {
        a[(i, i)] += sigma[i];
    }
    let scale = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let ch = chol_spd(&a, scale)?;
    let z = solve_lower(&ch, r);
    Ok(-0.5 * (n as f64 * LN_2PI + chol_logdet(&ch) + z.norm_squared()))
}

/// Log target on the logit scale: likelihood plus the Jacobian of the uniform priors.
fn logit_target(ll: f64, h: KernelHyper) -> f64 {
    ll + (h.xi * (1.0 - h.xi)).ln() + (h.phi * (1.0 - h.phi)).ln()
}

/// Joint random-walk update of `(xi, phi)` on the logit scale.
///
/// `loglik` returns the likelihood of the data at a candidate, or `None` when it
/// cannot be evaluated. Returns the new state, its likelihood and whether the
/// proposal was accepted.
pub fn sample_kernel_hyper<R, F>(
    current: KernelHyper,
    current_ll: f64,
    mut loglik: F,
    step: &mut AdaptiveStep,
    rng: &mut R,
) -> (KernelHyper, f64, bool)
where
    R: Rng + ?Sized,
    F: FnMut(KernelHyper) -> Option<f64>,
{
    let theta = [logit(current.xi), logit(current.phi)];
    let cur_lp = logit_target(current_ll, current);
    let mut last_ll = current_ll;
    let (next, _, accepted) = step.step(
        &theta,
        cur_lp,
        |p| {
            let h = KernelHyper {
                xi: inv_logit(p[0]),
                phi: inv_logit(p[1]),
            };
            if !(h.xi > 0.0 && h.xi < 1.0 && h.phi > 0.0 && h.phi < 1.0) {
                return None;
            }
            let ll = loglik(h)?;
            last_ll = ll;
            Some(logit_target(ll, h))
        },
        rng,
    );
    if accepted {
        let h = KernelHyper {
            xi: inv_logit(next[0]),
            phi: inv_logit(next[1]),
        };
        (h, last_ll, true)
    } else {
        (current, current_ll, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::kernel::{gaussian_kernel_matrix, kernel_from_distances, squared_distances};
    use crate::linalg::{chol_kernel, mul_lower, standard_normals};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn marginal_loglik_matches_dense() {
        let x = DMatrix::from_fn(6, 1, |i, _| i as f64 * 0.4);
        let c = gaussian_kernel_matrix(&x, KernelHyper { xi: 0.5, phi: 0.5 });
        let s = DVector::from_element(6, 0.3);
        let r = DVector::from_fn(6, |i, _| (i as f64).sin());
        let a = &c + DMatrix::from_diagonal(&s);
        let want = -0.5
            * (6.0 * LN_2PI
                + a.determinant().ln()
                + (r.transpose() * a.try_inverse().unwrap() * &r)[(0, 0)]);
        assert!((gaussian_marginal_loglik(&c, &s, &r).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn recovers_bandwidth_from_simulated_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let t = 200;
        let x = DMatrix::from_fn(t, 2, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let d = squared_distances(&x);
        let truth = KernelHyper { xi: 0.8, phi: 0.3 };
        let (l, _) = chol_kernel(&kernel_from_distances(&d, truth), 1.0).unwrap();
        let noise: f64 = 0.05;
        let y = mul_lower(&l, &standard_normals(t, &mut rng))
            + standard_normals(t, &mut rng) * noise.sqrt();
        let sigma = DVector::from_element(t, noise);
        let ll = |h: KernelHyper| {
            gaussian_marginal_loglik(&kernel_from_distances(&d, h), &sigma, &y).ok()
        };

        let mut h = KernelHyper::default();
        let mut cur = ll(h).unwrap();
        let mut step = AdaptiveStep::new(0.5);
        let mut phis = Vec::new();
        for i in 0..3000 {
            if i == 1000 {
                step.freeze();
            }
            let (nh, nl, _) = sample_kernel_hyper(h, cur, ll, &mut step, &mut rng);
            h = nh;
            cur = nl;
            if i >= 1000 {
                phis.push(h.phi);
            }
        }
        let m = crate::stats::mean(&phis);
        assert!((m - 0.3).abs() < 0.15, "posterior mean phi {m}");
        let rate = step.acceptance_rate();
        assert!((0.2..=0.5).contains(&rate), "acceptance {rate}");
    }
}
