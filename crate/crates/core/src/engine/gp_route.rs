//! Latent-function blocks of the GP models, organized so that one iteration costs
//! a handful of `T x T` factorizations.
//!
//! The plain kernel works on `A = K + Sigma` directly. The subspace kernel works
//! in whitened coordinates `f = L a` with `K = L L'`: the prior precision of `a`
//! is `Pi = I + (P L)'(P L) / tau2` and its posterior precision is
//! `Q = Pi + L' Sigma^{-1} L`, both at least the identity.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::Result;
use crate::gp::kernel::{kernel_from_distances, kernel_vector};
use crate::gp::predict::{basis_terms, shrinkage_conditional};
use crate::gp::{KernelHyper, ProjectionBasis};
use crate::linalg::{
    chol_kernel, chol_logdet, chol_spd, mul_lower, solve_lower, solve_upper_t, standard_normals,
    Chol, JITTER_START,
};
use crate::stats::LN_2PI;

/// Kernel matrix with its factor at one hyperparameter value.
#[derive(Debug, Clone)]
pub struct KernelCache {
    pub hyper: KernelHyper,
    /// kernel with the jitter already on its diagonal
    pub k: DMatrix<f64>,
    pub jitter: f64,
    pub chol: Chol,
    /// `(P L)'(P L)` for the subspace kernel
    pub pl_gram: Option<DMatrix<f64>>,
}

/// Kernel with the default jitter, as used before a factorization is available.
pub(crate) fn jittered_kernel(dist: &DMatrix<f64>, hyper: KernelHyper) -> DMatrix<f64> {
    let mut k = kernel_from_distances(dist, hyper);
    let j = JITTER_START * hyper.xi;
    for i in 0..k.nrows() {
        k[(i, i)] += j;
    }
    k
}

impl KernelCache {
    pub fn build(
        dist: &DMatrix<f64>,
        hyper: KernelHyper,
        basis: Option<&ProjectionBasis>,
    ) -> Result<Self> {
        let raw = kernel_from_distances(dist, hyper);
        let (chol, jitter) = chol_kernel(&raw, hyper.xi)?;
        let mut k = raw;
        for i in 0..k.nrows() {
            k[(i, i)] += jitter;
        }
        let pl_gram = basis.map(|b| {
            let l = chol.l();
            let coef = b.gram().solve(&(b.basis().transpose() * &l));
            let pl = &l - b.basis() * coef;
            pl.transpose() * &pl
        });
        Ok(Self {
            hyper,
            k,
            jitter,
            chol,
            pl_gram,
        })
    }

    /// Plain-GP predictive moments of `f(x_new)` given training `f`, or the
    /// subspace-kernel moments when `tau2` is given.
    pub fn predict(
        &self,
        dist_new: &DVector<f64>,
        f: &DVector<f64>,
        tau2: Option<f64>,
        basis: Option<&ProjectionBasis>,
        b_new: Option<&DVector<f64>>,
    ) -> (f64, f64) {
        let kstar = kernel_vector(dist_new, self.hyper);
        let v = solve_lower(&self.chol, &kstar);
        let w = solve_lower(&self.chol, f);
        let af = v.dot(&w);
        let s = self.hyper.xi + self.jitter - v.norm_squared();
        match (tau2, basis, b_new) {
            (Some(t2), Some(b), Some(bn)) => {
                let (c, h) = basis_terms(b, bn, f);
                shrinkage_conditional(af, s.max(1e-300), c, h, Some(t2))
            }
            _ => shrinkage_conditional(af, s, 0.0, 0.0, None),
        }
    }
}

fn inv_sqrt_scaled(l: &DMatrix<f64>, sigma: &[f64]) -> DMatrix<f64> {
    let mut ls = l.clone();
    for (i, s) in sigma.iter().enumerate() {
        let w = 1.0 / s.sqrt();
        ls.row_mut(i).scale_mut(w);
    }
    ls
}

/// `log N(r; 0, K + Sigma)` with the factor of `K + Sigma`.
pub(crate) fn plain_marginal(
    k: &DMatrix<f64>,
    sigma: &[f64],
    r: &DVector<f64>,
) -> Result<(f64, Chol)> {
    let n = k.nrows();
    let mut a = k.clone();
    for i in 0..n {
        a[(i, i)] += sigma[i];
    }
    let scale = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let c = chol_spd(&a, scale)?;
    let z = solve_lower(&c, r);
    let ll = -0.5 * (n as f64 * LN_2PI + chol_logdet(&c) + z.norm_squared());
    Ok((ll, c))
}

/// Draws `f | r` under the plain kernel by Matheron's rule: a prior draw is
/// corrected with one solve against `K + Sigma`.
pub(crate) fn plain_draw<R: Rng + ?Sized>(
    cache: &KernelCache,
    a: &Chol,
    sigma: &[f64],
    r: &DVector<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let n = r.len();
    let prior = mul_lower(&cache.chol, &standard_normals(n, rng));
    let noise =
        DVector::from_fn(n, |i, _| sigma[i].sqrt()).component_mul(&standard_normals(n, rng));
    let w = a.solve(&(r - &prior - noise));
    prior + &cache.k * w
}

/// Factor of the whitened posterior precision together with `b = L' Sigma^{-1} r`.
#[derive(Debug, Clone)]
pub(crate) struct WhitenedPosterior {
    q: Chol,
    b: DVector<f64>,
}

/// `log N(r; 0, K1 + Sigma)` for the subspace kernel, evaluated through
/// `|K1 + Sigma| = |Sigma| |Q| / |Pi|` and Woodbury for the quadratic form.
pub(crate) fn subspace_marginal(
    cache: &KernelCache,
    tau2: f64,
    sigma: &[f64],
    r: &DVector<f64>,
) -> Result<(f64, WhitenedPosterior)> {
    let n = r.len();
    let gram = cache
        .pl_gram
        .as_ref()
        .expect("subspace cache carries the projected gram");
    let mut pi = gram / tau2;
    for i in 0..n {
        pi[(i, i)] += 1.0;
    }
    let pi_scale = (0..n).map(|i| pi[(i, i)]).fold(0.0, f64::max);
    let pi_chol = chol_spd(&pi, pi_scale)?;
    let l = cache.chol.l();
    let ls = inv_sqrt_scaled(&l, sigma);
    let mut q = pi;
    q += ls.transpose() * &ls;
    let q_scale = (0..n).map(|i| q[(i, i)]).fold(0.0, f64::max);
    let qc = chol_spd(&q, q_scale)?;
    let rs = DVector::from_fn(n, |i, _| r[i] / sigma[i]);
    let b = l.tr_mul(&rs);
    let u = solve_lower(&qc, &b);
    let quad = r.dot(&rs) - u.norm_squared();
    let log_sigma: f64 = sigma.iter().map(|s| s.ln()).sum();
    let ll =
        -0.5 * (n as f64 * LN_2PI + log_sigma + chol_logdet(&qc) - chol_logdet(&pi_chol) + quad);
    Ok((ll, WhitenedPosterior { q: qc, b }))
}

/// Draws `f = L a` with `a ~ N(Q^{-1} b, Q^{-1})`.
pub(crate) fn subspace_draw<R: Rng + ?Sized>(
    cache: &KernelCache,
    post: &WhitenedPosterior,
    rng: &mut R,
) -> DVector<f64> {
    let n = post.b.len();
    let a = post.q.solve(&post.b) + solve_upper_t(&post.q, &standard_normals(n, rng));
    mul_lower(&cache.chol, &a)
}

/// Draws the coefficients of `f = B g` under a flat prior on the span of `B`:
/// `g ~ N((B' Sigma^{-1} B)^{-1} B' Sigma^{-1} r, (B' Sigma^{-1} B)^{-1})`.
pub(crate) fn span_draw<R: Rng + ?Sized>(
    basis: &ProjectionBasis,
    sigma: &[f64],
    r: &DVector<f64>,
    rng: &mut R,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let b = basis.basis();
    let bs = inv_sqrt_scaled(b, sigma);
    let prec = bs.transpose() * &bs;
    let scale = (0..prec.nrows()).map(|i| prec[(i, i)]).fold(0.0, f64::max);
    let c = chol_spd(&prec, scale)?;
    let rs = DVector::from_fn(r.len(), |i, _| r[i] / sigma[i]);
    let coef = c.solve(&b.tr_mul(&rs)) + solve_upper_t(&c, &standard_normals(prec.nrows(), rng));
    let f = b * &coef;
    Ok((coef, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::kernel::squared_distances;
    use crate::gp::{gaussian_marginal_loglik, projection_matrix, subspace_kernel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture(t: usize, k: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(t, k, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let y = DVector::from_fn(t, |i, _| {
            x[(i, 0)] - 0.4 * x[(i, 1)].powi(2) + 0.2 * rng.random::<f64>()
        });
        let sigma = (0..t).map(|i| 0.05 + 0.01 * (i % 5) as f64).collect();
        (x, y, sigma)
    }

    #[test]
    fn subspace_marginal_matches_dense_kernel() {
        let (x, y, sigma) = fixture(30, 3, 1);
        let hyper = KernelHyper { xi: 0.6, phi: 0.3 };
        let basis = ProjectionBasis::new(&x).unwrap();
        let cache = KernelCache::build(&squared_distances(&x), hyper, Some(&basis)).unwrap();
        let pm = projection_matrix(&x).unwrap();
        for tau2 in [0.05, 1.0, 30.0] {
            let k1 = subspace_kernel(&cache.k, &pm, tau2).unwrap();
            let dense =
                gaussian_marginal_loglik(&k1, &DVector::from_vec(sigma.clone()), &y).unwrap();
            let (fast, _) = subspace_marginal(&cache, tau2, &sigma, &y).unwrap();
            assert!(
                (dense - fast).abs() < 1e-7 * dense.abs(),
                "{dense} vs {fast}"
            );
        }
    }

    #[test]
    fn plain_marginal_matches_dense_kernel() {
        let (x, y, sigma) = fixture(20, 2, 2);
        let hyper = KernelHyper { xi: 0.4, phi: 0.7 };
        let k = jittered_kernel(&squared_distances(&x), hyper);
        let dense = gaussian_marginal_loglik(&k, &DVector::from_vec(sigma.clone()), &y).unwrap();
        let (fast, _) = plain_marginal(&k, &sigma, &y).unwrap();
        assert!((dense - fast).abs() < 1e-10 * dense.abs());
    }

    /// Sample moments of both draw routes against the literal posterior formulas.
    #[test]
    fn draw_routes_reproduce_posterior_moments() {
        let (x, y, sigma) = fixture(6, 2, 3);
        let hyper = KernelHyper { xi: 0.8, phi: 0.5 };
        let basis = ProjectionBasis::new(&x).unwrap();
        let cache = KernelCache::build(&squared_distances(&x), hyper, Some(&basis)).unwrap();
        let pm = projection_matrix(&x).unwrap();
        let sd = DMatrix::from_diagonal(&DVector::from_vec(sigma.clone()));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 60_000;
        for tau2 in [None, Some(0.3)] {
            let k1 = match tau2 {
                None => cache.k.clone(),
                Some(t) => subspace_kernel(&cache.k, &pm, t).unwrap(),
            };
            let inv = (&k1 + &sd).try_inverse().unwrap();
            let mean = &k1 * &inv * &y;
            let cov = &k1 - &k1 * &inv * &k1;
            let mut sum = DVector::zeros(6);
            let mut sq = DVector::zeros(6);
            let (_, a) = plain_marginal(&cache.k, &sigma, &y).unwrap();
            let post = tau2.map(|t| subspace_marginal(&cache, t, &sigma, &y).unwrap().1);
            for _ in 0..n {
                let d = match &post {
                    None => plain_draw(&cache, &a, &sigma, &y, &mut rng),
                    Some(p) => subspace_draw(&cache, p, &mut rng),
                };
                sum += &d;
                sq += d.component_mul(&d);
            }
            for i in 0..6 {
                let m = sum[i] / n as f64;
                let v = sq[i] / n as f64 - m * m;
                let se = (cov[(i, i)] / n as f64).sqrt();
                assert!(
                    (m - mean[i]).abs() < 5.0 * se,
                    "{tau2:?} mean {i}: {m} vs {}",
                    mean[i]
                );
                assert!((v / cov[(i, i)] - 1.0).abs() < 0.05, "{tau2:?} var {i}");
            }
        }
    }

    #[test]
    fn span_draw_centres_on_weighted_least_squares() {
        let (x, y, _) = fixture(40, 3, 5);
        let basis = ProjectionBasis::new(&x).unwrap();
        let sigma = vec![1e-12; 40];
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (_, f) = span_draw(&basis, &sigma, &y, &mut rng).unwrap();
        let ols = basis.project(&y);
        assert!((f - ols).amax() < 1e-5);
    }

    #[test]
    fn predictive_moments_match_dense_construction() {
        let (x, _, _) = fixture(12, 2, 7);
        let hyper = KernelHyper { xi: 0.5, phi: 0.6 };
        let basis = ProjectionBasis::new(&x).unwrap();
        let cache = KernelCache::build(&squared_distances(&x), hyper, Some(&basis)).unwrap();
        let f = DVector::from_fn(12, |i, _| x[(i, 0)].sin());
        let xn = [0.2, -0.4];
        let dn = crate::gp::kernel::squared_distances_to(&x, &xn);
        let bn = basis.row_for(&xn);
        for tau2 in [None, Some(0.5)] {
            let (m, v) = cache.predict(&dn, &f, tau2, Some(&basis), Some(&bn));
            let (md, vd) =
                crate::gp::gp_predict(&x, &basis, &f, hyper, tau2, cache.jitter, &xn).unwrap();
            assert!(
                (m - md).abs() < 1e-7 && (v - vd).abs() < 1e-7,
                "{tau2:?}: {m} {v} vs {md} {vd}"
            );
        }
    }
}
