use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::gp::projection::ProjectionMatrix;
use crate::linalg::{chol_kernel, chol_spd, max_abs, mul_lower, standard_normals, symmetrize};

/// Linear weight implied by a shrinkage scale.
pub fn omega(tau2: f64) -> f64 {
    1.0 / (1.0 + tau2)
}

/// `(K^{-1} + (I - Phi0)/tau2)^{-1}`, evaluated as
/// `K - K P (tau2 I + P K P)^{-1} P K` with `P = I - Phi0`.
///
/// The rewrite only factorizes `tau2 I + P K P`, which stays well conditioned
/// for large `tau2` and returns `K` exactly when `P = 0`.
pub fn subspace_kernel(
    k: &DMatrix<f64>,
    phi0: &ProjectionMatrix,
    tau2: f64,
) -> Result<DMatrix<f64>> {
    if !(tau2 > 0.0) {
        return Err(Error::Config(format!(
            "shrinkage scale must be positive, got {tau2}"
        )));
    }
    let n = k.nrows();
    let p = DMatrix::<f64>::identity(n, n) - &phi0.phi0;
    let kp = k * &p;
    if max_abs(&kp) == 0.0 {
        return Ok(k.clone());
    }
    let mut m = p.transpose() * &kp;
    for i in 0..n {
        m[(i, i)] += tau2;
    }
    symmetrize(&mut m);
    let scale = (0..n).map(|i| m[(i, i)]).fold(0.0, f64::max);
    let c = chol_spd(&m, scale)?;
    let mut k1 = k - &kp * c.solve(&kp.transpose());
    symmetrize(&mut k1);
    Ok(k1)
}

/// Conditional posterior of the latent function values.
#[derive(Debug, Clone)]
pub struct FPosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub draw: DVector<f64>,
}

/// Draws `f ~ N(K1 (K1 + Sigma)^{-1} (y - mu), K1 - K1 (K1 + Sigma)^{-1} K1)`
/// for a diagonal error covariance `Sigma`.
pub fn sample_f<R: Rng + ?Sized>(
    k1: &DMatrix<f64>,
    sigma: &DVector<f64>,
    y: &DVector<f64>,
    mu: &DVector<f64>,
    rng: &mut R,
) -> Result<FPosterior> {
    let n = k1.nrows();
    if sigma.len() != n || y.len() != n || mu.len() != n {
        return Err(Error::Dimension(format!(
            "kernel is {n}x{n} but got {} variances, {} outcomes, {} offsets",
            sigma.len(),
            y.len(),
            mu.len()
        )));
    }
    if max_abs(k1) == 0.0 {
        return Ok(FPosterior {
            mean: DVector::zeros(n),
            cov: DMatrix::zeros(n, n),
            draw: DVector::zeros(n),
        });
    }
    let mut a = k1.clone();
    for i in 0..n {
        a[(i, i)] += sigma[i];
    }
    let scale = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let c = chol_spd(&a, scale)?;
    // W = A^{-1} K1, so K1 A^{-1} = W'
    let w = c.solve(k1);
    let mean = w.transpose() * (y - mu);
    let mut cov = k1 - k1 * &w;
    symmetrize(&mut cov);
    let z = standard_normals(n, rng);
    let cov_scale = (0..n).map(|i| cov[(i, i)]).fold(0.0, f64::max);
    let draw = if cov_scale <= 0.0 {
        mean.clone()
    } else {
        let (l, _) = chol_kernel(&cov, cov_scale)?;
        &mean + mul_lower(&l, &z)
    };
    Ok(FPosterior { mean, cov, draw })
}
