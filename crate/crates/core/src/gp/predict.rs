//! Prediction of the latent function at a new predictor vector, conditioning on
//! the training function values under the kernel built over training rows plus
//! the new row.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::kernel::{gaussian_kernel_matrix, KernelHyper};
use crate::gp::posterior::subspace_kernel;
use crate::gp::projection::{ProjectionBasis, ProjectionMatrix};
use crate::linalg::{chol_spd, symmetrize};

/// Closed-form conditional of `f(x_new)` given training `f`.
///
/// Inputs: `af = k*' K^{-1} f`, the Schur complement `s = k** - k*' K^{-1} k*`,
/// and the basis terms `c = b' G^{-1} B' f`, `h = b' G^{-1} b` with
/// `G = B'B + b b'`. `None` for the shrinkage scale gives the plain GP conditional.
pub fn shrinkage_conditional(af: f64, s: f64, c: f64, h: f64, tau2: Option<f64>) -> (f64, f64) {
    match tau2 {
        None => (af, s.max(0.0)),
        Some(t2) => {
            let denom = t2 / s + 1.0 - h;
            ((t2 * af / s + c) / denom, (t2 / denom).max(0.0))
        }
    }
}

/// Basis terms `(c, h)` for a new basis row via a rank-one update of `B'B`.
pub fn basis_terms(basis: &ProjectionBasis, b: &DVector<f64>, f: &DVector<f64>) -> (f64, f64) {
    let coef = basis.coefficients(f);
    let ab = basis.gram().solve(b);
    let q = b.dot(&ab);
    (b.dot(&coef) / (1.0 + q), q / (1.0 + q))
}

/// Predictive mean and variance of `f(x_new)` by explicit construction of the
/// augmented kernel, augmented projection and joint Gaussian conditioning.
///
/// `jitter` is added to the augmented kernel diagonal. With `tau2 = None` the
/// kernel is the plain Gaussian kernel.
pub fn gp_predict(
    x: &DMatrix<f64>,
    basis: &ProjectionBasis,
    f: &DVector<f64>,
    hyper: KernelHyper,
    tau2: Option<f64>,
    jitter: f64,
    x_new: &[f64],
) -> Result<(f64, f64)> {
    let (t, k) = x.shape();
    if x_new.len() != k || f.len() != t {
        return Err(Error::Dimension(format!(
            "training has {t} rows and {k} predictors, got {} function values and a {}-vector",
            f.len(),
            x_new.len()
        )));
    }
    let mut xa = x.clone().insert_row(t, 0.0);
    for c in 0..k {
        xa[(t, c)] = x_new[c];
    }
    let mut ka = gaussian_kernel_matrix(&xa, hyper);
    for i in 0..=t {
        ka[(i, i)] += jitter;
    }
    let k1 = match tau2 {
        None => ka,
        Some(t2) => {
            let row = basis.row_for(x_new);
            let mut ba = basis.basis().clone().insert_row(t, 0.0);
            for c in 0..ba.ncols() {
                ba[(t, c)] = row[c];
            }
            let g = (ba.transpose() * &ba)
                .try_inverse()
                .ok_or(Error::RankDeficient {
                    rank: 0,
                    cols: ba.ncols(),
                })?;
            let mut phi0 = &ba * g * ba.transpose();
            symmetrize(&mut phi0);
            let pm = ProjectionMatrix {
                phi0,
                basis_rank: ba.ncols(),
            };
            subspace_kernel(&ka, &pm, t2)?
        }
    };
    let ktt = k1.view((0, 0), (t, t)).clone_owned();
    let kn = k1.view((0, t), (t, 1)).column(0).clone_owned();
    let scale = (0..t).map(|i| ktt[(i, i)]).fold(0.0, f64::max);
    let c = chol_spd(&ktt, scale)?;
    let w = c.solve(&kn);
    Ok((w.dot(f), (k1[(t, t)] - w.dot(&kn)).max(0.0)))
}
