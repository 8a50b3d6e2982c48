//! Dense symmetric helpers shared by the samplers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative jitter added to a kernel diagonal before the first factorization attempt.
pub const JITTER_START: f64 = 1e-8;
/// Largest relative jitter tried before giving up.
pub const JITTER_MAX: f64 = 1e-4;

pub type Chol = Cholesky<f64, Dyn>;

/// Factorizes a kernel matrix after adding `JITTER_START * scale` to its diagonal,
/// escalating the jitter tenfold up to `JITTER_MAX * scale`.
///
/// Returns the factor together with the absolute jitter that was used.
pub fn chol_kernel(m: &DMatrix<f64>, scale: f64) -> Result<(Chol, f64)> {
    let mut rel = JITTER_START;
    loop {
        let jitter = rel * scale;
        let mut a = m.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(a) {
            return Ok((c, jitter));
        }
        rel *= 10.0;
        if rel > JITTER_MAX * 1.000_001 {
            return Err(Error::SingularKernel { jitter });
        }
    }
}

/// Factorizes a matrix that should already be positive definite, falling back to
/// the kernel jitter schedule when rounding makes it indefinite.
pub fn chol_spd(m: &DMatrix<f64>, scale: f64) -> Result<Chol> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    chol_kernel(m, scale).map(|(c, _)| c)
}

pub fn chol_logdet(c: &Chol) -> f64 {
    let l = c.l_dirty();
    (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
}

/// Inverse of a lower-triangular matrix by column-oriented forward substitution.
pub fn lower_tri_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut x = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut col = vec![0.0; n];
        col[j] = 1.0;
        for k in j..n {
            let xk = col[k] / l[(k, k)];
            col[k] = xk;
            if xk != 0.0 {
                let lk = l.column(k);
                for i in (k + 1)..n {
                    col[i] -= lk[i] * xk;
                }
            }
        }
        x.column_mut(j).copy_from_slice(&col);
    }
    x
}

/// Inverse of `L L'` given the Cholesky factor.
pub fn chol_inverse(c: &Chol) -> DMatrix<f64> {
    let linv = lower_tri_inverse(&c.l());
    let mut inv = linv.transpose() * &linv;
    symmetrize(&mut inv);
    inv
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower(c: &Chol, b: &DVector<f64>) -> DVector<f64> {
    let mut x = b.clone();
    c.l_dirty().solve_lower_triangular_mut(&mut x);
    x
}

/// Solves `L' x = b` for the Cholesky factor `L`.
pub fn solve_upper_t(c: &Chol, b: &DVector<f64>) -> DVector<f64> {
    let mut x = b.clone();
    c.l_dirty().tr_solve_lower_triangular_mut(&mut x);
    x
}

/// Returns `L z` where `L` is the lower Cholesky factor.
pub fn mul_lower(c: &Chol, z: &DVector<f64>) -> DVector<f64> {
    let l = c.l_dirty();
    let n = z.len();
    let mut out = DVector::zeros(n);
    for k in 0..n {
        let zk = z[k];
        if zk == 0.0 {
            continue;
        }
        for i in k..n {
            out[i] += l[(i, k)] * zk;
        }
    }
    out
}

/// Vector of independent standard normal draws.
pub fn standard_normals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
        a.transpose() * &a + DMatrix::identity(n, n) * n as f64
    }

    #[test]
    fn triangular_inverse_matches_solve() {
        let m = spd(9);
        let c = Cholesky::new(m.clone()).unwrap();
        let inv = chol_inverse(&c);
        let eye = &m * &inv;
        assert!((eye - DMatrix::identity(9, 9)).abs().max() < 1e-12);
    }

    #[test]
    fn jitter_escalates_on_singular_input() {
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let m = &v * v.transpose();
        let (c, jitter) = chol_kernel(&m, 1.0).unwrap();
        assert!(jitter >= JITTER_START);
        assert!(chol_logdet(&c).is_finite());
    }

    #[test]
    fn negative_definite_fails() {
        let m = -DMatrix::<f64>::identity(3, 3);
        assert!(matches!(
            chol_kernel(&m, 1.0),
            Err(Error::SingularKernel { .. })
        ));
    }

    #[test]
    fn lower_multiply_and_solves_roundtrip() {
        let m = spd(6);
        let c = Cholesky::new(m).unwrap();
        let z = DVector::from_fn(6, |i, _| i as f64 - 2.5);
        let lz = mul_lower(&c, &z);
        let back = solve_lower(&c, &lz);
        assert!((back - &z).amax() < 1e-12);
        let lt = c.l().transpose() * &z;
        assert!((solve_upper_t(&c, &lt) - z).amax() < 1e-12);
    }
}
