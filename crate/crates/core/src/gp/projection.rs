use nalgebra::{Cholesky, DMatrix, DVector};

use crate::data::pca::{principal_components, Pca};
use crate::error::{Error, Result};
use crate::linalg::Chol;

/// Number of principal components used when predictors outnumber observations.
pub const PC_BASIS_SIZE: usize = 6;

const RANK_TOL: f64 = 1e-8;

/// Projection matrix onto a linear basis together with its effective rank.
#[derive(Debug, Clone)]
pub struct ProjectionMatrix {
    pub phi0: DMatrix<f64>,
    pub basis_rank: usize,
}

/// Basis of the linear subspace the shrinkage kernel pulls towards.
#[derive(Debug, Clone)]
pub struct ProjectionBasis {
    basis: DMatrix<f64>,
    gram: Chol,
    pca: Option<Pca>,
}

impl ProjectionBasis {
    /// Uses `x` itself when it has fewer columns than rows, otherwise its leading
    /// principal-component scores.
    pub fn new(x: &DMatrix<f64>) -> Result<Self> {
        let (t, k) = x.shape();
        if k < t {
            Self::from_basis(x.clone(), None)
        } else {
            let r = PC_BASIS_SIZE.min(t.saturating_sub(1)).max(1);
            let pca = principal_components(x, r)?;
            Self::from_basis(pca.scores.clone(), Some(pca))
        }
    }

    fn from_basis(basis: DMatrix<f64>, pca: Option<Pca>) -> Result<Self> {
        let cols = basis.ncols();
        let sv = basis.clone().svd(false, false).singular_values;
        let smax = sv.max();
        let rank = sv.iter().filter(|s| **s > smax * RANK_TOL).count();
        if smax <= 0.0 || rank < cols {
            return Err(Error::RankDeficient { rank, cols });
        }
        let gram =
            Cholesky::new(basis.transpose() * &basis).ok_or(Error::RankDeficient { rank, cols })?;
        Ok(Self { basis, gram, pca })
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn uses_components(&self) -> bool {
        self.pca.is_some()
    }

    /// Least-squares coefficients `(B'B)^{-1} B' v`.
    pub fn coefficients(&self, v: &DVector<f64>) -> DVector<f64> {
        self.gram.solve(&(self.basis.transpose() * v))
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.basis * self.coefficients(v)
    }

    /// `v' (I - Phi0) v`, clamped at zero.
    pub fn residual_quad(&self, v: &DVector<f64>) -> f64 {
        let c = self.basis.transpose() * v;
        let fitted = c.dot(&self.gram.solve(&c));
        (v.norm_squared() - fitted).max(0.0)
    }

    pub fn phi0(&self) -> DMatrix<f64> {
        let g = self.gram.inverse();
        let mut p = &self.basis * g * self.basis.transpose();
        crate::linalg::symmetrize(&mut p);
        p
    }

    /// Basis row for a new predictor vector (projected on the training loadings
    /// when the basis is made of principal components).
    pub fn row_for(&self, x_new: &[f64]) -> DVector<f64> {
        match &self.pca {
            Some(p) => DVector::from_vec(p.project(x_new)),
            None => DVector::from_column_slice(x_new),
        }
    }

    pub fn gram(&self) -> &Chol {
        &self.gram
    }
}

pub fn projection_matrix(x: &DMatrix<f64>) -> Result<ProjectionMatrix> {
    let b = ProjectionBasis::new(x)?;
    Ok(ProjectionMatrix {
        phi0: b.phi0(),
        basis_rank: b.rank(),
    })
}
