use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Leading principal components of a standardized predictor matrix.
#[derive(Debug, Clone)]
pub struct Pca {
    /// T × r scores
    pub scores: DMatrix<f64>,
    /// K × r eigenvectors of `X'X`, each with its largest-magnitude entry positive
    pub loadings: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// share of total variance carried by each retained component
    pub explained: Vec<f64>,
}

impl Pca {
    /// Scores of a new predictor row on the fitted loadings.
    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        (0..self.loadings.ncols())
            .map(|c| {
                self.loadings
                    .column(c)
                    .iter()
                    .zip(row)
                    .map(|(l, x)| l * x)
                    .sum()
            })
            .collect()
    }
}

pub fn principal_components(x: &DMatrix<f64>, r: usize) -> Result<Pca> {
    let (t, k) = x.shape();
    if r == 0 || r > t.min(k) {
        return Err(Error::Dimension(format!(
            "cannot extract {r} components from a {t}x{k} matrix"
        )));
    }
    let gram = x.transpose() * x;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();

    let mut loadings = DMatrix::zeros(k, r);
    let mut eigenvalues = Vec::with_capacity(r);
    for (c, &j) in order.iter().take(r).enumerate() {
        let mut v = eig.eigenvectors.column(j).clone_owned();
        let imax = v.iter().enumerate().fold(
            0,
            |best, (i, x)| {
                if x.abs() > v[best].abs() {
                    i
                } else {
                    best
                }
            },
        );
        if v[imax] < 0.0 {
            v.neg_mut();
        }
        loadings.set_column(c, &v);
        eigenvalues.push(eig.eigenvalues[j].max(0.0));
    }
    let explained = eigenvalues
        .iter()
        .map(|e| if total > 0.0 { e / total } else { 0.0 })
        .collect();
    Ok(Pca {
        scores: x * &loadings,
        loadings,
        eigenvalues,
        explained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn projector(b: &DMatrix<f64>) -> DMatrix<f64> {
        let g = (b.transpose() * b).try_inverse().unwrap();
        b * g * b.transpose()
    }

    #[test]
    fn rank_one_explains_everything() {
        let u = DMatrix::from_fn(12, 1, |i, _| i as f64 - 5.5);
        let v = DMatrix::from_row_slice(1, 4, &[1.0, -2.0, 0.5, 3.0]);
        let pca = principal_components(&(u * v), 1).unwrap();
        assert!((pca.explained[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_rank_spans_same_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(15, 4, |_, _| rng.random::<f64>() - 0.5);
        let q = x.clone().qr().q();
        let pca = principal_components(&q, 4).unwrap();
        assert!((projector(&pca.scores) - projector(&q)).amax() < 1e-10);
    }

    #[test]
    fn scores_orthogonal_and_match_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(30, 8, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let pca = principal_components(&x, 3).unwrap();
        let s = &pca.scores;
        let g = s.transpose() * s;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(g[(i, j)].abs() < 1e-10);
                }
            }
        }
        // oracle: power iteration with deflation on X'X
        let mut a = x.transpose() * &x;
        for c in 0..3 {
            let mut v = nalgebra::DVector::from_element(8, 1.0);
            for _ in 0..5000 {
                v = &a * &v;
                v /= v.norm();
            }
            let lam = (v.transpose() * &a * &v)[(0, 0)];
            assert!((lam - pca.eigenvalues[c]).abs() < 1e-8 * lam);
            let dot = v.dot(&pca.loadings.column(c));
            assert!((dot.abs() - 1.0).abs() < 1e-8);
            a -= lam * &v * v.transpose();
        }
        assert!(pca.explained.iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn sign_convention_and_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(20, 5, |_, _| rng.random::<f64>());
        let pca = principal_components(&x, 2).unwrap();
        for c in 0..2 {
            let col = pca.loadings.column(c);
            let m = col
                .iter()
                .fold(0.0_f64, |a, v| if v.abs() > a.abs() { *v } else { a });
            assert!(m > 0.0);
        }
        let row: Vec<f64> = x.row(7).iter().copied().collect();
        let p = pca.project(&row);
        assert!((p[0] - pca.scores[(7, 0)]).abs() < 1e-12);
        assert!(principal_components(&x, 6).is_err());
    }
}
