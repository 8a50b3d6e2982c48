use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Amplitude and inverse bandwidth of the Gaussian kernel, both in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelHyper {
    pub xi: f64,
    pub phi: f64,
}

impl Default for KernelHyper {
    fn default() -> Self {
        Self { xi: 0.5, phi: 0.5 }
    }
}

/// Pairwise squared Euclidean distances between the rows of `x`.
pub fn squared_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut d = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in (j + 1)..n {
            let mut s = 0.0;
            for c in 0..x.ncols() {
                let v = x[(i, c)] - x[(j, c)];
                s += v * v;
            }
            d[(i, j)] = s;
            d[(j, i)] = s;
        }
    }
    d
}

/// Squared distances from `row` to every row of `x`.
pub fn squared_distances_to(x: &DMatrix<f64>, row: &[f64]) -> DVector<f64> {
    DVector::from_fn(x.nrows(), |i, _| {
        row.iter()
            .enumerate()
            .map(|(c, v)| {
                let d = x[(i, c)] - v;
                d * d
            })
            .sum()
    })
}

pub fn kernel_from_distances(d: &DMatrix<f64>, hyper: KernelHyper) -> DMatrix<f64> {
    let half = -0.5 * hyper.phi;
    d.map(|v| hyper.xi * (half * v).exp())
}

pub fn kernel_vector(d: &DVector<f64>, hyper: KernelHyper) -> DVector<f64> {
    let half = -0.5 * hyper.phi;
    d.map(|v| hyper.xi * (half * v).exp())
}

/// `K[t, s] = xi * exp(-phi/2 * ||x_t - x_s||^2)`.
pub fn gaussian_kernel_matrix(x: &DMatrix<f64>, hyper: KernelHyper) -> DMatrix<f64> {
    kernel_from_distances(&squared_distances(x), hyper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    #[test]
    fn diagonal_and_unit_distance() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let k = gaussian_kernel_matrix(&x, KernelHyper { xi: 1.0, phi: 2.0 });
        assert!((k[(0, 1)] - (-1.0f64).exp()).abs() < 1e-15);
        let k = gaussian_kernel_matrix(&x, KernelHyper { xi: 0.5, phi: 0.3 });
        assert_eq!(k[(0, 0)], 0.5);
    }

    #[test]
    fn zero_bandwidth_is_constant() {
        let x = DMatrix::from_fn(5, 2, |i, j| (i * 2 + j) as f64);
        let k = gaussian_kernel_matrix(&x, KernelHyper { xi: 0.7, phi: 0.0 });
        assert!(k.iter().all(|v| *v == 0.7));
    }

    proptest! {
        #[test]
        fn symmetric_psd(
            vals in proptest::collection::vec(-3.0f64..3.0, 24),
            xi in 0.01f64..0.99,
            phi in 0.01f64..0.99,
        ) {
            let x = DMatrix::from_row_slice(8, 3, &vals);
            let k = gaussian_kernel_matrix(&x, KernelHyper { xi, phi });
            prop_assert_eq!(&k, &k.transpose());
            let min = SymmetricEigen::new(k).eigenvalues.min();
            prop_assert!(min >= -1e-8 * xi);
        }
    }
}
