//! Sparse linear summaries of predictive quantile paths: LASSO by cyclic
//! coordinate descent on `sum_t (q_t - b'x_t)^2 + lambda sum_j |b_j|`, with the
//! penalty chosen by time-blocked cross-validation.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::{Quarter, Standardizer};
use crate::engine::{PredictiveDraws, P_GRID};
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 100_000;
pub const TOLERANCE: f64 = 1e-8;
pub const DEFAULT_FOLDS: usize = 5;
pub const DISPLAY_FLOOR: f64 = 1e-3;

/// Predictive quantile paths of one model over a run of origins.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantilePathSet {
    pub dates: Vec<Quarter>,
    /// origins x probabilities in [`P_GRID`]
    pub q: DMatrix<f64>,
}

impl QuantilePathSet {
    pub fn new(dates: Vec<Quarter>, q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != dates.len() || q.ncols() != P_GRID.len() {
            return Err(Error::Dimension(format!(
                "quantile paths are {}x{}, expected {}x{}",
                q.nrows(),
                q.ncols(),
                dates.len(),
                P_GRID.len()
            )));
        }
        for (i, d) in dates.iter().enumerate() {
            if (1..q.ncols()).any(|j| q[(i, j)] < q[(i, j - 1)]) {
                return Err(Error::Config(format!(
                    "quantiles at {d} are not monotone in p"
                )));
            }
        }
        Ok(Self { dates, q })
    }

    pub fn from_forecasts(forecasts: &[PredictiveDraws]) -> Result<Self> {
        let q = DMatrix::from_fn(forecasts.len(), P_GRID.len(), |i, j| {
            forecasts[i].quantiles[j]
        });
        Self::new(forecasts.iter().map(|f| f.origin).collect(), q)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.q.column(j).iter().copied().collect()
    }
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Smallest penalty at which every coefficient is zero: `2 max_j |x_j' q|`.
pub fn lambda_max(q: &[f64], x: &DMatrix<f64>) -> f64 {
    let qv = DVector::from_column_slice(q);
    (x.transpose() * qv).amax() * 2.0
}

/// Coordinate descent from `start`; `q` and the columns of `x` are taken as
/// already centered.
pub fn lasso_fit_from(q: &[f64], x: &DMatrix<f64>, lambda: f64, start: &[f64]) -> Result<Vec<f64>> {
    let (n, k) = x.shape();
    if q.len() != n || start.len() != k {
        return Err(Error::Dimension(format!(
            "lasso with {} outcomes, {n}x{k} design and {} starting coefficients",
            q.len(),
            start.len()
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!(
            "penalty must be non-negative, got {lambda}"
        )));
    }
    let norms: Vec<f64> = (0..k).map(|j| x.column(j).norm_squared()).collect();
    let mut beta = start.to_vec();
    let mut resid = DVector::from_column_slice(q) - x * DVector::from_column_slice(&beta);
    let mut max_change = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        max_change = 0.0;
        for j in 0..k {
            if norms[j] == 0.0 {
                beta[j] = 0.0;
                continue;
            }
            let col = x.column(j);
            let rho = col.dot(&resid) + norms[j] * beta[j];
            let new = soft_threshold(rho, lambda / 2.0) / norms[j];
            let delta = new - beta[j];
            if delta != 0.0 {
                resid.axpy(-delta, &col, 1.0);
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < TOLERANCE {
            return Ok(beta);
        }
    }
    Err(Error::NoConvergence {
        sweeps: MAX_SWEEPS,
        max_change,
        residual_norm: resid.norm(),
    })
}

pub fn lasso_fit(q: &[f64], x: &DMatrix<f64>, lambda: f64) -> Result<Vec<f64>> {
    lasso_fit_from(q, x, lambda, &vec![0.0; x.ncols()])
}

/// Largest violation of the optimality conditions: `2 x_j' r = lambda sign(b_j)`
/// on the support and `|2 x_j' r| <= lambda` off it.
pub fn kkt_violation(q: &[f64], x: &DMatrix<f64>, beta: &[f64], lambda: f64) -> f64 {
    let resid = DVector::from_column_slice(q) - x * DVector::from_column_slice(beta);
    (0..x.ncols())
        .map(|j| {
            let g = 2.0 * x.column(j).dot(&resid);
            if beta[j] != 0.0 {
                (g - lambda * beta[j].signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Log-spaced grid from `lambda_max` down to `lambda_max * ratio`.
pub fn lambda_grid(q: &[f64], x: &DMatrix<f64>, n: usize, ratio: f64) -> Vec<f64> {
    let top = lambda_max(q, x).max(f64::MIN_POSITIVE);
    (0..n)
        .map(|i| top * ratio.powf(i as f64 / (n.max(2) - 1) as f64))
        .collect()
}

fn centered(
    q: &[f64],
    x: &DMatrix<f64>,
    rows: &[usize],
) -> (Vec<f64>, DMatrix<f64>, f64, Vec<f64>) {
    let m = rows.len() as f64;
    let qm = rows.iter().map(|&i| q[i]).sum::<f64>() / m;
    let xm: Vec<f64> = (0..x.ncols())
        .map(|j| rows.iter().map(|&i| x[(i, j)]).sum::<f64>() / m)
        .collect();
    let qc = rows.iter().map(|&i| q[i] - qm).collect();
    let xc = DMatrix::from_fn(rows.len(), x.ncols(), |r, j| x[(rows[r], j)] - xm[j]);
    (qc, xc, qm, xm)
}

/// Cross-validation outcome: mean held-out squared error per grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub lambda: f64,
    pub grid: Vec<f64>,
    pub errors: Vec<f64>,
}

/// Contiguous time blocks as folds; each training set is centered on its own
/// means, so the intercept stays unpenalized. Folds whose training targets are
/// constant are skipped.
pub fn cross_validate(q: &[f64], x: &DMatrix<f64>, grid: &[f64], folds: usize) -> Result<CvResult> {
    let n = q.len();
    if folds < 2 || folds > n {
        return Err(Error::Config(format!(
            "cross-validation needs 2..={n} folds, got {folds}"
        )));
    }
    if grid.is_empty() {
        return Err(Error::Config("empty penalty grid".into()));
    }
    let mut sse = vec![0.0; grid.len()];
    let mut count = 0usize;
    for f in 0..folds {
        let (lo, hi) = (f * n / folds, (f + 1) * n / folds);
        let train: Vec<usize> = (0..n).filter(|i| *i < lo || *i >= hi).collect();
        let (qc, xc, qm, xm) = centered(q, x, &train);
        if qc.iter().all(|v| v.abs() < 1e-12) {
            warn!("fold {f} has a constant training target; skipped");
            continue;
        }
        let mut beta = vec![0.0; x.ncols()];
        for (g, &lambda) in grid.iter().enumerate() {
            beta = lasso_fit_from(&qc, &xc, lambda, &beta)?;
            for i in lo..hi {
                let pred = qm
                    + (0..x.ncols())
                        .map(|j| (x[(i, j)] - xm[j]) * beta[j])
                        .sum::<f64>();
                sse[g] += (q[i] - pred).powi(2);
            }
        }
        count += hi - lo;
    }
    if count == 0 {
        return Err(Error::Config(
            "every cross-validation fold was degenerate".into(),
        ));
    }
    let errors: Vec<f64> = sse.iter().map(|s| s / count as f64).collect();
    let best = (0..grid.len())
        .min_by(|a, b| errors[*a].total_cmp(&errors[*b]))
        .expect("grid is non-empty");
    Ok(CvResult {
        lambda: grid[best],
        grid: grid.to_vec(),
        errors,
    })
}

/// `1 - SSR/SST` of the fit `mean(q) + x b` on centered `x`; `None` for constant `q`.
pub fn quantile_r2(q: &[f64], x: &DMatrix<f64>, beta: &[f64]) -> Option<f64> {
    let m = q.iter().sum::<f64>() / q.len() as f64;
    let sst: f64 = q.iter().map(|v| (v - m).powi(2)).sum();
    if sst <= 1e-300 {
        return None;
    }
    let fit = x * DVector::from_column_slice(beta);
    let ssr: f64 = q
        .iter()
        .zip(fit.iter())
        .map(|(v, f)| (v - m - f).powi(2))
        .sum();
    Some(1.0 - ssr / sst)
}

/// Fit for one quantile level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LassoFit {
    pub p: f64,
    /// coefficients on standardized predictors
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub r2: Option<f64>,
    pub support: Vec<usize>,
}

/// Standardizes `x` on the supplied rows, then for each quantile level selects
/// the penalty by cross-validation and refits on all rows. The grid spans
/// `lambda_max` down to 1e-4 of it, or 1e-2 when there are no more rows than
/// predictors.
pub fn summarize(
    paths: &QuantilePathSet,
    x: &DMatrix<f64>,
    folds: usize,
    grid_size: usize,
) -> Result<Vec<LassoFit>> {
    if x.nrows() != paths.dates.len() {
        return Err(Error::Dimension(format!(
            "{} predictor rows for {} quantile dates",
            x.nrows(),
            paths.dates.len()
        )));
    }
    let xs = Standardizer::fit(x).transform(x);
    // near-interpolating penalties are ill-posed with fewer rows than predictors
    let min_ratio = if x.nrows() <= x.ncols() { 1e-2 } else { 1e-4 };
    let mut fits = Vec::with_capacity(P_GRID.len());
    for (j, &p) in P_GRID.iter().enumerate() {
        let q = paths.column(j);
        let m = q.iter().sum::<f64>() / q.len() as f64;
        let qc: Vec<f64> = q.iter().map(|v| v - m).collect();
        let grid = lambda_grid(&qc, &xs, grid_size, min_ratio);
        let cv = cross_validate(&q, &xs, &grid, folds)?;
        let beta = lasso_fit(&qc, &xs, cv.lambda)?;
        fits.push(LassoFit {
            p,
            support: (0..beta.len()).filter(|&i| beta[i] != 0.0).collect(),
            r2: quantile_r2(&q, &xs, &beta),
            intercept: m,
            lambda: cv.lambda,
            beta,
        });
    }
    Ok(fits)
}

/// `(variable, p, coefficient)` for every coefficient at least `floor` in size.
pub fn heatmap_data(fits: &[LassoFit], names: &[String], floor: f64) -> Vec<(String, f64, f64)> {
    fits.iter()
        .flat_map(|f| {
            f.beta
                .iter()
                .enumerate()
                .filter(|(_, b)| b.abs() >= floor)
                .map(|(j, b)| (names[j].clone(), f.p, *b))
        })
        .collect()
}

pub fn write_heatmap_csv<W: std::io::Write>(rows: &[(String, f64, f64)], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["variable", "p", "coefficient"])?;
    for (v, p, b) in rows {
        wr.write_record([v.clone(), p.to_string(), b.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_r2_csv<W: std::io::Write>(fits: &[LassoFit], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["p", "r2", "lambda", "support_size"])?;
    for f in fits {
        wr.write_record([
            f.p.to_string(),
            f.r2.map_or_else(String::new, |v| v.to_string()),
            f.lambda.to_string(),
            f.support.len().to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
