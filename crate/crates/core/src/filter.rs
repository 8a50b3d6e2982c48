//! Scalar linear Gaussian state space: filtering, smoothing and backward sampling.
//!
//! State `x_t = c + a x_{t-1} + w_t`, `w_t ~ N(0, q)`, with `x_1 ~ N(m0, p0)`;
//! observation `z_t = x_t + v_t`, `v_t ~ N(0, r_t)`. An infinite `r_t` marks a
//! missing observation.

use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy)]
pub struct StateDynamics {
    pub c: f64,
    pub a: f64,
    pub q: f64,
    pub m0: f64,
    pub p0: f64,
}

/// Filtered means and variances.
pub fn kalman_filter(dyn_: &StateDynamics, z: &[f64], r: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = z.len();
    let mut m = vec![0.0; n];
    let mut p = vec![0.0; n];
    let (mut mp, mut pp) = (dyn_.m0, dyn_.p0);
    for t in 0..n {
        if t > 0 {
            mp = dyn_.c + dyn_.a * m[t - 1];
            pp = dyn_.a * dyn_.a * p[t - 1] + dyn_.q;
        }
        if r[t].is_finite() {
            let s = pp + r[t];
            let k = pp / s;
            m[t] = mp + k * (z[t] - mp);
            p[t] = (1.0 - k) * pp;
        } else {
            m[t] = mp;
            p[t] = pp;
        }
    }
    (m, p)
}

/// Backward pass driven by the supplied standard normals. Zero normals return the
/// smoothed means.
pub fn backward_pass(dyn_: &StateDynamics, m: &[f64], p: &[f64], normals: &[f64]) -> Vec<f64> {
    let n = m.len();
    let mut x = vec![0.0; n];
    if n == 0 {
        return x;
    }
    x[n - 1] = m[n - 1] + p[n - 1].max(0.0).sqrt() * normals[n - 1];
    for t in (0..n - 1).rev() {
        let pred = dyn_.a * dyn_.a * p[t] + dyn_.q;
        let (mean, var) = if pred > 0.0 {
            let j = p[t] * dyn_.a / pred;
            (
                m[t] + j * (x[t + 1] - dyn_.c - dyn_.a * m[t]),
                p[t] - j * dyn_.a * p[t],
            )
        } else {
            (m[t], p[t])
        };
        x[t] = mean + var.max(0.0).sqrt() * normals[t];
    }
    x
}

/// Forward-filter backward-sample draw of the whole state path.
pub fn ffbs<R: Rng + ?Sized>(dyn_: &StateDynamics, z: &[f64], r: &[f64], rng: &mut R) -> Vec<f64> {
    let (m, p) = kalman_filter(dyn_, z, r);
    let normals: Vec<f64> = (0..z.len()).map(|_| rng.sample(StandardNormal)).collect();
    backward_pass(dyn_, &m, &p, &normals)
}

/// Rauch-Tung-Striebel smoothed means and variances.
pub fn smooth(dyn_: &StateDynamics, z: &[f64], r: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (m, p) = kalman_filter(dyn_, z, r);
    let n = m.len();
    let mut ms = m.clone();
    let mut ps = p.clone();
    for t in (0..n.saturating_sub(1)).rev() {
        let pred = dyn_.a * dyn_.a * p[t] + dyn_.q;
        if pred > 0.0 {
            let j = p[t] * dyn_.a / pred;
            ms[t] = m[t] + j * (ms[t + 1] - dyn_.c - dyn_.a * m[t]);
            ps[t] = p[t] + j * j * (ps[t + 1] - pred);
        }
    }
    (ms, ps)
}
