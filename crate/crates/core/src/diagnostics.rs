//! Convergence diagnostics for MCMC traces.

use log::warn;

/// Parzen lag window on `[0, 1]`.
fn parzen(x: f64) -> f64 {
    if x <= 0.5 {
        1.0 - 6.0 * x * x + 6.0 * x * x * x
    } else if x <= 1.0 {
        2.0 * (1.0 - x).powi(3)
    } else {
        0.0
    }
}

/// Share of the trace length used as the lag-window bandwidth.
pub const BANDWIDTH_SHARE: f64 = 0.04;

/// `1 + 2 sum_k w(k/B) rho_k` with a Parzen window of bandwidth `B = 4%` of the length.
///
/// A constant trace has no autocorrelation structure and returns 1.
pub fn inefficiency_factor(trace: &[f64]) -> f64 {
    let n = trace.len();
    if n < 2 {
        return 1.0;
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = trace.iter().map(|x| x - mean).collect();
    let c0 = dev.iter().map(|d| d * d).sum::<f64>() / n as f64;
    if !(c0 > 1e-300) {
        warn!("constant trace; inefficiency factor set to 1");
        return 1.0;
    }
    let bw = ((BANDWIDTH_SHARE * n as f64).round() as usize).clamp(1, n - 1);
    let mut s = 0.0;
    for k in 1..=bw {
        let ck = dev[..n - k]
            .iter()
            .zip(&dev[k..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64;
        s += parzen(k as f64 / bw as f64) * ck / c0;
    }
    (1.0 + 2.0 * s).max(f64::MIN_POSITIVE)
}

/// Monte Carlo standard error of the trace mean accounting for autocorrelation.
pub fn mc_standard_error(trace: &[f64]) -> f64 {
    let n = trace.len() as f64;
    let m = trace.iter().sum::<f64>() / n;
    let var = trace.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (var * inefficiency_factor(trace) / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn white_noise_is_efficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        // each sample autocorrelation has sd 1/sqrt(n) and sum w(k/B)^2 ~ 0.27 B
        let bw = BANDWIDTH_SHARE * n as f64;
        let sd = 2.0 * (0.27 * bw / n as f64).sqrt();
        let f = inefficiency_factor(&x);
        assert!((f - 1.0).abs() < 3.0 * sd, "{f}");
    }

    #[test]
    fn ar1_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = 0.9;
        let mut x = vec![0.0; 10_000];
        for t in 1..x.len() {
            x[t] = rho * x[t - 1] + rng.sample::<f64, _>(StandardNormal);
        }
        let f = inefficiency_factor(&x);
        assert!((f / 19.0 - 1.0).abs() < 0.2, "{f}");
    }

    #[test]
    fn constant_trace_is_one() {
        assert_eq!(inefficiency_factor(&[2.0; 500]), 1.0);
    }
}
