//! Random-walk Metropolis-Hastings with a step size tuned during burn-in.

use rand::Rng;
use rand_distr::StandardNormal;

/// Iterations between step-size adjustments.
pub const ADAPT_EVERY: usize = 50;
pub const TARGET_ACCEPT: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveStep {
    pub step: f64,
    adapting: bool,
    window_accepts: usize,
    window_len: usize,
    pub accepts: usize,
    pub proposals: usize,
}

impl AdaptiveStep {
    pub fn new(step: f64) -> Self {
        Self {
            step,
            adapting: true,
            window_accepts: 0,
            window_len: 0,
            accepts: 0,
            proposals: 0,
        }
    }

    /// Stops adaptation; later acceptance rates refer to the frozen step.
    pub fn freeze(&mut self) {
        self.adapting = false;
        self.accepts = 0;
        self.proposals = 0;
    }

    pub fn is_adapting(&self) -> bool {
        self.adapting
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepts as f64 / self.proposals as f64
        }
    }

    fn record(&mut self, accepted: bool) {
        self.proposals += 1;
        self.accepts += accepted as usize;
        if !self.adapting {
            return;
        }
        self.window_len += 1;
        self.window_accepts += accepted as usize;
        if self.window_len == ADAPT_EVERY {
            let rate = self.window_accepts as f64 / ADAPT_EVERY as f64;
            self.step = (self.step * (2.0 * (rate - TARGET_ACCEPT)).exp()).clamp(1e-4, 50.0);
            self.window_len = 0;
            self.window_accepts = 0;
        }
    }

    /// One joint Gaussian random-walk step on an unconstrained vector.
    ///
    /// `log_target` returns the log density (including any Jacobian) or `None`
    /// when the point cannot be evaluated, which counts as a rejection.
    pub fn step<R, F>(
        &mut self,
        current: &[f64],
        current_lp: f64,
        mut log_target: F,
        rng: &mut R,
    ) -> (Vec<f64>, f64, bool)
    where
        R: Rng + ?Sized,
        F: FnMut(&[f64]) -> Option<f64>,
    {
        let proposal: Vec<f64> = current
            .iter()
            .map(|v| v + self.step * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let accepted = match log_target(&proposal) {
            Some(lp) if lp.is_finite() => {
                let log_u = rng.random::<f64>().ln();
                if log_u < lp - current_lp {
                    Some(lp)
                } else {
                    None
                }
            }
            _ => None,
        };
        let out = match accepted {
            Some(lp) => (proposal, lp, true),
            None => (current.to_vec(), current_lp, false),
        };
        self.record(out.2);
        out
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_proposal_is_accepted() {
        let mut s = AdaptiveStep::new(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (_, _, acc) = s.step(&[0.3], -1.0, |_| Some(-1.0), &mut rng);
            assert!(acc);
        }
    }

    #[test]
    fn adaptation_reaches_target_band() {
        let mut s = AdaptiveStep::new(20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lp = |x: &[f64]| Some(-0.5 * x[0] * x[0]);
        let mut x = vec![0.0];
        let mut cur = 0.0;
        for _ in 0..5000 {
            let (nx, nl, _) = s.step(&x, cur, lp, &mut rng);
            x = nx;
            cur = nl;
        }
        s.freeze();
        for _ in 0..20_000 {
            let (nx, nl, _) = s.step(&x, cur, lp, &mut rng);
            x = nx;
            cur = nl;
        }
        let r = s.acceptance_rate();
        assert!((0.2..=0.5).contains(&r), "rate {r}");
    }

    #[test]
    fn logit_roundtrip() {
        for p in [1e-6, 0.3, 0.5, 0.99] {
            assert!((inv_logit(logit(p)) - p).abs() < 1e-12);
        }
    }
}
