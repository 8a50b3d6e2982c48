//! A deterministic quarterly panel that mimics the shape of a FRED-QD extract:
//! price indices with persistent inflation, activity and financial series driven
//! by two common factors, and an expectations column.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::panel::{Membership, SeriesPanel};
use crate::data::quarter::Quarter;

/// Series flagged for the moderate dataset, with transformation codes.
pub const MODERATE_SERIES: [(&str, u8); 29] = [
    ("INFEXP", 1),
    ("GDPC1", 5),
    ("PCECC96", 5),
    ("FPIx", 5),
    ("GCEC1", 5),
    ("INDPRO", 5),
    ("CUMFNS", 1),
    ("PAYEMS", 5),
    ("CE16OV", 5),
    ("UNRATE", 2),
    ("AWHMAN", 1),
    ("CES0600000007", 2),
    ("CLAIMSx", 5),
    ("GDPCTPI", 6),
    ("CPIAUCSL", 6),
    ("PPIACO", 6),
    ("WPSID61", 6),
    ("WPSID62", 6),
    ("COMPRNFB", 5),
    ("ULCNFB", 5),
    ("CES0600000008", 6),
    ("FEDFUNDS", 2),
    ("BAA10YM", 1),
    ("GS10TB3Mx", 1),
    ("CPF3MTB3Mx", 1),
    ("M2REAL", 5),
    ("BUSLOANSx", 5),
    ("CONSUMERx", 5),
    ("S.P.500", 5),
];

/// Extra series only in the large dataset.
pub const LARGE_ONLY_SERIES: [(&str, u8); 8] = [
    ("PCDGx", 5),
    ("PCESVx", 5),
    ("CPILFESL", 6),
    ("TB3MS", 2),
    ("GS5", 2),
    ("OILPRICEx", 6),
    ("USGOOD", 5),
    ("TOTRESNS", 7),
];

pub const SYNTHETIC_TARGET: &str = "CPIAUCSL";
pub const SYNTHETIC_CORE_TARGET: &str = "CPILFESL";

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub start: Quarter,
    pub len: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            start: Quarter::new(1971, 1).unwrap(),
            len: 200,
            seed: 20_220_301,
        }
    }
}

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn z(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    fn ar1(&mut self, n: usize, rho: f64, sd: f64) -> Vec<f64> {
        let mut x = vec![0.0; n];
        x[0] = sd / (1.0 - rho * rho).sqrt() * self.z();
        for t in 1..n {
            x[t] = rho * x[t - 1] + sd * self.z();
        }
        x
    }
}

fn cumulate(start: f64, steps: &[f64]) -> Vec<f64> {
    let mut acc = start;
    steps
        .iter()
        .map(|s| {
            acc += s;
            acc
        })
        .collect()
}

/// Builds a raw series whose transformation by `code` is roughly `level + scale * s_t`.
fn from_stationary(code: u8, s: &[f64], level: f64, scale: f64) -> Vec<f64> {
    let steps: Vec<f64> = s.iter().map(|v| level + scale * v).collect();
    match code {
        1 => steps,
        2 => cumulate(0.0, &steps),
        4 => steps.iter().map(|v| v.exp()).collect(),
        5 => cumulate(4.6, &steps).iter().map(|v| v.exp()).collect(),
        3 => cumulate(0.0, &cumulate(0.0, &steps)),
        6 => cumulate(4.6, &cumulate(0.005, &steps))
            .iter()
            .map(|v| v.exp())
            .collect(),
        7 => {
            let mut x = 100.0;
            cumulate(0.01, &steps)
                .iter()
                .map(|g| {
                    x *= 1.0 + g.clamp(-0.5, 0.5);
                    x
                })
                .collect()
        }
        _ => unreachable!("codes are validated by the panel"),
    }
}

/// Generates the synthetic panel. The same config always yields the same panel.
pub fn synthetic_panel(cfg: &SyntheticConfig) -> SeriesPanel {
    let n = cfg.len;
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let activity = g.ar1(n, 0.8, 0.6);
    let pressure = g.ar1(n, 0.85, 0.5);
    let logvol = g.ar1(n, 0.95, 0.2);

    // quarterly annualized inflation with a slow-moving level and stochastic volatility
    let level = g.ar1(n, 0.98, 0.15);
    let mut infl = vec![3.0; n];
    for t in 1..n {
        let gap = infl[t - 1] - 3.0 - level[t];
        let signal = 0.8 * pressure[t] + 0.4 * activity[t - 1]
            - 0.3 * (activity[t - 1] * pressure[t]).tanh();
        infl[t] = 3.0 + level[t] + 0.55 * gap + signal + 0.9 * (logvol[t] / 2.0).exp() * g.z();
    }
    let core: Vec<f64> = (0..n).map(|t| 0.7 * infl[t] + 0.9 + 0.4 * g.z()).collect();

    let price = |q: &[f64]| -> Vec<f64> {
        let mut p = 100.0_f64;
        q.iter()
            .map(|v| {
                p *= (v / 400.0).exp();
                p
            })
            .collect()
    };

    let mut names = Vec::new();
    let mut values = Vec::new();
    let mut tcodes = Vec::new();
    let mut membership = Vec::new();

    let all = MODERATE_SERIES
        .iter()
        .map(|s| (s, true))
        .chain(LARGE_ONLY_SERIES.iter().map(|s| (s, false)));
    for (i, (&(name, code), moderate)) in all.enumerate() {
        let series = match name {
            "CPIAUCSL" => price(&infl),
            "CPILFESL" => price(&core),
            "INFEXP" => {
                let mut smooth = infl[0];
                infl.iter()
                    .map(|v| {
                        smooth = 0.9 * smooth + 0.1 * v;
                        smooth + 0.2 * g.z()
                    })
                    .collect()
            }
            _ => {
                let a = ((i * 37 % 11) as f64 - 5.0) / 5.0;
                let b = ((i * 53 % 7) as f64 - 3.0) / 3.0;
                let idio = g.ar1(n, 0.3, 0.6);
                let s: Vec<f64> = (0..n)
                    .map(|t| a * activity[t] + b * pressure[t] + idio[t])
                    .collect();
                match code {
                    1 => from_stationary(1, &s, 5.0 + i as f64 * 0.1, 1.0),
                    2 => from_stationary(2, &s, 0.0, 0.3),
                    5 => from_stationary(5, &s, 0.006, 0.01),
                    6 => from_stationary(6, &s, 0.0, 0.002),
                    7 => from_stationary(7, &s, 0.0, 0.003),
                    c => from_stationary(c, &s, 0.0, 0.01),
                }
            }
        };
        names.push(name.to_string());
        values.push(series);
        tcodes.push(code);
        membership.push(Membership {
            moderate,
            large: true,
        });
    }

    let dates = (0..n).map(|t| cfg.start.add(t as i64)).collect();
    SeriesPanel::new(dates, names, values, tcodes, membership)
        .expect("synthetic panel satisfies the panel invariants")
}
