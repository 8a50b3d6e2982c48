use rand::Rng;
use serde::Serialize;

use crate::data::Quarter;
use crate::engine::{PredictiveComponent, PredictiveDraws, P_GRID};
use crate::error::{Error, Result};
use crate::stats::{log_sum_exp, normal_logpdf};

/// Tick loss `(y - q)(p - 1{y <= q})`.
pub fn quantile_score(y: f64, q: f64, p: f64) -> f64 {
    let ind = if y <= q { 1.0 } else { 0.0 };
    (y - q) * (p - ind)
}

fn gaussian_log_density(y: f64, mean: f64, var: f64) -> f64 {
    if var > 0.0 {
        normal_logpdf(y, mean, var)
    } else if y == mean {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

/// Log density of one draw's Gaussian mixture at `y`.
pub fn component_log_density(c: &PredictiveComponent, y: f64) -> f64 {
    let e = &c.error;
    let total: f64 = e.weights.iter().sum();
    let terms: Vec<f64> = (0..e.weights.len())
        .filter(|&j| e.weights[j] > 0.0)
        .map(|j| {
            (e.weights[j] / total).ln()
                + gaussian_log_density(y, c.mean + e.offsets[j], c.var + e.vars[j])
        })
        .collect();
    log_sum_exp(&terms)
}

/// Log of the draw-averaged predictive density at `y`, evaluated analytically per
/// draw and combined in log space.
pub fn log_pred_likelihood(components: &[PredictiveComponent], y: f64) -> Result<f64> {
    if components.is_empty() {
        return Err(Error::Config(
            "log predictive likelihood needs at least one draw".into(),
        ));
    }
    let per_draw: Vec<f64> = components
        .iter()
        .map(|c| component_log_density(c, y))
        .collect();
    Ok(log_sum_exp(&per_draw) - (components.len() as f64).ln())
}

pub fn mse(errors: &[f64]) -> f64 {
    errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64
}

/// Probability integral transform of `y` under the empirical distribution of
/// `draws`, with ties broken uniformly at random.
pub fn pit<R: Rng + ?Sized>(draws: &[f64], y: f64, rng: &mut R) -> f64 {
    let n = draws.len() as f64;
    let below = draws.iter().filter(|d| **d < y).count() as f64;
    let ties = draws.iter().filter(|d| **d == y).count() as f64;
    let u = if ties > 0.0 { rng.random::<f64>() } else { 0.0 };
    (below + u * ties) / n
}

/// Per-origin scores of one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScorePanel {
    pub model: String,
    pub horizon: usize,
    pub origins: Vec<Quarter>,
    pub outcomes: Vec<f64>,
    pub point: Vec<f64>,
    pub sq_errors: Vec<f64>,
    pub lpl: Vec<f64>,
    /// one row per origin, one column per probability in [`P_GRID`]
    pub qs: Vec<Vec<f64>>,
    pub pits: Vec<f64>,
}

impl ScorePanel {
    /// Scores every forecast with a realized outcome; the rest are dropped.
    pub fn from_forecasts<R: Rng + ?Sized>(
        model: &str,
        forecasts: &[PredictiveDraws],
        rng: &mut R,
    ) -> Result<Self> {
        let horizon = forecasts.first().map_or(0, |f| f.horizon);
        let mut panel = Self {
            model: model.to_string(),
            horizon,
            origins: Vec::new(),
            outcomes: Vec::new(),
            point: Vec::new(),
            sq_errors: Vec::new(),
            lpl: Vec::new(),
            qs: Vec::new(),
            pits: Vec::new(),
        };
        for f in forecasts {
            let Some(y) = f.outcome else { continue };
            if f.horizon != horizon {
                return Err(Error::Alignment(format!(
                    "{model}: forecasts mix horizons {horizon} and {}",
                    f.horizon
                )));
            }
            if f.components.is_empty() {
                return Err(Error::Config(format!(
                    "{model} at {}: no predictive components to score",
                    f.origin
                )));
            }
            let lpl = log_pred_likelihood(&f.components, y)?;
            panel.origins.push(f.origin);
            panel.outcomes.push(y);
            panel.point.push(f.point);
            panel.sq_errors.push((y - f.point).powi(2));
            panel.lpl.push(lpl);
            panel.qs.push(
                P_GRID
                    .iter()
                    .zip(&f.quantiles)
                    .map(|(p, q)| quantile_score(y, *q, *p))
                    .collect(),
            );
            panel.pits.push(pit(&f.draws, y, rng));
        }
        Ok(panel)
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    /// Date of the outcome scored at row `i`.
    pub fn target_date(&self, i: usize) -> Quarter {
        self.origins[i].add(self.horizon as i64)
    }

    pub fn mse(&self) -> f64 {
        mse(&self
            .outcomes
            .iter()
            .zip(&self.point)
            .map(|(y, p)| y - p)
            .collect::<Vec<_>>())
    }

    pub fn mean_lpl(&self) -> f64 {
        crate::stats::mean(&self.lpl)
    }

    /// Rows whose origin is in `origins`, in the panel's order.
    pub fn restrict(&self, origins: &[Quarter]) -> Self {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| origins.contains(&self.origins[i]))
            .collect();
        let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            model: self.model.clone(),
            horizon: self.horizon,
            origins: keep.iter().map(|&i| self.origins[i]).collect(),
            outcomes: pick(&self.outcomes),
            point: pick(&self.point),
            sq_errors: pick(&self.sq_errors),
            lpl: pick(&self.lpl),
            qs: keep.iter().map(|&i| self.qs[i].clone()).collect(),
            pits: pick(&self.pits),
        }
    }

    /// Average quantile score per probability.
    pub fn mean_qs(&self) -> Vec<f64> {
        mean_qs_rows(self.qs.iter())
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec![
            "origin".to_string(),
            "target_date".into(),
            "outcome".into(),
            "point".into(),
            "sq_error".into(),
            "lpl".into(),
            "pit".into(),
        ];
        header.extend(P_GRID.iter().map(|p| format!("qs_{p}")));
        wr.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![
                self.origins[i].to_string(),
                self.target_date(i).to_string(),
                self.outcomes[i].to_string(),
                self.point[i].to_string(),
                self.sq_errors[i].to_string(),
                self.lpl[i].to_string(),
                self.pits[i].to_string(),
            ];
            row.extend(self.qs[i].iter().map(|v| v.to_string()));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub(crate) fn mean_qs_rows<'a, I: Iterator<Item = &'a Vec<f64>>>(rows: I) -> Vec<f64> {
    let mut sum = vec![0.0; P_GRID.len()];
    let mut n = 0usize;
    for r in rows {
        sum.iter_mut().zip(r).for_each(|(s, v)| *s += v);
        n += 1;
    }
    sum.iter().map(|s| s / n as f64).collect()
}
