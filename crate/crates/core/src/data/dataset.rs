//! Direct-forecast design matrices: target construction, predictor selection,
//! lag alignment and per-window standardization.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::panel::SeriesPanel;
use crate::data::quarter::Quarter;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetVariant {
    /// lagged quarterly inflation only
    Ar1,
    Moderate,
    Large,
}

impl DatasetVariant {
    pub fn slug(&self) -> &'static str {
        match self {
            DatasetVariant::Ar1 => "ar1",
            DatasetVariant::Moderate => "moderate",
            DatasetVariant::Large => "large",
        }
    }
}

impl std::str::FromStr for DatasetVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ar1" => Ok(Self::Ar1),
            "moderate" => Ok(Self::Moderate),
            "large" => Ok(Self::Large),
            _ => Err(Error::Config(format!("unknown dataset variant `{s}`"))),
        }
    }
}

fn default_expectations_series() -> String {
    "INFEXP".into()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub variant: DatasetVariant,
    /// price index whose annualized log change is forecast
    pub target_series: String,
    pub horizon: usize,
    #[serde(default = "default_true")]
    pub include_expectations: bool,
    #[serde(default = "default_expectations_series")]
    pub expectations_series: String,
}

impl DatasetSpec {
    pub fn new(variant: DatasetVariant, target: &str, horizon: usize) -> Self {
        Self {
            variant,
            target_series: target.to_string(),
            horizon,
            include_expectations: true,
            expectations_series: default_expectations_series(),
        }
    }
}

/// Complete regression rows: `y[t]` is realized at `origin_dates[t] + h` and row `t`
/// of `x` uses only values dated at or before `origin_dates[t]`.
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub y: Vec<f64>,
    pub x: DMatrix<f64>,
    pub names: Vec<String>,
    pub origin_dates: Vec<Quarter>,
    pub horizon: usize,
}

impl RegressionData {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    /// Date at which `y[t]` is observed.
    pub fn target_date(&self, t: usize) -> Quarter {
        self.origin_dates[t].add(self.horizon as i64)
    }

    /// Writes `origin,target_date,y,<predictors...>` rows for audit.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["origin".to_string(), "target_date".into(), "y".into()];
        header.extend(self.names.iter().cloned());
        out.write_record(&header)?;
        for t in 0..self.len() {
            let mut row = vec![
                self.origin_dates[t].to_string(),
                self.target_date(t).to_string(),
                format!("{}", self.y[t]),
            ];
            row.extend(self.x.row(t).iter().map(|v| format!("{v}")));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// All rows with complete predictors; the target is `NaN` where it is not yet realized.
#[derive(Debug, Clone)]
pub struct Design {
    pub dates: Vec<Quarter>,
    pub x: DMatrix<f64>,
    pub target: Vec<f64>,
    pub names: Vec<String>,
    pub horizon: usize,
}

/// Training sample for one forecast origin plus the predictor row at that origin.
#[derive(Debug, Clone)]
pub struct ForecastWindow {
    pub origin: Quarter,
    pub train: RegressionData,
    pub x_origin: Vec<f64>,
    /// realized outcome at `origin + h`, when available in the panel
    pub outcome: Option<f64>,
}

impl Design {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    fn position(&self, q: Quarter) -> Option<usize> {
        let first = *self.dates.first()?;
        let i = q.diff(&first);
        (i >= 0 && (i as usize) < self.len()).then_some(i as usize)
    }

    /// Every row whose target is realized.
    pub fn regression(&self) -> RegressionData {
        let rows: Vec<usize> = (0..self.len())
            .filter(|&i| self.target[i].is_finite())
            .collect();
        self.rows(&rows)
    }

    fn rows(&self, rows: &[usize]) -> RegressionData {
        let x = DMatrix::from_fn(rows.len(), self.x.ncols(), |r, c| self.x[(rows[r], c)]);
        RegressionData {
            y: rows.iter().map(|&i| self.target[i]).collect(),
            x,
            names: self.names.clone(),
            origin_dates: rows.iter().map(|&i| self.dates[i]).collect(),
            horizon: self.horizon,
        }
    }

    /// Training rows are those whose outcome is observed by `origin`, i.e. dated
    /// no later than `origin - h`.
    pub fn window(&self, origin: Quarter) -> Result<ForecastWindow> {
        let at = self.position(origin).ok_or_else(|| {
            Error::Alignment(format!("origin {origin} is outside the predictor sample"))
        })?;
        let cutoff = origin.add(-(self.horizon as i64));
        let rows: Vec<usize> = (0..self.len())
            .filter(|&i| self.dates[i] <= cutoff && self.target[i].is_finite())
            .collect();
        let outcome = self.target[at];
        Ok(ForecastWindow {
            origin,
            train: self.rows(&rows),
            x_origin: self.x.row(at).iter().copied().collect(),
            outcome: outcome.is_finite().then_some(outcome),
        })
    }

    /// Origins whose outcome date falls in `[start, end]`.
    pub fn origins_for_outcomes(&self, start: Quarter, end: Quarter) -> Vec<Quarter> {
        let h = self.horizon as i64;
        self.dates
            .iter()
            .copied()
            .filter(|d| {
                let realized = d.add(h);
                realized >= start && realized <= end
            })
            .collect()
    }
}

/// Quarterly annualized inflation `400 ln(P_t / P_{t-1})` aligned to `prices`.
fn quarterly_inflation(prices: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; prices.len()];
    for t in 1..prices.len() {
        let (a, b) = (prices[t - 1], prices[t]);
        if a > 0.0 && b > 0.0 {
            out[t] = 400.0 * (b / a).ln();
        }
    }
    out
}

/// h-quarter target aligned to its origin date; `NaN` when either price is missing.
fn aligned_target(prices: &[f64], h: usize) -> Vec<f64> {
    let scale = 400.0 / h as f64;
    (0..prices.len())
        .map(|t| match prices.get(t + h) {
            Some(&p) if prices[t] > 0.0 && p > 0.0 => scale * (p / prices[t]).ln(),
            _ => f64::NAN,
        })
        .collect()
}

/// Indices of panel series entering a dataset variant.
pub fn select_predictors(panel: &SeriesPanel, spec: &DatasetSpec) -> Vec<usize> {
    let members = panel.membership();
    (0..panel.names().len())
        .filter(|&j| match spec.variant {
            DatasetVariant::Ar1 => false,
            DatasetVariant::Moderate => members[j].moderate,
            DatasetVariant::Large => members[j].large,
        })
        .filter(|&j| spec.include_expectations || panel.names()[j] != spec.expectations_series)
        .collect()
}

/// Pairs each outcome `y_{t+h}` with the transformed predictors dated `t`.
///
/// Predictors are returned on their transformed scale; standardization happens per
/// estimation window (see [`Standardizer`]).
pub fn assemble_design(panel: &SeriesPanel, spec: &DatasetSpec) -> Result<Design> {
    if spec.horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let prices = panel.series(&spec.target_series).ok_or_else(|| {
        Error::Alignment(format!(
            "target series `{}` not in panel",
            spec.target_series
        ))
    })?;
    if prices.len() <= spec.horizon {
        return Err(Error::EmptyTarget {
            horizon: spec.horizon,
            len: prices.len(),
        });
    }
    if let Some(i) = prices.iter().position(|v| v.is_finite() && *v <= 0.0) {
        return Err(Error::Transform {
            series: spec.target_series.clone(),
            date: panel.dates()[i].to_string(),
            reason: "price level must be strictly positive".into(),
        });
    }
    let target = aligned_target(prices, spec.horizon);

    let (names, cols): (Vec<String>, Vec<Vec<f64>>) = match spec.variant {
        DatasetVariant::Ar1 => (
            vec![format!("{}_infl", spec.target_series)],
            vec![quarterly_inflation(prices)],
        ),
        _ => {
            let idx = select_predictors(panel, spec);
            if idx.is_empty() {
                return Err(Error::Alignment(format!(
                    "no series flagged for the {} dataset",
                    spec.variant.slug()
                )));
            }
            let mut cols = Vec::with_capacity(idx.len());
            for &j in &idx {
                cols.push(panel.transformed_column(j)?);
            }
            (
                idx.iter().map(|&j| panel.names()[j].clone()).collect(),
                cols,
            )
        }
    };

    let complete: Vec<usize> = (0..panel.len())
        .filter(|&t| cols.iter().all(|c| c[t].is_finite()))
        .collect();
    if complete.is_empty() {
        return Err(Error::Alignment(
            "no date has every predictor observed".into(),
        ));
    }
    let (lo, hi) = (complete[0], *complete.last().unwrap());
    if complete.len() != hi - lo + 1 {
        return Err(Error::Alignment(
            "complete predictor rows are not contiguous".into(),
        ));
    }
    if !(lo..=hi).any(|t| target[t].is_finite()) {
        return Err(Error::Alignment(format!(
            "no overlap between predictors and the h={} target",
            spec.horizon
        )));
    }
    let n = hi - lo + 1;
    let x = DMatrix::from_fn(n, cols.len(), |r, c| cols[c][lo + r]);
    Ok(Design {
        dates: panel.dates()[lo..=hi].to_vec(),
        x,
        target: target[lo..=hi].to_vec(),
        names,
        horizon: spec.horizon,
    })
}

/// Realized regression rows for a dataset.
pub fn assemble_regression(panel: &SeriesPanel, spec: &DatasetSpec) -> Result<RegressionData> {
    let d = assemble_design(panel, spec)?;
    let r = d.regression();
    if r.is_empty() {
        return Err(Error::Alignment("no realized rows after lagging".into()));
    }
    Ok(r)
}

/// Column means and standard deviations estimated on one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    /// Fits on the rows of `x`; a constant column keeps unit scale.
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut sd = Vec::with_capacity(x.ncols());
        for c in x.column_iter() {
            let m = c.sum() / n;
            let v = if n > 1.0 {
                c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            mean.push(m);
            sd.push(if v > 0.0 { v.sqrt() } else { 1.0 });
        }
        Self { mean, sd }
    }

    pub fn fit_vec(y: &[f64]) -> (f64, f64) {
        let s = Self::fit(&DMatrix::from_column_slice(y.len(), 1, y));
        (s.mean[0], s.sd[0])
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
            (x[(r, c)] - self.mean[c]) / self.sd[c]
        })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(c, v)| (v - self.mean[c]) / self.sd[c])
            .collect()
    }
}
