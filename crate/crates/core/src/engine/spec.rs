use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::DatasetSpec;
use crate::error::{Error, Result};
use crate::gp::{KernelHyper, ScalePrior};
use crate::noise::{ErrorKind, ErrorPriors};

/// Conditional-mean specification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeanKind {
    /// random-walk trend without predictors
    #[serde(rename = "uc")]
    Uc,
    /// subspace-shrinkage GP with the linear weight pinned to one
    #[serde(rename = "linear")]
    Linear,
    #[serde(rename = "gp")]
    Gp,
    #[serde(rename = "gpsub")]
    GpSub,
}

impl MeanKind {
    pub const ALL: [MeanKind; 4] = [
        MeanKind::Uc,
        MeanKind::Linear,
        MeanKind::Gp,
        MeanKind::GpSub,
    ];

    pub fn slug(&self) -> &'static str {
        match self {
            MeanKind::Uc => "uc",
            MeanKind::Linear => "linear",
            MeanKind::Gp => "gp",
            MeanKind::GpSub => "gpsub",
        }
    }

    pub fn uses_predictors(&self) -> bool {
        !matches!(self, MeanKind::Uc)
    }
}

impl std::str::FromStr for MeanKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        MeanKind::ALL
            .into_iter()
            .find(|k| k.slug().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown mean kind `{s}`")))
    }
}

/// One cell of the model grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub mean: MeanKind,
    pub error: ErrorKind,
    pub dataset: DatasetSpec,
}

pub const BENCHMARK_ID: &str = "uc-sv";

impl ModelSpec {
    pub fn new(mean: MeanKind, error: ErrorKind, dataset: DatasetSpec) -> Self {
        Self {
            mean,
            error,
            dataset,
        }
    }

    /// `"{mean}-{error}"`, e.g. `gpsub-dpmsv`.
    pub fn id(&self) -> String {
        model_id(self.mean, self.error)
    }

    pub fn horizon(&self) -> usize {
        self.dataset.horizon
    }

    pub fn is_benchmark(&self) -> bool {
        self.id() == BENCHMARK_ID
    }

    /// All sixteen mean × error combinations on one dataset.
    pub fn grid(dataset: &DatasetSpec) -> Vec<ModelSpec> {
        MeanKind::ALL
            .iter()
            .flat_map(|&m| {
                ErrorKind::ALL
                    .iter()
                    .map(move |&e| ModelSpec::new(m, e, dataset.clone()))
            })
            .collect()
    }
}

pub fn model_id(mean: MeanKind, error: ErrorKind) -> String {
    format!("{}-{}", mean.slug(), error.slug())
}

/// Parses `"{mean}-{error}"`.
pub fn parse_model_id(id: &str) -> Result<(MeanKind, ErrorKind)> {
    let (m, e) = id
        .split_once('-')
        .ok_or_else(|| Error::Config(format!("model id `{id}` is not of the form mean-error")))?;
    Ok((m.parse()?, e.parse()?))
}

/// Prior settings beyond the error blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelPriors {
    pub error: ErrorPriors,
    pub scale: ScalePrior,
    /// inverse-Gamma shape and scale of the trend innovation variance
    pub trend_shape: f64,
    pub trend_scale: f64,
    /// variance of the initial trend around the first observation
    pub trend_init_var: f64,
}

impl Default for ModelPriors {
    fn default() -> Self {
        Self {
            error: ErrorPriors::default(),
            scale: ScalePrior::default(),
            trend_shape: 3.0,
            trend_scale: 0.2,
            trend_init_var: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcConfig {
    #[serde(default = "default_iter")]
    pub n_iter: usize,
    #[serde(default = "default_burn")]
    pub n_burn: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default)]
    pub seed: u64,
    /// initial random-walk step on the logit scale of the kernel hyperparameters
    #[serde(default = "default_step")]
    pub initial_step: f64,
    /// holds the kernel hyperparameters fixed instead of sampling them
    #[serde(default)]
    pub fixed_hyper: Option<KernelHyper>,
    /// holds the linear weight of the subspace kernel fixed
    #[serde(default)]
    pub fixed_omega: Option<f64>,
    /// keeps the latent function trace of every retained draw
    #[serde(default)]
    pub keep_fitted: bool,
}

fn default_iter() -> usize {
    20_000
}
fn default_burn() -> usize {
    10_000
}
fn default_thin() -> usize {
    1
}
fn default_step() -> f64 {
    0.5
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_iter: default_iter(),
            n_burn: default_burn(),
            thin: default_thin(),
            seed: 0,
            initial_step: default_step(),
            fixed_hyper: None,
            fixed_omega: None,
            keep_fitted: false,
        }
    }
}

impl McmcConfig {
    pub fn short(n_iter: usize, n_burn: usize, seed: u64) -> Self {
        Self {
            n_iter,
            n_burn,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_burn >= self.n_iter {
            return Err(Error::Config(format!(
                "burn-in {} must be below the iteration count {}",
                self.n_burn, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thinning must be at least 1".into()));
        }
        if let Some(w) = self.fixed_omega {
            if !(0.0..=1.0).contains(&w) || w == 0.0 {
                return Err(Error::Config(format!(
                    "fixed omega must lie in (0, 1], got {w}"
                )));
            }
        }
        if let Some(h) = self.fixed_hyper {
            if !(h.xi > 0.0 && h.xi < 1.0 && h.phi > 0.0 && h.phi < 1.0) {
                return Err(Error::Config(
                    "fixed kernel hyperparameters must lie in (0, 1)".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        (self.n_iter - self.n_burn).div_ceil(self.thin)
    }
}

/// 64-bit seed for one grid cell, independent of the order cells are run in.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let out = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&out[..8]);
    u64::from_le_bytes(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DatasetVariant;

    #[test]
    fn grid_has_sixteen_distinct_models() {
        let ds = DatasetSpec::new(DatasetVariant::Moderate, "CPIAUCSL", 1);
        let g = ModelSpec::grid(&ds);
        assert_eq!(g.len(), 16);
        let mut ids: Vec<String> = g.iter().map(|m| m.id()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 16);
        assert_eq!(g.iter().filter(|m| m.is_benchmark()).count(), 1);
        for id in ids {
            let (m, e) = parse_model_id(&id).unwrap();
            assert_eq!(model_id(m, e), id);
        }
    }

    #[test]
    fn retained_draw_arithmetic() {
        assert_eq!(McmcConfig::short(20_000, 10_000, 0).retained(), 10_000);
        assert_eq!(McmcConfig::short(100, 99, 0).retained(), 1);
        let mut c = McmcConfig::short(100, 10, 0);
        c.thin = 4;
        assert_eq!(c.retained(), 23);
        assert!(McmcConfig::short(10, 10, 0).validate().is_err());
    }

    #[test]
    fn seeds_depend_on_every_part() {
        let a = derive_seed(7, &["gp-sv", "moderate", "1", "1990Q1"]);
        assert_eq!(a, derive_seed(7, &["gp-sv", "moderate", "1", "1990Q1"]));
        assert_ne!(a, derive_seed(8, &["gp-sv", "moderate", "1", "1990Q1"]));
        assert_ne!(a, derive_seed(7, &["gp-sv", "moderate", "1", "1990Q2"]));
        assert_ne!(derive_seed(7, &["ab", "c"]), derive_seed(7, &["a", "bc"]));
    }
}
