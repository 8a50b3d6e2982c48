use std::fmt;
use std::path::{Path, PathBuf};

use npinfl_core::data::{
    assemble_design, synthetic_panel, DatasetSpec, DatasetVariant, Design, Quarter, SeriesPanel,
    SyntheticConfig,
};
use npinfl_core::engine::{model_id, parse_model_id, McmcConfig, MeanKind, ModelSpec};
use npinfl_core::noise::ErrorKind;
use serde::{Deserialize, Serialize};

/// Invalid or inconsistent configuration; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    /// the bundled generator
    Synthetic {
        #[serde(default = "default_synthetic_start")]
        start: Quarter,
        #[serde(default = "default_synthetic_len")]
        len: usize,
        #[serde(default = "default_synthetic_seed")]
        seed: u64,
    },
    /// a values file plus a metadata file with names, codes and membership
    Csv { panel: PathBuf, metadata: PathBuf },
}

fn default_synthetic_start() -> Quarter {
    SyntheticConfig::default().start
}
fn default_synthetic_len() -> usize {
    SyntheticConfig::default().len
}
fn default_synthetic_seed() -> u64 {
    SyntheticConfig::default().seed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelGrid {
    #[serde(default = "all_means")]
    pub means: Vec<MeanKind>,
    #[serde(default = "all_errors")]
    pub errors: Vec<ErrorKind>,
}

fn all_means() -> Vec<MeanKind> {
    MeanKind::ALL.to_vec()
}
fn all_errors() -> Vec<ErrorKind> {
    ErrorKind::ALL.to_vec()
}

impl Default for ModelGrid {
    fn default() -> Self {
        Self {
            means: all_means(),
            errors: all_errors(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalWindow {
    pub start: Quarter,
    pub end: Quarter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DrawsFormat {
    #[default]
    Csv,
    /// little-endian f64 values
    Bin,
}

impl DrawsFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            DrawsFormat::Csv => "csv",
            DrawsFormat::Bin => "bin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    pub datasets: Vec<DatasetVariant>,
    pub target_series: String,
    #[serde(default = "default_true")]
    pub include_expectations: bool,
    #[serde(default)]
    pub models: ModelGrid,
    /// explicit `mean-error` ids; replaces `models` when present
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_ids: Option<Vec<String>>,
    pub horizons: Vec<usize>,
    pub evaluation: EvalWindow,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub draws_format: DrawsFormat,
    /// model whose quantile paths feed the LASSO summary
    #[serde(default = "default_lasso_model")]
    pub lasso_model: String,
}

fn default_true() -> bool {
    true
}
fn default_output() -> PathBuf {
    PathBuf::from("runs/default")
}
fn default_workers() -> usize {
    1
}
fn default_lasso_model() -> String {
    "gp-dpmsv".into()
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub models: Option<Vec<String>>,
    pub horizons: Option<Vec<usize>>,
    pub draws_format: Option<DrawsFormat>,
}

impl RunConfig {
    /// Reads a config file, or the `config` member of a run manifest. Relative
    /// data paths are resolved against the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| config_err(format!("{}: invalid JSON: {e}", path.display())))?;
        let value = match value {
            serde_json::Value::Object(mut m)
                if m.contains_key("config") && m.contains_key("cells") =>
            {
                m.remove("config").expect("checked above")
            }
            v => v,
        };
        let mut cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let at = e.path().to_string();
            config_err(format!("{}: at `{at}`: {}", path.display(), e.inner()))
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let DataSource::Csv { panel, metadata } = &mut cfg.data {
            for p in [panel, metadata] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.output = out.clone();
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(s) = o.seed {
            self.mcmc.seed = s;
        }
        if let Some(m) = &o.models {
            self.model_ids = Some(m.clone());
        }
        if let Some(h) = &o.horizons {
            self.horizons = h.clone();
        }
        if let Some(f) = o.draws_format {
            self.draws_format = f;
        }
    }

    /// `(mean, error)` pairs of the selected grid, in a fixed order.
    pub fn model_pairs(&self) -> anyhow::Result<Vec<(MeanKind, ErrorKind)>> {
        let pairs: Vec<(MeanKind, ErrorKind)> = match &self.model_ids {
            Some(ids) => ids
                .iter()
                .map(|id| parse_model_id(id).map_err(|e| config_err(format!("models: {e}"))))
                .collect::<anyhow::Result<_>>()?,
            None => self
                .models
                .means
                .iter()
                .flat_map(|&m| self.models.errors.iter().map(move |&e| (m, e)))
                .collect(),
        };
        let mut seen = std::collections::BTreeSet::new();
        for (m, e) in &pairs {
            if !seen.insert(model_id(*m, *e)) {
                return Err(config_err(format!(
                    "models: `{}` listed twice",
                    model_id(*m, *e)
                )));
            }
        }
        if pairs.is_empty() {
            return Err(config_err("models: the model grid is empty"));
        }
        Ok(pairs)
    }

    pub fn model_ids(&self) -> anyhow::Result<Vec<String>> {
        Ok(self
            .model_pairs()?
            .into_iter()
            .map(|(m, e)| model_id(m, e))
            .collect())
    }

    pub fn dataset_spec(&self, variant: DatasetVariant, h: usize) -> DatasetSpec {
        DatasetSpec {
            include_expectations: self.include_expectations,
            ..DatasetSpec::new(variant, &self.target_series, h)
        }
    }

    pub fn load_panel(&self) -> anyhow::Result<SeriesPanel> {
        match &self.data {
            DataSource::Synthetic { start, len, seed } => Ok(synthetic_panel(&SyntheticConfig {
                start: *start,
                len: *len,
                seed: *seed,
            })),
            DataSource::Csv { panel, metadata } => {
                for p in [panel, metadata] {
                    if !p.is_file() {
                        return Err(config_err(format!("data file not found: {}", p.display())));
                    }
                }
                SeriesPanel::from_csv(panel, metadata).map_err(|e| config_err(e.to_string()))
            }
        }
    }

    /// Field-level checks that need no data.
    pub fn check(&self) -> anyhow::Result<()> {
        if self.datasets.is_empty() {
            return Err(config_err("datasets: at least one variant is required"));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(config_err(
                "horizons: need at least one horizon, all positive",
            ));
        }
        if self.workers == 0 {
            return Err(config_err("workers: must be at least 1"));
        }
        if self.evaluation.start > self.evaluation.end {
            return Err(config_err(format!(
                "evaluation: start {} is after end {}",
                self.evaluation.start, self.evaluation.end
            )));
        }
        self.mcmc
            .validate()
            .map_err(|e| config_err(format!("mcmc: {e}")))?;
        parse_model_id(&self.lasso_model).map_err(|e| config_err(format!("lasso_model: {e}")))?;
        self.model_pairs()?;
        Ok(())
    }

    /// Builds every design the grid needs and checks the evaluation window
    /// against the panel's dates.
    pub fn plan(&self) -> anyhow::Result<Plan> {
        self.check()?;
        let panel = self.load_panel()?;
        let (first, last) = match (panel.dates().first(), panel.dates().last()) {
            (Some(a), Some(b)) => (*a, *b),
            _ => return Err(config_err("data: the panel has no observations")),
        };
        let ev = self.evaluation;
        if ev.start < first || ev.end > last {
            return Err(config_err(format!(
                "evaluation: window {}..{} lies outside the data span {first}..{last}",
                ev.start, ev.end
            )));
        }
        let pairs = self.model_pairs()?;
        let mut designs = Vec::new();
        for &variant in &self.datasets {
            for &h in &self.horizons {
                let spec = self.dataset_spec(variant, h);
                let design = assemble_design(&panel, &spec)
                    .map_err(|e| config_err(format!("dataset {} h={h}: {e}", variant.slug())))?;
                let origins = design.origins_for_outcomes(ev.start, ev.end);
                if origins.is_empty() {
                    return Err(config_err(format!(
                        "evaluation: no origins of dataset {} h={h} have outcomes in {}..{}",
                        variant.slug(),
                        ev.start,
                        ev.end
                    )));
                }
                let models = pairs
                    .iter()
                    .map(|&(m, e)| ModelSpec::new(m, e, spec.clone()))
                    .collect();
                designs.push(PlannedDesign {
                    design,
                    origins,
                    models,
                });
            }
        }
        Ok(Plan { designs })
    }
}

#[derive(Debug)]
pub struct PlannedDesign {
    pub design: Design,
    pub origins: Vec<Quarter>,
    pub models: Vec<ModelSpec>,
}

impl PlannedDesign {
    pub fn variant(&self) -> DatasetVariant {
        self.models[0].dataset.variant
    }

    pub fn horizon(&self) -> usize {
        self.design.horizon
    }
}

#[derive(Debug)]
pub struct Plan {
    pub designs: Vec<PlannedDesign>,
}

impl Plan {
    pub fn cell_count(&self) -> usize {
        self.designs
            .iter()
            .map(|d| d.models.len() * d.origins.len())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> serde_json::Value {
        serde_json::json!({
            "data": {"kind": "synthetic"},
            "datasets": ["moderate"],
            "target_series": "CPIAUCSL",
            "horizons": [1],
            "evaluation": {"start": "2010Q1", "end": "2010Q4"},
            "mcmc": {"n_iter": 20, "n_burn": 10}
        })
    }

    fn parse(v: serde_json::Value) -> anyhow::Result<RunConfig> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, v.to_string()).unwrap();
        RunConfig::load(&p)
    }

    #[test]
    fn defaults_select_the_full_grid() {
        let cfg = parse(sample()).unwrap();
        assert_eq!(cfg.model_ids().unwrap().len(), 16);
        let plan = cfg.plan().unwrap();
        assert_eq!(plan.cell_count(), 16 * 4);
    }

    #[test]
    fn schema_errors_name_the_field() {
        let mut v = sample();
        v["mcmc"]["n_iter"] = serde_json::json!("many");
        let err = parse(v).unwrap_err();
        assert!(err.to_string().contains("mcmc.n_iter"), "{err}");
        assert!(err.downcast_ref::<ConfigError>().is_some());
    }

    #[test]
    fn explicit_ids_override_the_grid() {
        let mut cfg = parse(sample()).unwrap();
        cfg.apply(&Overrides {
            models: Some(vec!["uc-sv".into(), "gp-dpm".into()]),
            ..Overrides::default()
        });
        assert_eq!(cfg.model_ids().unwrap(), vec!["uc-sv", "gp-dpm"]);
        cfg.model_ids = Some(vec!["gp-bogus".into()]);
        assert!(cfg.check().is_err());
    }

    #[test]
    fn window_outside_the_data_is_rejected() {
        let mut v = sample();
        v["evaluation"]["end"] = serde_json::json!("2100Q1");
        let err = parse(v).unwrap().plan().unwrap_err();
        assert!(err.to_string().contains("2100Q1"), "{err}");
    }
}
