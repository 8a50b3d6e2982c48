use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use log::{error, info};
use npinfl_core::data::{Design, Quarter};
use npinfl_core::engine::{cell_seed, derive_seed, run_cell, ModelPriors, ModelSpec};
use npinfl_core::eval::ScorePanel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{DataSource, DrawsFormat, Plan, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Done,
    /// training window below the minimum length
    Skipped,
}

/// Everything the report needs from one (model, origin) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub model: String,
    pub dataset: String,
    pub horizon: usize,
    pub origin: Quarter,
    pub seed: u64,
    pub status: CellStatus,
    pub n_draws: usize,
    pub point: Option<f64>,
    pub quantiles: Vec<f64>,
    pub outcome: Option<f64>,
    pub lpl: Option<f64>,
    pub pit: Option<f64>,
    pub qs: Vec<f64>,
    pub inefficiency: Vec<(String, f64)>,
    pub hyper_acceptance: Option<f64>,
}

pub fn cell_key(model: &str, dataset: &str, h: usize, origin: Quarter) -> String {
    format!("{model}_{dataset}_{h}_{origin}")
}

pub fn cells_dir(out: &Path) -> PathBuf {
    out.join("cells")
}

pub fn draws_dir(out: &Path) -> PathBuf {
    out.join("draws")
}

pub fn record_path(out: &Path, key: &str) -> PathBuf {
    cells_dir(out).join(format!("{key}.json"))
}

/// Writes through a temporary file so a killed run never leaves a half-written
/// checkpoint behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

fn encode_draws(draws: &[f64], format: DrawsFormat) -> Vec<u8> {
    match format {
        DrawsFormat::Csv => {
            let mut s = String::from("value\n");
            for d in draws {
                s.push_str(&d.to_string());
                s.push('\n');
            }
            s.into_bytes()
        }
        DrawsFormat::Bin => draws.iter().flat_map(|d| d.to_le_bytes()).collect(),
    }
}

/// Reads a draws file written in either format.
pub fn read_draws(path: &Path) -> anyhow::Result<Vec<f64>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "bin") {
        anyhow::ensure!(bytes.len() % 8 == 0, "{} is truncated", path.display());
        return Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of eight")))
            .collect());
    }
    let text = String::from_utf8(bytes)?;
    text.lines()
        .skip(1)
        .map(|l| Ok(l.trim().parse::<f64>()?))
        .collect()
}

pub fn load_record(path: &Path) -> anyhow::Result<CellRecord> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

struct Cell<'a> {
    spec: &'a ModelSpec,
    design: &'a Design,
    origin: Quarter,
}

impl Cell<'_> {
    fn key(&self) -> String {
        cell_key(
            &self.spec.id(),
            self.spec.dataset.variant.slug(),
            self.spec.horizon(),
            self.origin,
        )
    }
}

fn execute(cell: &Cell, cfg: &RunConfig, priors: &ModelPriors) -> anyhow::Result<CellRecord> {
    let spec = cell.spec;
    let base = CellRecord {
        model: spec.id(),
        dataset: spec.dataset.variant.slug().to_string(),
        horizon: spec.horizon(),
        origin: cell.origin,
        seed: cell_seed(cfg.mcmc.seed, spec, cell.origin),
        status: CellStatus::Skipped,
        n_draws: 0,
        point: None,
        quantiles: Vec::new(),
        outcome: None,
        lpl: None,
        pit: None,
        qs: Vec::new(),
        inefficiency: Vec::new(),
        hyper_acceptance: None,
    };
    let Some(result) = run_cell(spec, cell.design, cell.origin, &cfg.mcmc, priors)? else {
        return Ok(base);
    };
    let f = &result.predictive;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(result.seed, &["pit"]));
    let scored = ScorePanel::from_forecasts(&result.model, std::slice::from_ref(f), &mut rng)?;
    let draws_path =
        draws_dir(&cfg.output).join(format!("{}.{}", cell.key(), cfg.draws_format.extension()));
    write_atomic(&draws_path, &encode_draws(&f.draws, cfg.draws_format))?;
    Ok(CellRecord {
        status: CellStatus::Done,
        n_draws: f.draws.len(),
        point: Some(f.point),
        quantiles: f.quantiles.clone(),
        outcome: f.outcome,
        lpl: scored.lpl.first().copied(),
        pit: scored.pits.first().copied(),
        qs: scored.qs.first().cloned().unwrap_or_default(),
        inefficiency: result.inefficiency,
        hyper_acceptance: result.hyper_acceptance,
        seed: result.seed,
        ..base
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestCell {
    pub key: String,
    pub seed: u64,
    pub status: String,
}

/// Reproduction record: the effective configuration plus the outcome of every cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    /// SHA-256 of each external data file
    pub inputs: Vec<(String, String)>,
    pub cells: Vec<ManifestCell>,
}

fn input_hashes(cfg: &RunConfig) -> anyhow::Result<Vec<(String, String)>> {
    let DataSource::Csv { panel, metadata } = &cfg.data else {
        return Ok(Vec::new());
    };
    [panel, metadata]
        .iter()
        .map(|p| {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            let digest = Sha256::digest(&bytes);
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            Ok((p.display().to_string(), hex))
        })
        .collect()
}

pub struct RunSummary {
    pub total: usize,
    pub executed: usize,
    pub reused: usize,
    pub skipped: usize,
    pub failed: Vec<(String, String)>,
}

/// Runs every cell of the plan that has no checkpoint yet.
pub fn run_grid(cfg: &RunConfig, plan: &Plan) -> anyhow::Result<RunSummary> {
    let out = &cfg.output;
    fs::create_dir_all(cells_dir(out))?;
    fs::create_dir_all(draws_dir(out))?;
    let priors = ModelPriors::default();
    let cells: Vec<Cell> = plan
        .designs
        .iter()
        .flat_map(|d| {
            d.models.iter().flat_map(move |spec| {
                d.origins.iter().map(move |&origin| Cell {
                    spec,
                    design: &d.design,
                    origin,
                })
            })
        })
        .collect();
    let pending: Vec<&Cell> = cells
        .iter()
        .filter(|c| !record_path(out, &c.key()).is_file())
        .collect();
    info!(
        "{} cells in the grid, {} already complete, {} to run on {} workers",
        cells.len(),
        cells.len() - pending.len(),
        pending.len(),
        cfg.workers
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()?;
    let outcomes: Vec<(String, Result<CellStatus, String>)> = pool.install(|| {
        pending
            .par_iter()
            .map(|cell| {
                let key = cell.key();
                let started = Instant::now();
                let res = execute(cell, cfg, &priors).and_then(|rec| {
                    let json = serde_json::to_vec_pretty(&rec)?;
                    write_atomic(&record_path(out, &key), &json)?;
                    Ok(rec.status)
                });
                match &res {
                    Ok(_) => info!("{key}: {:.1}s", started.elapsed().as_secs_f64()),
                    Err(e) => error!("{key}: {e:#}"),
                }
                (key, res.map_err(|e| format!("{e:#}")))
            })
            .collect()
    });
    let failed: Vec<(String, String)> = outcomes
        .iter()
        .filter_map(|(k, r)| r.as_ref().err().map(|e| (k.clone(), e.clone())))
        .collect();
    let mut manifest_cells = Vec::with_capacity(cells.len());
    let mut skipped = 0;
    for cell in &cells {
        let key = cell.key();
        let path = record_path(out, &key);
        let (seed, status) = if path.is_file() {
            let rec = load_record(&path)?;
            if rec.status == CellStatus::Skipped {
                skipped += 1;
            }
            let s = match rec.status {
                CellStatus::Done => "done",
                CellStatus::Skipped => "skipped",
            };
            (rec.seed, s.to_string())
        } else {
            (
                cell_seed(cfg.mcmc.seed, cell.spec, cell.origin),
                "failed".to_string(),
            )
        };
        manifest_cells.push(ManifestCell { key, seed, status });
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        inputs: input_hashes(cfg)?,
        cells: manifest_cells,
    };
    write_atomic(
        &out.join("manifest.json"),
        &serde_json::to_vec_pretty(&manifest)?,
    )?;
    Ok(RunSummary {
        total: cells.len(),
        executed: pending.len() - failed.len(),
        reused: cells.len() - pending.len(),
        skipped,
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_roundtrip_in_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let draws = vec![0.1, -2.5e-9, 1.0 / 3.0, 1e300];
        for fmt in [DrawsFormat::Csv, DrawsFormat::Bin] {
            let p = dir.path().join(format!("d.{}", fmt.extension()));
            fs::write(&p, encode_draws(&draws, fmt)).unwrap();
            assert_eq!(read_draws(&p).unwrap(), draws);
        }
    }

    #[test]
    fn keys_follow_the_file_naming() {
        let q = Quarter::new(2001, 3).unwrap();
        assert_eq!(
            cell_key("gp-sv", "moderate", 4, q),
            "gp-sv_moderate_4_2001Q3"
        );
    }
}
