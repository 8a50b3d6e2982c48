use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use log::{info, warn};
use nalgebra::DMatrix;
use npinfl_core::data::Quarter;
use npinfl_core::engine::{BENCHMARK_ID, P_GRID};
use npinfl_core::eval::{
    cumulative_path, decade_windows, relative_table, rs_diagnostic, subsample_average,
    write_cumulative_csv, write_subsamples_csv, ScorePanel,
};
use npinfl_core::lasso::{
    heatmap_data, summarize, write_heatmap_csv, write_r2_csv, QuantilePathSet, DEFAULT_FOLDS,
    DISPLAY_FLOOR,
};

use crate::config::{Plan, PlannedDesign, RunConfig};
use crate::run::{cell_key, load_record, record_path, CellRecord, CellStatus};

const CALIBRATION_GRID: usize = 21;
const CALIBRATION_LEVEL: f64 = 0.05;
const LASSO_GRID: usize = 50;

fn create(path: &Path) -> anyhow::Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

pub fn report_dir(out: &Path, dataset: &str, h: usize) -> PathBuf {
    out.join("report").join(format!("{dataset}_h{h}"))
}

/// A missing cell, or one that produced no scored outcome.
struct Gap {
    model: String,
    origin: Quarter,
    reason: &'static str,
}

struct Collected {
    /// models with at least one scored origin, in grid order
    panels: Vec<ScorePanel>,
    records: Vec<(String, Vec<CellRecord>)>,
    gaps: Vec<Gap>,
}

fn collect(cfg: &RunConfig, d: &PlannedDesign) -> anyhow::Result<Collected> {
    let dataset = d.variant().slug();
    let mut panels = Vec::new();
    let mut records = Vec::new();
    let mut gaps = Vec::new();
    for spec in &d.models {
        let model = spec.id();
        let mut recs = Vec::new();
        for &origin in &d.origins {
            let path = record_path(&cfg.output, &cell_key(&model, dataset, d.horizon(), origin));
            if !path.is_file() {
                gaps.push(Gap {
                    model: model.clone(),
                    origin,
                    reason: "missing",
                });
                continue;
            }
            let rec = load_record(&path)?;
            match (rec.status, rec.outcome) {
                (CellStatus::Skipped, _) => gaps.push(Gap {
                    model: model.clone(),
                    origin,
                    reason: "short-window",
                }),
                (CellStatus::Done, None) => gaps.push(Gap {
                    model: model.clone(),
                    origin,
                    reason: "no-outcome",
                }),
                (CellStatus::Done, Some(_)) => {}
            }
            recs.push(rec);
        }
        let panel = panel_from_records(&model, d.horizon(), &recs);
        if !panel.is_empty() {
            panels.push(panel);
        }
        records.push((model, recs));
    }
    Ok(Collected {
        panels,
        records,
        gaps,
    })
}

/// Scored rows of the completed cells, in origin order.
pub fn panel_from_records(model: &str, horizon: usize, records: &[CellRecord]) -> ScorePanel {
    let mut rows: Vec<&CellRecord> = records
        .iter()
        .filter(|r| r.status == CellStatus::Done && r.outcome.is_some() && r.lpl.is_some())
        .collect();
    rows.sort_by_key(|r| r.origin);
    ScorePanel {
        model: model.to_string(),
        horizon,
        origins: rows.iter().map(|r| r.origin).collect(),
        outcomes: rows.iter().filter_map(|r| r.outcome).collect(),
        point: rows.iter().filter_map(|r| r.point).collect(),
        sq_errors: rows
            .iter()
            .map(|r| (r.outcome.unwrap_or(f64::NAN) - r.point.unwrap_or(f64::NAN)).powi(2))
            .collect(),
        lpl: rows.iter().filter_map(|r| r.lpl).collect(),
        qs: rows.iter().map(|r| r.qs.clone()).collect(),
        pits: rows.iter().filter_map(|r| r.pit).collect(),
    }
}

fn common_origins(panels: &[&ScorePanel]) -> Vec<Quarter> {
    let Some(first) = panels.first() else {
        return Vec::new();
    };
    first
        .origins
        .iter()
        .copied()
        .filter(|o| panels.iter().all(|p| p.origins.contains(o)))
        .collect()
}

fn fmt3(v: f64) -> String {
    format!("{v:.3}")
}

/// Ratios against the benchmark on the origins both have scored; a model short
/// of the benchmark's origins is marked `partial`, a model with none `absent`.
fn write_relative_table(
    path: &Path,
    models: &[String],
    panels: &[ScorePanel],
    bench: &ScorePanel,
) -> anyhow::Result<()> {
    let mut wr = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["model", "status", "mse_ratio", "lpl_diff"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    header.extend(P_GRID.iter().map(|p| format!("qs_ratio_{p}")));
    header.extend(["mse".into(), "lpl".into(), "n".into()]);
    wr.write_record(&header)?;
    for model in models {
        let Some(panel) = panels.iter().find(|p| &p.model == model) else {
            let mut row = vec![model.clone(), "absent".into()];
            row.resize(header.len(), String::new());
            wr.write_record(&row)?;
            continue;
        };
        let common = common_origins(&[panel, bench]);
        if common.is_empty() {
            let mut row = vec![model.clone(), "absent".into()];
            row.resize(header.len(), String::new());
            wr.write_record(&row)?;
            continue;
        }
        let status = if common.len() == bench.len() && common.len() == panel.len() {
            "ok"
        } else {
            "partial"
        };
        let rel = relative_table(&[panel.restrict(&common)], &bench.restrict(&common))?;
        let r = &rel[0];
        let mut row = vec![
            model.clone(),
            status.into(),
            fmt3(r.mse_ratio),
            fmt3(r.lpl_diff),
        ];
        row.extend(r.qs_ratio.iter().map(|v| fmt3(*v)));
        row.extend([r.mse.to_string(), r.lpl.to_string(), r.n.to_string()]);
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Plain score levels, used when there is no benchmark to divide by.
fn write_levels_table(path: &Path, models: &[String], panels: &[ScorePanel]) -> anyhow::Result<()> {
    let mut wr = csv::Writer::from_writer(create(path)?);
    let mut header = vec![
        "model".to_string(),
        "status".into(),
        "mse".into(),
        "lpl".into(),
    ];
    header.extend(P_GRID.iter().map(|p| format!("qs_{p}")));
    header.push("n".into());
    wr.write_record(&header)?;
    for model in models {
        let mut row = vec![model.clone()];
        match panels.iter().find(|p| &p.model == model) {
            Some(p) => {
                row.extend(["ok".into(), fmt3(p.mse()), fmt3(p.mean_lpl())]);
                row.extend(p.mean_qs().iter().map(|v| fmt3(*v)));
                row.push(p.len().to_string());
            }
            None => {
                row.push("absent".into());
                row.resize(header.len(), String::new());
            }
        }
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

fn write_gaps(path: &Path, gaps: &[Gap]) -> anyhow::Result<()> {
    let mut wr = csv::Writer::from_writer(create(path)?);
    wr.write_record(["model", "origin", "reason"])?;
    for g in gaps {
        wr.write_record([g.model.clone(), g.origin.to_string(), g.reason.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

fn write_cumulative(dir: &Path, panels: &[ScorePanel], bench: &ScorePanel) -> anyhow::Result<()> {
    let mut all: Vec<&ScorePanel> = panels.iter().collect();
    all.push(bench);
    let common = common_origins(&all);
    if common.is_empty() {
        warn!("no origin is scored by every model; cumulative paths omitted");
        return Ok(());
    }
    let b = bench.restrict(&common);
    let others: Vec<ScorePanel> = panels
        .iter()
        .filter(|p| p.model != bench.model)
        .map(|p| p.restrict(&common))
        .collect();
    let dates: Vec<Quarter> = (0..b.len()).map(|i| b.target_date(i)).collect();
    let mut metrics: Vec<(String, bool, Box<dyn Fn(&ScorePanel) -> Vec<f64>>)> = vec![
        ("lpl".into(), true, Box::new(|p: &ScorePanel| p.lpl.clone())),
        (
            "sqerror".into(),
            false,
            Box::new(|p: &ScorePanel| p.sq_errors.clone()),
        ),
    ];
    for (j, pr) in P_GRID.iter().enumerate() {
        metrics.push((
            format!("qs_{pr}"),
            false,
            Box::new(move |p: &ScorePanel| p.qs.iter().map(|r| r[j]).collect()),
        ));
    }
    for (name, higher, get) in &metrics {
        let base = get(&b);
        let paths = others
            .iter()
            .map(|p| {
                Ok((
                    p.model.clone(),
                    cumulative_path(&dates, &get(p), &base, *higher)?,
                ))
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        if paths.is_empty() {
            continue;
        }
        write_cumulative_csv(&paths, create(&dir.join(format!("cumulative_{name}.csv")))?)?;
    }
    Ok(())
}

fn write_subsamples(dir: &Path, panels: &[ScorePanel], bench: &ScorePanel) -> anyhow::Result<()> {
    let windows = decade_windows();
    let mut rows = Vec::new();
    for p in panels {
        let common = common_origins(&[p, bench]);
        if common.is_empty() {
            continue;
        }
        rows.extend(subsample_average(
            &p.restrict(&common),
            &bench.restrict(&common),
            &windows,
        )?);
    }
    write_subsamples_csv(&rows, create(&dir.join("qs_subsamples.csv"))?)?;
    Ok(())
}

/// Writes every report file for the run in `cfg.output`; returns the number of
/// grid cells with no checkpoint.
pub fn report(cfg: &RunConfig, plan: &Plan) -> anyhow::Result<usize> {
    let mut gap_count = 0;
    for d in &plan.designs {
        let dataset = d.variant().slug();
        let dir = report_dir(&cfg.output, dataset, d.horizon());
        fs::create_dir_all(&dir)?;
        let c = collect(cfg, d)?;
        let models: Vec<String> = d.models.iter().map(|m| m.id()).collect();
        for p in &c.panels {
            p.write_csv(create(&dir.join(format!("scores_{}.csv", p.model)))?)?;
            rs_diagnostic(&p.pits, CALIBRATION_GRID, CALIBRATION_LEVEL)?
                .write_csv(create(&dir.join(format!("calibration_{}.csv", p.model)))?)?;
        }
        write_diagnostics(&dir.join("diagnostics.csv"), &c.records)?;
        let table = dir.join("table1.csv");
        let bench = c.panels.iter().find(|p| p.model == BENCHMARK_ID);
        match bench {
            Some(b) if models.iter().any(|m| m != BENCHMARK_ID) => {
                write_relative_table(&table, &models, &c.panels, b)?;
                write_cumulative(&dir, &c.panels, b)?;
                write_subsamples(&dir, &c.panels, b)?;
            }
            _ => write_levels_table(&table, &models, &c.panels)?,
        }
        write_gaps(&dir.join("gaps.csv"), &c.gaps)?;
        if !c.gaps.is_empty() {
            warn!(
                "{dataset} h={}: {} cells without a scored outcome, listed in gaps.csv",
                d.horizon(),
                c.gaps.len()
            );
        }
        gap_count += c.gaps.iter().filter(|g| g.reason == "missing").count();
        info!("report written to {}", dir.display());
    }
    Ok(gap_count)
}

fn write_diagnostics(path: &Path, records: &[(String, Vec<CellRecord>)]) -> anyhow::Result<()> {
    let mut wr = csv::Writer::from_writer(create(path)?);
    wr.write_record(["model", "origin", "quantity", "inefficiency"])?;
    for (model, recs) in records {
        for r in recs {
            for (name, f) in &r.inefficiency {
                wr.write_record([
                    model.clone(),
                    r.origin.to_string(),
                    name.clone(),
                    f.to_string(),
                ])?;
            }
            if let Some(a) = r.hyper_acceptance {
                wr.write_record([
                    model.clone(),
                    r.origin.to_string(),
                    "hyper_acceptance".into(),
                    a.to_string(),
                ])?;
            }
        }
    }
    wr.flush()?;
    Ok(())
}

/// Quantile-LASSO summaries of `cfg.lasso_model`'s predictive quantiles, one
/// pair of files per dataset and horizon. Returns the files written.
pub fn summarize_lasso(cfg: &RunConfig, plan: &Plan) -> anyhow::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for d in &plan.designs {
        let dataset = d.variant().slug();
        let h = d.horizon();
        let mut recs = Vec::new();
        for &origin in &d.origins {
            let path = record_path(&cfg.output, &cell_key(&cfg.lasso_model, dataset, h, origin));
            if path.is_file() {
                let r = load_record(&path)?;
                if r.status == CellStatus::Done {
                    recs.push(r);
                }
            }
        }
        let min_rows = 2 * DEFAULT_FOLDS;
        if recs.len() < min_rows {
            warn!(
                "{} {dataset} h={h}: {} completed origins, at least {min_rows} needed for the LASSO summary",
                cfg.lasso_model,
                recs.len()
            );
            continue;
        }
        let dates: Vec<Quarter> = recs.iter().map(|r| r.origin).collect();
        let q = DMatrix::from_fn(recs.len(), P_GRID.len(), |i, j| recs[i].quantiles[j]);
        let paths = QuantilePathSet::new(dates.clone(), q)?;
        let rows: Vec<usize> = dates
            .iter()
            .map(|o| {
                d.design
                    .dates
                    .iter()
                    .position(|x| x == o)
                    .with_context(|| format!("origin {o} is not in the design"))
            })
            .collect::<anyhow::Result<_>>()?;
        let x = DMatrix::from_fn(rows.len(), d.design.x.ncols(), |i, j| {
            d.design.x[(rows[i], j)]
        });
        let fits = summarize(&paths, &x, DEFAULT_FOLDS, LASSO_GRID)?;
        let dir = cfg
            .output
            .join("lasso")
            .join(format!("{}_{dataset}", cfg.lasso_model));
        fs::create_dir_all(&dir)?;
        let coef = dir.join(format!("lasso_{h}.csv"));
        let r2 = dir.join(format!("r2_{h}.csv"));
        write_heatmap_csv(
            &heatmap_data(&fits, &d.design.names, DISPLAY_FLOOR),
            create(&coef)?,
        )?;
        write_r2_csv(&fits, create(&r2)?)?;
        written.extend([coef, r2]);
    }
    Ok(written)
}
