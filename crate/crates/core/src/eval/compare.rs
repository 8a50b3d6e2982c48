use log::warn;
use serde::Serialize;

use crate::data::Quarter;
use crate::engine::P_GRID;
use crate::error::{Error, Result};
use crate::eval::scores::{mean_qs_rows, ScorePanel};

/// One row of the comparison table: MSE ratio and mean LPL difference against the
/// benchmark, the quantile-score ratios, and the model's own levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelativeRow {
    pub model: String,
    pub mse_ratio: f64,
    pub lpl_diff: f64,
    pub qs_ratio: Vec<f64>,
    pub mse: f64,
    pub lpl: f64,
    pub n: usize,
}

fn check_aligned(model: &ScorePanel, bench: &ScorePanel) -> Result<()> {
    if model.origins != bench.origins || model.horizon != bench.horizon {
        return Err(Error::Alignment(format!(
            "{} ({} origins, h={}) and benchmark {} ({} origins, h={}) are scored on different origins",
            model.model,
            model.len(),
            model.horizon,
            bench.model,
            bench.len(),
            bench.horizon
        )));
    }
    if model.is_empty() {
        return Err(Error::Alignment(format!(
            "{} has no scored origins",
            model.model
        )));
    }
    Ok(())
}

/// Relative table over `panels`; the benchmark's own row is exactly 1 and 0.
pub fn relative_table(panels: &[ScorePanel], bench: &ScorePanel) -> Result<Vec<RelativeRow>> {
    let (b_mse, b_lpl, b_qs) = (bench.mse(), bench.mean_lpl(), bench.mean_qs());
    panels
        .iter()
        .map(|p| {
            check_aligned(p, bench)?;
            let (mse, lpl, qs) = (p.mse(), p.mean_lpl(), p.mean_qs());
            Ok(RelativeRow {
                model: p.model.clone(),
                mse_ratio: mse / b_mse,
                lpl_diff: lpl - b_lpl,
                qs_ratio: qs.iter().zip(&b_qs).map(|(a, b)| a / b).collect(),
                mse,
                lpl,
                n: p.len(),
            })
        })
        .collect()
}

pub fn write_table_csv<W: std::io::Write>(rows: &[RelativeRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["model".to_string(), "mse_ratio".into(), "lpl_diff".into()];
    header.extend(P_GRID.iter().map(|p| format!("qs_ratio_{p}")));
    header.extend(["mse".into(), "lpl".into(), "n".into()]);
    wr.write_record(&header)?;
    for r in rows {
        let mut row = vec![
            r.model.clone(),
            format!("{:.3}", r.mse_ratio),
            format!("{:.3}", r.lpl_diff),
        ];
        row.extend(r.qs_ratio.iter().map(|v| format!("{v:.3}")));
        row.extend([r.mse.to_string(), r.lpl.to_string(), r.n.to_string()]);
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Running sum of per-origin score differences, oriented so that an upward path
/// favours the model: `model - benchmark` when higher scores are better (LPL),
/// `benchmark - model` for losses (QS, squared error).
pub fn cumulative_path(
    dates: &[Quarter],
    model: &[f64],
    bench: &[f64],
    higher_is_better: bool,
) -> Result<Vec<(Quarter, f64)>> {
    if model.len() != bench.len() || dates.len() != model.len() {
        return Err(Error::Alignment(format!(
            "cumulative path needs aligned series ({} dates, {} model, {} benchmark)",
            dates.len(),
            model.len(),
            bench.len()
        )));
    }
    let mut acc = 0.0;
    Ok(dates
        .iter()
        .zip(model.iter().zip(bench))
        .map(|(d, (m, b))| {
            acc += if higher_is_better { m - b } else { b - m };
            (*d, acc)
        })
        .collect())
}

/// Inclusive range of outcome dates with a label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Window {
    pub label: String,
    pub start: Quarter,
    pub end: Quarter,
}

impl Window {
    pub fn new(label: &str, start: Quarter, end: Quarter) -> Self {
        Self {
            label: label.to_string(),
            start,
            end,
        }
    }
}

/// The four decades used for the quantile-score breakdown.
pub fn decade_windows() -> Vec<Window> {
    let q = |y, p| Quarter::new(y, p).expect("valid quarter");
    vec![
        Window::new("1980-1990", q(1980, 1), q(1990, 4)),
        Window::new("1991-2000", q(1991, 1), q(2000, 4)),
        Window::new("2001-2010", q(2001, 1), q(2010, 4)),
        Window::new("2011-2021", q(2011, 1), q(2021, 4)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsampleRow {
    pub model: String,
    pub window: String,
    pub qs_ratio: Vec<f64>,
    pub n: usize,
}

/// Quantile-score ratios to the benchmark within each window of outcome dates.
/// Windows without scored outcomes are omitted.
pub fn subsample_average(
    panel: &ScorePanel,
    bench: &ScorePanel,
    windows: &[Window],
) -> Result<Vec<SubsampleRow>> {
    check_aligned(panel, bench)?;
    let mut out = Vec::new();
    for w in windows {
        let rows: Vec<usize> = (0..panel.len())
            .filter(|&i| {
                let d = panel.target_date(i);
                d >= w.start && d <= w.end
            })
            .collect();
        if rows.is_empty() {
            warn!(
                "no scored outcomes of {} in window {}; omitted",
                panel.model, w.label
            );
            continue;
        }
        let m = mean_qs_rows(rows.iter().map(|&i| &panel.qs[i]));
        let b = mean_qs_rows(rows.iter().map(|&i| &bench.qs[i]));
        out.push(SubsampleRow {
            model: panel.model.clone(),
            window: w.label.clone(),
            qs_ratio: m.iter().zip(&b).map(|(a, c)| a / c).collect(),
            n: rows.len(),
        });
    }
    Ok(out)
}

pub fn write_subsamples_csv<W: std::io::Write>(rows: &[SubsampleRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["model".to_string(), "window".into()];
    header.extend(P_GRID.iter().map(|p| format!("qs_ratio_{p}")));
    header.push("n".into());
    wr.write_record(&header)?;
    for r in rows {
        let mut row = vec![r.model.clone(), r.window.clone()];
        row.extend(r.qs_ratio.iter().map(|v| format!("{v:.3}")));
        row.push(r.n.to_string());
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Writes cumulative paths side by side, one column per model.
pub fn write_cumulative_csv<W: std::io::Write>(
    paths: &[(String, Vec<(Quarter, f64)>)],
    w: W,
) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["date".to_string()];
    header.extend(paths.iter().map(|(m, _)| m.clone()));
    wr.write_record(&header)?;
    let n = paths.first().map_or(0, |(_, p)| p.len());
    for i in 0..n {
        let mut row = vec![paths[0].1[i].0.to_string()];
        for (m, p) in paths {
            let (d, v) = p
                .get(i)
                .ok_or_else(|| Error::Alignment(format!("path of {m} is shorter")))?;
            if *d != paths[0].1[i].0 {
                return Err(Error::Alignment(format!(
                    "path of {m} is misaligned at {d}"
                )));
            }
            row.push(v.to_string());
        }
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(model: &str, errors: &[f64], lpl: &[f64], qs: &[[f64; 5]]) -> ScorePanel {
        let start = Quarter::new(1990, 1).unwrap();
        let n = errors.len();
        ScorePanel {
            model: model.into(),
            horizon: 1,
            origins: (0..n).map(|i| start.add(i as i64)).collect(),
            outcomes: vec![0.0; n],
            point: errors.iter().map(|e| -e).collect(),
            sq_errors: errors.iter().map(|e| e * e).collect(),
            lpl: lpl.to_vec(),
            qs: qs.iter().map(|r| r.to_vec()).collect(),
            pits: vec![0.5; n],
        }
    }

    #[test]
    fn self_comparison_is_neutral() {
        let b = panel(
            "uc-sv",
            &[1.0, -2.0, 0.5],
            &[-1.0, -2.5, -0.7],
            &[[0.1, 0.2, 0.3, 0.2, 0.1]; 3],
        );
        let t = relative_table(std::slice::from_ref(&b), &b).unwrap();
        assert_eq!(t[0].mse_ratio, 1.0);
        assert_eq!(t[0].lpl_diff, 0.0);
        assert!(t[0].qs_ratio.iter().all(|r| *r == 1.0));
    }

    #[test]
    fn halved_errors_quarter_the_mse() {
        let b = panel("uc-sv", &[1.0, -2.0, 0.5], &[0.0; 3], &[[1.0; 5]; 3]);
        let m = panel("gp-sv", &[0.5, -1.0, 0.25], &[0.0; 3], &[[1.0; 5]; 3]);
        let t = relative_table(&[m], &b).unwrap();
        assert!((t[0].mse_ratio - 0.25).abs() < 1e-15);
    }

    #[test]
    fn two_model_fixture() {
        let b = panel(
            "uc-sv",
            &[2.0, 1.0],
            &[-1.0, -2.0],
            &[[0.2, 0.4, 1.0, 0.4, 0.2], [0.2, 0.2, 0.5, 0.2, 0.2]],
        );
        let m = panel(
            "gp-dpm",
            &[1.0, 1.0],
            &[-0.5, -1.0],
            &[[0.1, 0.2, 0.5, 0.2, 0.1], [0.1, 0.3, 0.5, 0.3, 0.1]],
        );
        let t = relative_table(&[m], &b).unwrap();
        // mse 1 vs 2.5, lpl -0.75 vs -1.5
        assert!((t[0].mse_ratio - 0.4).abs() < 1e-15);
        assert!((t[0].lpl_diff - 0.75).abs() < 1e-15);
        let expected = [0.5, 5.0 / 6.0, 2.0 / 3.0, 5.0 / 6.0, 0.5];
        for (a, e) in t[0].qs_ratio.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12, "{a} {e}");
        }
    }

    #[test]
    fn misaligned_panels_are_rejected() {
        let b = panel("uc-sv", &[1.0, 2.0], &[0.0; 2], &[[1.0; 5]; 2]);
        let m = panel("gp-sv", &[1.0], &[0.0], &[[1.0; 5]]);
        assert!(matches!(relative_table(&[m], &b), Err(Error::Alignment(_))));
    }

    #[test]
    fn cumulative_paths() {
        let dates: Vec<Quarter> = (0..10)
            .map(|i| Quarter::new(2000, 1).unwrap().add(i))
            .collect();
        let same = cumulative_path(&dates, &[0.3; 10], &[0.3; 10], true).unwrap();
        assert!(same.iter().all(|(_, v)| *v == 0.0));
        let up = cumulative_path(&dates, &[0.1; 10], &[0.0; 10], true).unwrap();
        assert!((up[9].1 - 1.0).abs() < 1e-12);
        let m = [0.5, 0.2, 0.9, 0.1];
        let b = [0.4, 0.4, 0.4, 0.4];
        let loss = cumulative_path(&dates[..4], &m, &b, false).unwrap();
        let mut acc = 0.0;
        for i in 0..4 {
            acc += b[i] - m[i];
            assert!((loss[i].1 - acc).abs() < 1e-15);
        }
    }

    #[test]
    fn subsample_windows() {
        let b = panel(
            "uc-sv",
            &[1.0; 4],
            &[0.0; 4],
            &[[1.0; 5], [2.0; 5], [1.0; 5], [4.0; 5]],
        );
        let m = panel(
            "gp-sv",
            &[1.0; 4],
            &[0.0; 4],
            &[[0.5; 5], [1.0; 5], [1.0; 5], [1.0; 5]],
        );
        // outcomes dated 1990Q2..1991Q1
        let full = vec![Window::new(
            "all",
            Quarter::new(1990, 1).unwrap(),
            Quarter::new(1991, 4).unwrap(),
        )];
        let all = subsample_average(&m, &b, &full).unwrap();
        let table = relative_table(std::slice::from_ref(&m), &b).unwrap();
        assert_eq!(all[0].qs_ratio, table[0].qs_ratio);
        let split = vec![
            Window::new(
                "a",
                Quarter::new(1990, 1).unwrap(),
                Quarter::new(1990, 3).unwrap(),
            ),
            Window::new(
                "b",
                Quarter::new(1990, 4).unwrap(),
                Quarter::new(1991, 4).unwrap(),
            ),
            Window::new(
                "empty",
                Quarter::new(1995, 1).unwrap(),
                Quarter::new(1995, 4).unwrap(),
            ),
        ];
        let rows = subsample_average(&m, &b, &split).unwrap();
        assert_eq!(rows.len(), 2);
        assert!((rows[0].qs_ratio[0] - 1.5 / 3.0).abs() < 1e-15);
        assert!((rows[1].qs_ratio[0] - 2.0 / 5.0).abs() < 1e-15);
        let own = subsample_average(&b, &b, &split).unwrap();
        assert!(own.iter().all(|r| r.qs_ratio.iter().all(|v| *v == 1.0)));
    }
}
