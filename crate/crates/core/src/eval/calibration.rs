use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::{kolmogorov_critical, ks_test};

/// Empirical CDF of the PITs on a uniform grid with a Kolmogorov band around the
/// diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub grid: Vec<f64>,
    pub ecdf: Vec<f64>,
    /// half-width of the band around the 45-degree line
    pub band: f64,
    pub n: usize,
}

impl Calibration {
    /// Whether every grid point lies inside the band.
    pub fn inside_band(&self) -> bool {
        self.grid
            .iter()
            .zip(&self.ecdf)
            .all(|(g, e)| (e - g).abs() <= self.band)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["grid", "ecdf", "lower", "upper"])?;
        for (g, e) in self.grid.iter().zip(&self.ecdf) {
            wr.write_record([
                g.to_string(),
                e.to_string(),
                (g - self.band).to_string(),
                (g + self.band).to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// QQ points of the PITs against the uniform distribution at `grid_size` evenly
/// spaced points of `[0, 1]`, with band `c(level) / sqrt(n)` under an iid
/// uniform null.
pub fn rs_diagnostic(pits: &[f64], grid_size: usize, level: f64) -> Result<Calibration> {
    if pits.is_empty() {
        return Err(Error::Config("calibration needs at least one PIT".into()));
    }
    if !(level > 0.0 && level < 1.0) || grid_size < 2 {
        return Err(Error::Config(format!(
            "calibration needs level in (0,1) and at least two grid points, got {level} and {grid_size}"
        )));
    }
    let n = pits.len();
    let grid: Vec<f64> = (0..grid_size)
        .map(|i| i as f64 / (grid_size - 1) as f64)
        .collect();
    let ecdf = grid
        .iter()
        .map(|g| pits.iter().filter(|p| **p <= *g).count() as f64 / n as f64)
        .collect();
    Ok(Calibration {
        grid,
        ecdf,
        band: kolmogorov_critical(level) / (n as f64).sqrt(),
        n,
    })
}

/// Kolmogorov-Smirnov test of PIT uniformity; returns `(statistic, p-value)`.
pub fn pit_uniformity(pits: &[f64]) -> (f64, f64) {
    ks_test(pits, |x| x.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_matches_the_tabulated_critical_value() {
        let c = rs_diagnostic(&[0.5; 100], 11, 0.05).unwrap();
        assert!((c.band - 0.1358).abs() < 1e-4);
    }

    #[test]
    fn uniform_grid_lies_on_the_diagonal() {
        let n = 1000;
        let pits: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        let c = rs_diagnostic(&pits, 11, 0.05).unwrap();
        for (g, e) in c.grid.iter().zip(&c.ecdf) {
            assert!((g - e).abs() <= 1.0 / n as f64 + 1e-12);
        }
        assert!(c.inside_band());
    }

    #[test]
    fn miscalibration_leaves_the_band() {
        let pits: Vec<f64> = (0..400).map(|i| (i as f64 / 400.0).powi(3)).collect();
        assert!(!rs_diagnostic(&pits, 21, 0.05).unwrap().inside_band());
        assert!(pit_uniformity(&pits).1 < 0.01);
    }
}
