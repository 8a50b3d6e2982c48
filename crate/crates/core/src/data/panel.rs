use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::quarter::Quarter;
use crate::data::transform::{diff_order, is_valid_code, transform_raw};
use crate::error::{Error, Result};

/// Dataset membership flags from the metadata sidecar.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Membership {
    pub moderate: bool,
    pub large: bool,
}

/// A dated quarterly multivariate panel with one transformation code per series.
///
/// Missing values are `NaN` and may only appear at the start or end of a series.
#[derive(Debug, Clone)]
pub struct SeriesPanel {
    dates: Vec<Quarter>,
    names: Vec<String>,
    /// one vector per series, each of length `dates.len()`
    values: Vec<Vec<f64>>,
    tcodes: Vec<u8>,
    membership: Vec<Membership>,
}

impl SeriesPanel {
    pub fn new(
        dates: Vec<Quarter>,
        names: Vec<String>,
        values: Vec<Vec<f64>>,
        tcodes: Vec<u8>,
        membership: Vec<Membership>,
    ) -> Result<Self> {
        for w in dates.windows(2) {
            if w[1].diff(&w[0]) != 1 {
                return Err(Error::Panel(format!(
                    "dates must be consecutive quarters, found {} followed by {}",
                    w[0], w[1]
                )));
            }
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::Panel(format!("duplicate series name `{n}`")));
            }
        }
        let n = names.len();
        if values.len() != n || tcodes.len() != n || membership.len() != n {
            return Err(Error::Panel(format!(
                "{n} names but {} value columns, {} tcodes, {} membership rows",
                values.len(),
                tcodes.len(),
                membership.len()
            )));
        }
        for (name, (col, &code)) in names.iter().zip(values.iter().zip(&tcodes)) {
            if col.len() != dates.len() {
                return Err(Error::Panel(format!(
                    "series `{name}` has {} values for {} dates",
                    col.len(),
                    dates.len()
                )));
            }
            if !is_valid_code(code) {
                return Err(Error::Panel(format!(
                    "series `{name}` has invalid transformation code {code}"
                )));
            }
            if let Some(i) = interior_gap(col) {
                return Err(Error::InteriorMissing {
                    series: name.clone(),
                    date: dates[i],
                });
            }
        }
        Ok(Self {
            dates,
            names,
            values,
            tcodes,
            membership,
        })
    }

    pub fn from_csv(data: impl AsRef<Path>, meta: impl AsRef<Path>) -> Result<Self> {
        let d = std::fs::File::open(data.as_ref())?;
        let m = std::fs::File::open(meta.as_ref())?;
        Self::from_readers(d, m)
    }

    /// Reads the data CSV (first column dates, header of series names) and the
    /// metadata CSV (`name,tcode,M,L`).
    pub fn from_readers<R1: Read, R2: Read>(data: R1, meta: R2) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(data);
        let header = rdr.headers()?.clone();
        if header.len() < 2 {
            return Err(Error::Panel(
                "data file needs a date column and at least one series".into(),
            ));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut dates = Vec::new();
        let mut values = vec![Vec::new(); names.len()];
        for rec in rdr.records() {
            let rec = rec?;
            dates.push(rec[0].parse::<Quarter>()?);
            for (j, col) in values.iter_mut().enumerate() {
                col.push(parse_value(rec.get(j + 1).unwrap_or(""))?);
            }
        }

        let mut mrdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(meta);
        let mut meta_rows = std::collections::HashMap::new();
        for rec in mrdr.records() {
            let rec = rec?;
            let name = rec.get(0).unwrap_or("").to_string();
            let code: u8 = rec
                .get(1)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::Panel(format!("bad tcode for `{name}`")))?;
            let flag = |i: usize| {
                matches!(
                    rec.get(i).unwrap_or("").to_ascii_lowercase().as_str(),
                    "x" | "1" | "true" | "yes" | "y"
                )
            };
            meta_rows.insert(
                name,
                (
                    code,
                    Membership {
                        moderate: flag(2),
                        large: flag(3),
                    },
                ),
            );
        }
        let mut tcodes = Vec::with_capacity(names.len());
        let mut membership = Vec::with_capacity(names.len());
        for n in &names {
            let (c, m) = meta_rows
                .get(n)
                .ok_or_else(|| Error::Panel(format!("series `{n}` missing from metadata")))?;
            tcodes.push(*c);
            membership.push(*m);
        }
        Self::new(dates, names, values, tcodes, membership)
    }

    pub fn write_csv<W1: Write, W2: Write>(&self, data: W1, meta: W2) -> Result<()> {
        let mut w = csv::Writer::from_writer(data);
        let mut header = vec!["date".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut row = vec![d.to_string()];
            for col in &self.values {
                let v = col[i];
                row.push(if v.is_finite() {
                    format!("{v}")
                } else {
                    String::new()
                });
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        let mut m = csv::Writer::from_writer(meta);
        m.write_record(["name", "tcode", "M", "L"])?;
        for (i, n) in self.names.iter().enumerate() {
            let f = |b: bool| if b { "x" } else { "" };
            m.write_record([
                n.as_str(),
                &self.tcodes[i].to_string(),
                f(self.membership[i].moderate),
                f(self.membership[i].large),
            ])?;
        }
        m.flush()?;
        Ok(())
    }

    pub fn dates(&self) -> &[Quarter] {
        &self.dates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tcodes(&self) -> &[u8] {
        &self.tcodes
    }

    pub fn membership(&self) -> &[Membership] {
        &self.membership
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.position(name).map(|i| self.values[i].as_slice())
    }

    /// Transformed series `j` aligned to the full date index, with `NaN` in the
    /// leading positions consumed by differencing.
    pub fn transformed_column(&self, j: usize) -> Result<Vec<f64>> {
        let code = self.tcodes[j];
        let raw = &self.values[j];
        let out = transform_raw(raw, code).map_err(|(i, reason)| Error::Transform {
            series: self.names[j].clone(),
            date: self.dates[i].to_string(),
            reason,
        })?;
        let mut full = vec![f64::NAN; diff_order(code)];
        full.extend(out);
        Ok(full)
    }

    /// Applies every series' code and trims the leading rows lost to the deepest
    /// differencing so that all columns share one date index.
    pub fn transform(&self) -> Result<(Vec<Quarter>, Vec<Vec<f64>>)> {
        let trim = self
            .tcodes
            .iter()
            .map(|&c| diff_order(c))
            .max()
            .unwrap_or(0);
        let mut cols = Vec::with_capacity(self.names.len());
        for j in 0..self.names.len() {
            let c = self.transformed_column(j)?;
            cols.push(c[trim..].to_vec());
        }
        Ok((self.dates[trim.min(self.dates.len())..].to_vec(), cols))
    }
}

fn parse_value(s: &str) -> Result<f64> {
    let t = s.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    t.parse::<f64>()
        .map_err(|_| Error::Panel(format!("cannot parse value `{t}`")))
}

/// Index of the first missing value strictly between the first and last observed values.
fn interior_gap(col: &[f64]) -> Option<usize> {
    let first = col.iter().position(|v| v.is_finite())?;
    let last = col.iter().rposition(|v| v.is_finite())?;
    (first..=last).find(|&i| !col[i].is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    const DATA: &str = "date,A,B\n2000Q1,1,\n2000Q2,2,5\n2000Q3,4,6\n2000Q4,8,7\n";
    const META: &str = "name,tcode,M,L\nA,5,x,x\nB,1,,x\n";

    #[test]
    fn reads_csv_with_edge_missing() {
        let p = SeriesPanel::from_readers(DATA.as_bytes(), META.as_bytes()).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.tcodes(), &[5, 1]);
        assert!(p.membership()[0].moderate && !p.membership()[1].moderate);
        assert!(p.series("B").unwrap()[0].is_nan());
    }

    #[test]
    fn transform_trims_consistently() {
        let p = SeriesPanel::from_readers(DATA.as_bytes(), META.as_bytes()).unwrap();
        let (dates, cols) = p.transform().unwrap();
        assert_eq!(dates.len(), 3);
        assert_eq!(dates[0].to_string(), "2000Q2");
        assert!(cols.iter().all(|c| c.len() == 3));
        assert!((cols[0][0] - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn interior_missing_is_an_error() {
        let data = "date,A\n2000Q1,1\n2000Q2,\n2000Q3,3\n";
        let meta = "name,tcode,M,L\nA,1,x,x\n";
        let err = SeriesPanel::from_readers(data.as_bytes(), meta.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::InteriorMissing { .. }));
    }

    #[test]
    fn rejects_gaps_and_duplicates() {
        let data = "date,A\n2000Q1,1\n2000Q3,3\n";
        let meta = "name,tcode,M,L\nA,1,x,x\n";
        assert!(SeriesPanel::from_readers(data.as_bytes(), meta.as_bytes()).is_err());
        let data = "date,A,A\n2000Q1,1,1\n";
        assert!(SeriesPanel::from_readers(data.as_bytes(), meta.as_bytes()).is_err());
    }

    #[test]
    fn log_code_error_names_series_and_date() {
        let data = "date,A\n2000Q1,1\n2000Q2,-1\n";
        let meta = "name,tcode,M,L\nA,5,x,x\n";
        let p = SeriesPanel::from_readers(data.as_bytes(), meta.as_bytes()).unwrap();
        match p.transform().unwrap_err() {
            Error::Transform { series, date, .. } => {
                assert_eq!(series, "A");
                assert_eq!(date, "2000Q2");
            }
            e => panic!("unexpected {e}"),
        }
    }
}
