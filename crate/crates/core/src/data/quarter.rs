use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A calendar quarter, e.g. `1980Q1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Quarter {
    year: i32,
    quarter: u8,
}

impl Quarter {
    pub fn new(year: i32, quarter: u8) -> Result<Self, Error> {
        if !(1..=4).contains(&quarter) {
            return Err(Error::Date(format!("{year}Q{quarter}")));
        }
        Ok(Self { year, quarter })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn quarter(&self) -> u8 {
        self.quarter
    }

    /// Quarters since year 0, used for spacing arithmetic.
    pub fn index(&self) -> i64 {
        self.year as i64 * 4 + (self.quarter as i64 - 1)
    }

    pub fn from_index(idx: i64) -> Self {
        Self {
            year: idx.div_euclid(4) as i32,
            quarter: (idx.rem_euclid(4) + 1) as u8,
        }
    }

    pub fn add(&self, quarters: i64) -> Self {
        Self::from_index(self.index() + quarters)
    }

    pub fn diff(&self, other: &Quarter) -> i64 {
        self.index() - other.index()
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.quarter)
    }
}

impl FromStr for Quarter {
    type Err = Error;

    /// Accepts `1980Q1`, `1980-Q1`, `1980:Q1` and quarter-start ISO dates (`1980-01-01`).
    fn from_str(s: &str) -> Result<Self, Error> {
        let t = s.trim();
        let bad = || Error::Date(s.to_string());
        let upper = t.to_ascii_uppercase();
        if let Some(pos) = upper.find('Q') {
            let year: i32 = upper[..pos]
                .trim_end_matches(['-', ':', ' '])
                .parse()
                .map_err(|_| bad())?;
            let q: u8 = upper[pos + 1..].parse().map_err(|_| bad())?;
            return Quarter::new(year, q).map_err(|_| bad());
        }
        let parts: Vec<&str> = t.split('-').collect();
        if parts.len() == 3 {
            let year: i32 = parts[0].parse().map_err(|_| bad())?;
            let month: u32 = parts[1].parse().map_err(|_| bad())?;
            let day: u32 = parts[2].parse().map_err(|_| bad())?;
            if day != 1 || !matches!(month, 1 | 4 | 7 | 10) {
                return Err(bad());
            }
            return Quarter::new(year, ((month - 1) / 3 + 1) as u8);
        }
        Err(bad())
    }
}

impl TryFrom<String> for Quarter {
    type Error = Error;
    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

impl From<Quarter> for String {
    fn from(q: Quarter) -> String {
        q.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_supported_formats() {
        let want = Quarter::new(1980, 3).unwrap();
        for s in ["1980Q3", "1980-Q3", "1980:Q3", "1980-07-01", "1980q3"] {
            assert_eq!(s.parse::<Quarter>().unwrap(), want, "{s}");
        }
        assert!("1980-08-01".parse::<Quarter>().is_err());
        assert!("1980Q5".parse::<Quarter>().is_err());
    }

    #[test]
    fn arithmetic_wraps_years() {
        let q = Quarter::new(1999, 4).unwrap();
        assert_eq!(q.add(1).to_string(), "2000Q1");
        assert_eq!(q.add(-4).to_string(), "1998Q4");
        assert_eq!(q.add(5).diff(&q), 5);
    }
}
