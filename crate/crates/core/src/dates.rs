//! Year/month selectors and date-stamped filename matching.
//!
//! Monthly data dumps are addressed by `(year, month)` pairs. A [`Selector`]
//! describes a set of such pairs the way a user would type it
//! (`years = 1996:1997, months = 1:6,9`) and expands to a sorted,
//! duplicate-free list of [`YearMonth`] values.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{EtlError, Result};

pub const MIN_YEAR: i32 = 1900;
pub const MAX_YEAR: i32 = 2100;

/// `true` when `month` is in 1..=12 and `year` in [`MIN_YEAR`]..=[`MAX_YEAR`].
pub fn valid_year_month(year: i32, month: i32) -> bool {
    (MIN_YEAR..=MAX_YEAR).contains(&year) && (1..=12).contains(&month)
}

/// A validated calendar month. Orders by year, then month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: i32) -> Result<Self> {
        if valid_year_month(year, month) {
            Ok(YearMonth {
                year,
                month: month as u32,
            })
        } else {
            Err(EtlError::InvalidDate {
                name: format!("{year}-{month}"),
                detail: format!(
                    "expected year in {MIN_YEAR}..={MAX_YEAR} and month in 1..=12"
                ),
            })
        }
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    /// Parses the compact `YYYYMM` form used in partitioned filenames.
    pub fn from_yyyymm(text: &str) -> Option<Self> {
        if text.len() != 6 || !text.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let year = text[..4].parse().ok()?;
        let month = text[4..].parse().ok()?;
        YearMonth::new(year, month).ok()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

/// Which months a verb should touch.
///
/// Expansion is the cross product `years × months` restricted to valid
/// pairs, plus any explicitly listed pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selector {
    pub years: BTreeSet<i32>,
    pub months: BTreeSet<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_pairs: Option<Vec<YearMonth>>,
}

impl Selector {
    /// All twelve months of the given years.
    pub fn years<I: IntoIterator<Item = i32>>(years: I) -> Self {
        Selector {
            years: years.into_iter().collect(),
            months: (1..=12).collect(),
            explicit_pairs: None,
        }
    }

    pub fn with_months<I: IntoIterator<Item = i32>>(mut self, months: I) -> Self {
        self.months = months.into_iter().collect();
        self
    }

    pub fn pairs<I: IntoIterator<Item = YearMonth>>(pairs: I) -> Self {
        Selector {
            years: BTreeSet::new(),
            months: BTreeSet::new(),
            explicit_pairs: Some(pairs.into_iter().collect()),
        }
    }

    /// Parses R-style range lists such as `"1996:1997"` and `"1:6,9"`.
    pub fn parse(years: &str, months: Option<&str>) -> Result<Self> {
        let years = parse_ranges(years)?;
        let months = match months {
            Some(m) => parse_ranges(m)?,
            None => (1..=12).collect(),
        };
        if let Some(bad) = months.iter().find(|m| !(1..=12).contains(*m)) {
            return Err(EtlError::InvalidSelector(format!(
                "month {bad} is outside 1..=12"
            )));
        }
        if let Some(bad) = years.iter().find(|y| !(MIN_YEAR..=MAX_YEAR).contains(*y)) {
            return Err(EtlError::InvalidSelector(format!(
                "year {bad} is outside {MIN_YEAR}..={MAX_YEAR}"
            )));
        }
        Ok(Selector {
            years,
            months,
            explicit_pairs: None,
        })
    }

    pub fn expand(&self) -> Vec<YearMonth> {
        expand_selector(self)
    }

    pub fn contains(&self, ym: YearMonth) -> bool {
        (self.years.contains(&ym.year) && self.months.contains(&(ym.month as i32)))
            || self
                .explicit_pairs
                .as_ref()
                .is_some_and(|pairs| pairs.contains(&ym))
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "years={} months={}",
            format_ranges(&self.years),
            format_ranges(&self.months)
        )?;
        if let Some(pairs) = &self.explicit_pairs {
            let pairs: Vec<String> = pairs.iter().map(ToString::to_string).collect();
            write!(f, " pairs={}", pairs.join(","))?;
        }
        Ok(())
    }
}

pub fn expand_selector(sel: &Selector) -> Vec<YearMonth> {
    let mut out: BTreeSet<YearMonth> = sel
        .years
        .iter()
        .flat_map(|&y| sel.months.iter().map(move |&m| (y, m)))
        .filter_map(|(y, m)| YearMonth::new(y, m).ok())
        .collect();
    if let Some(pairs) = &sel.explicit_pairs {
        out.extend(pairs.iter().copied());
    }
    out.into_iter().collect()
}

/// Parses a comma-separated list of integers and inclusive `a:b` ranges.
pub fn parse_ranges<T>(text: &str) -> Result<BTreeSet<T>>
where
    T: FromStr + Ord + Copy + Into<i64> + TryFrom<i64>,
{
    let bad = |part: &str| EtlError::InvalidSelector(format!("cannot parse '{part}' in '{text}'"));
    let mut out = BTreeSet::new();
    for part in text.split(',').map(str::trim) {
        if part.is_empty() {
            return Err(bad(part));
        }
        match part.split_once(':') {
            Some((lo, hi)) => {
                let lo: T = lo.trim().parse().map_err(|_| bad(part))?;
                let hi: T = hi.trim().parse().map_err(|_| bad(part))?;
                let (lo, hi) = (lo.into(), hi.into());
                let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
                if hi - lo > 10_000 {
                    return Err(EtlError::InvalidSelector(format!("range '{part}' is too wide")));
                }
                for v in lo..=hi {
                    out.insert(T::try_from(v).map_err(|_| bad(part))?);
                }
            }
            None => {
                out.insert(part.parse().map_err(|_| bad(part))?);
            }
        }
    }
    Ok(out)
}

fn format_ranges(values: &BTreeSet<i32>) -> String {
    let mut parts = Vec::new();
    let mut iter = values.iter().copied().peekable();
    while let Some(start) = iter.next() {
        let mut end = start;
        while iter.peek() == Some(&(end + 1)) {
            end = iter.next().unwrap();
        }
        if start == end {
            parts.push(start.to_string());
        } else {
            parts.push(format!("{start}:{end}"));
        }
    }
    parts.join(",")
}

/// Pulls a [`YearMonth`] out of a file name.
///
/// Only the final path component is examined. The first capture group of
/// `pattern` must be a `YYYYMM` stamp. A name the pattern does not match
/// yields `Ok(None)`; a match whose capture is not a valid month is an
/// [`EtlError::InvalidDate`].
pub fn extract_date_from_filename(name: &str, pattern: &Regex) -> Result<Option<YearMonth>> {
    let base = Path::new(name)
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or(name);
    let Some(caps) = pattern.captures(base) else {
        return Ok(None);
    };
    let stamp = caps
        .get(1)
        .ok_or_else(|| EtlError::InvalidDate {
            name: base.to_string(),
            detail: "pattern has no capture group".into(),
        })?
        .as_str();
    YearMonth::from_yyyymm(stamp).map(Some).ok_or_else(|| EtlError::InvalidDate {
        name: base.to_string(),
        detail: format!("'{stamp}' is not a valid YYYYMM stamp"),
    })
}

/// Keeps the paths whose date stamp falls inside `sel`, preserving order.
pub fn match_files_by_year_months<P: AsRef<Path>>(
    paths: &[P],
    pattern: &Regex,
    sel: &Selector,
) -> Result<Vec<PathBuf>> {
    let wanted: BTreeSet<YearMonth> = expand_selector(sel).into_iter().collect();
    let mut out = Vec::new();
    for p in paths {
        let p = p.as_ref();
        let name = p.to_string_lossy();
        if let Some(ym) = extract_date_from_filename(&name, pattern)? {
            if wanted.contains(&ym) {
                out.push(p.to_path_buf());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn year_month_validity() {
        assert!(valid_year_month(2013, 9));
        assert!(!valid_year_month(2013, 13));
        assert!(!valid_year_month(1996, 0));
        assert!(!valid_year_month(1899, 5));
        assert!(valid_year_month(2100, 12));
    }

    #[test]
    fn worked_selectors() {
        let s = Selector::years([1996, 1997]).with_months([1, 2, 3, 4, 5, 6, 9]);
        assert_eq!(s.expand().len(), 14);
        let s = Selector::parse("2014", Some("4:7")).unwrap();
        let got = s.expand();
        assert_eq!(got.len(), 4);
        assert_eq!(got[0], YearMonth::new(2014, 4).unwrap());
        assert!(Selector::years(Vec::<i32>::new()).expand().is_empty());
    }

    #[test]
    fn parse_ranges_and_display() {
        let s = Selector::parse("1996:1997", Some("1:6,9")).unwrap();
        assert_eq!(s.to_string(), "years=1996:1997 months=1:6,9");
        assert!(Selector::parse("2014", Some("13")).is_err());
        assert!(Selector::parse("2014", Some("0:3")).is_err());
        assert!(Selector::parse("abc", None).is_err());
        assert!(Selector::parse("2014,", None).is_err());
    }

    #[test]
    fn filename_dates() {
        let pat = Regex::new(r"^(\d{6})-").unwrap();
        assert_eq!(
            extract_date_from_filename("201307-citibike-tripdata.zip", &pat).unwrap(),
            Some(YearMonth::new(2013, 7).unwrap())
        );
        assert_eq!(extract_date_from_filename("readme.txt", &pat).unwrap(), None);
        assert!(matches!(
            extract_date_from_filename("201313-x.zip", &pat),
            Err(EtlError::InvalidDate { .. })
        ));
        // directory components are ignored
        assert_eq!(
            extract_date_from_filename("/tmp/201401-a/readme.txt", &pat).unwrap(),
            None
        );
    }

    #[test]
    fn matching_keeps_order_and_skips_undated() {
        let pat = Regex::new(r"^(\d{6})-").unwrap();
        let files: Vec<String> = [2013, 2014]
            .iter()
            .flat_map(|y| (1..=12).map(move |m| format!("{y}{m:02}-trips.zip")))
            .chain(["notes.txt".to_string()])
            .collect();
        let got = match_files_by_year_months(&files, &pat, &Selector::years([2013])).unwrap();
        assert_eq!(got.len(), 12);
        assert!(got.iter().all(|p| p.to_string_lossy().starts_with("2013")));
        let none = match_files_by_year_months(&files, &pat, &Selector::years([1999])).unwrap();
        assert!(none.is_empty());
    }

    proptest! {
        #[test]
        fn expansion_strictly_increasing(
            years in proptest::collection::btree_set(1890i32..2110, 0..6),
            months in proptest::collection::btree_set(-1i32..14, 0..14),
        ) {
            let sel = Selector { years, months, explicit_pairs: None };
            let out = sel.expand();
            prop_assert!(out.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(out.iter().all(|ym| valid_year_month(ym.year(), ym.month() as i32)));
            for ym in &out {
                prop_assert!(sel.contains(*ym));
            }
        }
    }
}
