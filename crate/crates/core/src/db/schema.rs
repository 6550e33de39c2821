//! Column type inference for CSV files.
//!
//! A column is INTEGER when every non-empty sampled value parses as a
//! 64-bit integer, otherwise REAL when every value parses as a finite
//! float, otherwise BOOLEAN when every value is one of
//! `true/false/TRUE/FALSE/0/1`, otherwise TEXT. Empty strings are nulls
//! and never constrain the type. A column with no non-empty sample value
//! is TEXT.
//!
//! Numbers must read back as they were written: `02134` and `+5` are text,
//! and a column mixing fractions with integers beyond 2^53 is TEXT rather
//! than REAL.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EtlError, Result};

pub const DEFAULT_SAMPLE_ROWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SqlType {
    Boolean,
    Integer,
    Real,
    Text,
}

impl SqlType {
    pub fn as_sql(&self) -> &'static str {
        match self {
            SqlType::Boolean => "BOOLEAN",
            SqlType::Integer => "INTEGER",
            SqlType::Real => "REAL",
            SqlType::Text => "TEXT",
        }
    }

    /// Maps a declared column type back onto the lattice using SQLite's
    /// affinity rules.
    pub fn from_declared(decl: &str) -> SqlType {
        let d = decl.to_ascii_uppercase();
        if d.contains("BOOL") {
            SqlType::Boolean
        } else if d.contains("INT") {
            SqlType::Integer
        } else if d.contains("CHAR") || d.contains("CLOB") || d.contains("TEXT") {
            SqlType::Text
        } else if d.contains("REAL") || d.contains("FLOA") || d.contains("DOUB") || d.contains("NUM") || d.contains("DEC") {
            SqlType::Real
        } else {
            SqlType::Text
        }
    }
}

impl fmt::Display for SqlType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_sql())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub sql_type: SqlType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub table: String,
    pub columns: Vec<Column>,
}

impl TableSchema {
    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn create_statement(&self) -> String {
        let cols: Vec<String> = self
            .columns
            .iter()
            .map(|c| format!("{} {}", quote_ident(&c.name), c.sql_type))
            .collect();
        format!("CREATE TABLE {} ({})", quote_ident(&self.table), cols.join(", "))
    }
}

pub fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

/// `007` or `+5` would not survive a round trip through a number, so
/// values spelled like that stay text.
fn non_canonical_digits(v: &str) -> bool {
    let unsigned = v.strip_prefix('-').unwrap_or(v);
    let b = unsigned.as_bytes();
    v.starts_with('+') || (b.len() > 1 && b[0] == b'0' && b[1].is_ascii_digit())
}

pub fn parse_integer(v: &str) -> Option<i64> {
    if non_canonical_digits(v) {
        return None;
    }
    v.parse().ok()
}

pub fn parse_real(v: &str) -> Option<f64> {
    // f64::from_str also accepts "inf" and "NaN"; those stay text
    if non_canonical_digits(v)
        || !v.bytes().any(|b| b.is_ascii_digit())
        || v.bytes().any(|b| b.is_ascii_alphabetic() && b != b'e' && b != b'E')
    {
        return None;
    }
    v.parse::<f64>().ok().filter(|f| f.is_finite())
}

pub fn parse_boolean(v: &str) -> Option<bool> {
    match v {
        "true" | "TRUE" | "1" => Some(true),
        "false" | "FALSE" | "0" => Some(false),
        _ => None,
    }
}

/// Integers past 2^53 lose digits in a REAL column.
fn exact_as_real(v: &str) -> bool {
    const EXACT: u64 = 1 << 53;
    parse_real(v).is_some() && parse_integer(v).is_none_or(|n| n.unsigned_abs() <= EXACT)
}

/// Running evidence for one column. Each flag can only flip from `true`
/// to `false` as more values are observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TypeEvidence {
    pub seen: bool,
    pub all_integer: bool,
    pub all_real: bool,
    pub all_boolean: bool,
}

impl Default for TypeEvidence {
    fn default() -> Self {
        TypeEvidence {
            seen: false,
            all_integer: true,
            all_real: true,
            all_boolean: true,
        }
    }
}

impl TypeEvidence {
    pub fn observe(&mut self, value: &str) {
        if value.is_empty() {
            return;
        }
        self.seen = true;
        if self.all_integer && parse_integer(value).is_none() {
            self.all_integer = false;
        }
        if self.all_real && !exact_as_real(value) {
            self.all_real = false;
        }
        if self.all_boolean && parse_boolean(value).is_none() {
            self.all_boolean = false;
        }
    }

    pub fn resolve(&self) -> SqlType {
        if !self.seen {
            SqlType::Text
        } else if self.all_integer {
            SqlType::Integer
        } else if self.all_real {
            SqlType::Real
        } else if self.all_boolean {
            SqlType::Boolean
        } else {
            SqlType::Text
        }
    }
}

/// Turns a raw header cell into a safe identifier: every character outside
/// `[A-Za-z0-9_]` becomes `_`, and a leading digit gets a `_` prefix.
pub fn sanitize_identifier(raw: &str) -> String {
    let mut s: String = raw
        .trim()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if s.starts_with(|c: char| c.is_ascii_digit()) {
        s.insert(0, '_');
    }
    s
}

/// Sanitizes a whole header row, naming blank cells `column_<n>` and
/// suffixing repeats with `_2`, `_3`, ...
pub fn sanitize_header<'a, I: IntoIterator<Item = &'a str>>(raw: I) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, cell) in raw.into_iter().enumerate() {
        let mut base = sanitize_identifier(cell);
        if base.is_empty() {
            base = format!("column_{}", i + 1);
        }
        let mut name = base.clone();
        let mut n = 2;
        while !seen.insert(name.to_ascii_lowercase()) {
            name = format!("{base}_{n}");
            n += 1;
        }
        out.push(name);
    }
    out
}

pub(crate) fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(File::open(path)?))
}

pub(crate) fn map_csv_error(path: &Path, err: csv::Error) -> EtlError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.kind() {
        csv::ErrorKind::UnequalLengths { pos, .. } => EtlError::RaggedRows {
            file: path.to_path_buf(),
            line: pos.as_ref().map(|p| p.line()).unwrap_or(line),
        },
        _ => EtlError::Parse {
            file: path.to_path_buf(),
            line,
            message: err.to_string(),
        },
    }
}

pub(crate) fn read_header(path: &Path, rdr: &mut csv::Reader<File>) -> Result<Vec<String>> {
    let headers = rdr.headers().map_err(|e| map_csv_error(path, e))?;
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(EtlError::EmptyCsv(path.to_path_buf()));
    }
    Ok(sanitize_header(headers.iter()))
}

/// Infers a [`TableSchema`] from the first `sample_rows` data rows of a
/// CSV file. The table name is the file stem.
pub fn infer_schema(csv: &Path, sample_rows: usize) -> Result<TableSchema> {
    let mut rdr = csv_reader(csv)?;
    let names = read_header(csv, &mut rdr)?;
    let mut evidence = vec![TypeEvidence::default(); names.len()];
    for record in rdr.records().take(sample_rows) {
        let record = record.map_err(|e| map_csv_error(csv, e))?;
        for (ev, value) in evidence.iter_mut().zip(record.iter()) {
            ev.observe(value);
        }
    }
    let table = csv
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(TableSchema {
        table,
        columns: names
            .into_iter()
            .zip(evidence)
            .map(|(name, ev)| Column {
                name,
                sql_type: ev.resolve(),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_csv(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn cars_types() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_csv(dir.path(), "mtcars.csv", crate::sources::MTCARS_CSV);
        let schema = infer_schema(&p, DEFAULT_SAMPLE_ROWS).unwrap();
        assert_eq!(schema.table, "mtcars");
        let ty = |n: &str| schema.columns.iter().find(|c| c.name == n).unwrap().sql_type;
        assert_eq!(ty("model"), SqlType::Text);
        assert_eq!(ty("mpg"), SqlType::Real);
        assert_eq!(ty("cyl"), SqlType::Integer);
        assert_eq!(ty("vs"), SqlType::Integer);
        assert_eq!(schema.columns.len(), 12);
    }

    #[test]
    fn nulls_do_not_constrain() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_csv(dir.path(), "t.csv", "a,b,c,d\n1,,true,\n2,x,FALSE,\n,y,1,\n3,,0,\n");
        let s = infer_schema(&p, 1000).unwrap();
        let types: Vec<SqlType> = s.columns.iter().map(|c| c.sql_type).collect();
        assert_eq!(types, [SqlType::Integer, SqlType::Text, SqlType::Boolean, SqlType::Text]);
    }

    #[test]
    fn header_sanitization() {
        assert_eq!(sanitize_identifier("day of year"), "day_of_year");
        assert_eq!(sanitize_identifier("2nd-place"), "_2nd_place");
        assert_eq!(
            sanitize_header(["a", "a", "", "A b"]),
            vec!["a", "a_2", "column_3", "A_b"]
        );
    }

    #[test]
    fn real_parsing_rejects_words() {
        assert_eq!(parse_real("1e3"), Some(1000.0));
        assert_eq!(parse_real("inf"), None);
        assert_eq!(parse_real("NaN"), None);
        assert_eq!(parse_real("-2.5"), Some(-2.5));
        assert_eq!(parse_real("."), None);
    }

    #[test]
    fn wide_integers_keep_a_mixed_column_out_of_real() {
        let mut e = TypeEvidence::default();
        e.observe("1.5");
        e.observe("9007199254740992");
        assert_eq!(e.resolve(), SqlType::Real);
        e.observe("9007199254740993");
        assert_eq!(e.resolve(), SqlType::Text);

        let mut e = TypeEvidence::default();
        e.observe("9007199254740993");
        assert_eq!(e.resolve(), SqlType::Integer);
    }

    #[test]
    fn leading_zeros_stay_text() {
        assert_eq!(parse_integer("02134"), None);
        assert_eq!(parse_integer("+5"), None);
        assert_eq!(parse_integer("0"), Some(0));
        assert_eq!(parse_integer("-10"), Some(-10));
        assert_eq!(parse_real("007.5"), None);
        assert_eq!(parse_real("0.75"), Some(0.75));
        assert_eq!(parse_real("-0.5"), Some(-0.5));
    }

    #[test]
    fn empty_and_ragged_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_csv(dir.path(), "e.csv", "");
        assert!(matches!(infer_schema(&p, 10), Err(EtlError::EmptyCsv(_))));
        let p = write_csv(dir.path(), "r.csv", "a,b\n1,2\n3\n");
        assert!(matches!(infer_schema(&p, 10), Err(EtlError::RaggedRows { line: 3, .. })));
    }

    fn rank(t: SqlType) -> u8 {
        match t {
            SqlType::Integer => 0,
            SqlType::Real | SqlType::Boolean => 1,
            SqlType::Text => 2,
        }
    }

    fn reachable(from: SqlType, to: SqlType) -> bool {
        from == to
            || match (from, to) {
                (SqlType::Integer, _) => true,
                (SqlType::Real, SqlType::Text) | (SqlType::Boolean, SqlType::Text) => true,
                _ => false,
            }
    }

    proptest! {
        // widening the sample only moves a column up the lattice
        #[test]
        fn inference_is_monotone(
            values in proptest::collection::vec(
                prop_oneof!["", "0", "1", "-7", "42", "2.5", "1e3", "true", "FALSE", "abc"],
                1..40,
            ),
            cut in 0usize..40,
        ) {
            let cut = cut.min(values.len());
            let mut ev = TypeEvidence::default();
            for v in &values[..cut] { ev.observe(v); }
            let before = ev;
            for v in &values[cut..] { ev.observe(v); }
            if before.seen {
                prop_assert!(reachable(before.resolve(), ev.resolve()));
                prop_assert!(rank(before.resolve()) <= rank(ev.resolve()));
            }
        }
    }
}
