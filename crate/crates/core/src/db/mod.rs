//! SQL backend interface.
//!
//! [`Database`] is what the pipeline needs from an engine: run scripts,
//! drop everything, bulk-load CSV, list and dump tables. The embedded
//! single-file engine ([`SqliteDatabase`]) is always available; server
//! profiles are accepted by [`connect`] but this build ships no network
//! driver for them.

mod profile;
mod schema;
mod script;
mod sqlite;

use std::net::{TcpStream, ToSocketAddrs};
use std::path::Path;
use std::time::Duration;

pub use profile::{profile_from_config, ConnectionProfile, Engine};
pub use schema::{
    infer_schema, parse_boolean, parse_integer, parse_real, quote_ident, sanitize_header,
    sanitize_identifier, Column, SqlType, TableSchema, TypeEvidence, DEFAULT_SAMPLE_ROWS,
};
pub use script::{split_statements, SqlScript};
pub use sqlite::SqliteDatabase;

use crate::error::{EtlError, Result};

/// Rows per insert transaction in [`Database::load_csv`].
pub const LOAD_BATCH_ROWS: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl Value {
    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Integer(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Integer(i) => Some(*i as f64),
            Value::Real(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Text form used in table dumps; NULL renders as the empty string.
    pub fn render(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Integer(i) => i.to_string(),
            Value::Real(f) => f.to_string(),
            Value::Text(s) => s.clone(),
            Value::Blob(b) => hex::encode(b),
        }
    }
}

pub type Row = Vec<Value>;

pub trait Database: Send {
    /// Short engine name, used to pick `init.<engine>.sql` scripts.
    fn engine_name(&self) -> &'static str;

    /// Human-readable description, e.g. `sqlite 3.46.0 [/tmp/x.sqlite3]`.
    fn describe(&self) -> String;

    /// Executes every statement of `script` in one transaction and returns
    /// how many ran. On failure nothing is kept.
    fn run_script(&mut self, script: &SqlScript) -> Result<usize>;

    /// Drops every user table; returns how many were dropped.
    fn wipe(&mut self) -> Result<usize>;

    /// Sorted user table names.
    fn list_tables(&self) -> Result<Vec<String>>;

    /// Declared columns of `table`, or `None` if it does not exist.
    fn table_schema(&self, table: &str) -> Result<Option<TableSchema>>;

    /// Appends the rows of `csv` to `table`, creating it from the inferred
    /// schema when missing and `create_if_missing` is set.
    fn load_csv(&mut self, table: &str, csv: &Path, create_if_missing: bool) -> Result<u64>;

    fn query(&self, sql: &str) -> Result<Vec<Row>>;

    /// Streams the result rows of `sql` through `f` without collecting them.
    fn for_each_row(&self, sql: &str, f: &mut dyn FnMut(&[Value])) -> Result<()>;

    /// CSV export of `table` (header plus rows in insertion order).
    fn dump_table(&self, table: &str) -> Result<String>;
}

/// Opens the backend described by `profile`.
pub fn connect(profile: &ConnectionProfile) -> Result<Box<dyn Database>> {
    profile.validate()?;
    match profile.engine {
        Engine::EmbeddedFile => {
            let path = profile.path.as_deref().expect("validated");
            Ok(Box::new(SqliteDatabase::open(path)?))
        }
        Engine::Server => {
            let host = profile.host.as_deref().expect("validated");
            let port = profile.port.unwrap_or(3306);
            let addr = (host, port)
                .to_socket_addrs()
                .map_err(|e| EtlError::DbUnreachable(format!("{host}:{port}: {e}")))?
                .next()
                .ok_or_else(|| EtlError::DbUnreachable(format!("{host}:{port}: no address")))?;
            TcpStream::connect_timeout(&addr, Duration::from_secs(3))
                .map_err(|e| EtlError::DbUnreachable(format!("{host}:{port}: {e}")))?;
            Err(EtlError::DbUnreachable(format!(
                "{host}:{port} answered, but no client driver for server engines is built in"
            )))
        }
    }
}

/// Dumps every table, keyed by name.
pub fn dump_all(db: &dyn Database) -> Result<std::collections::BTreeMap<String, String>> {
    db.list_tables()?
        .into_iter()
        .map(|t| db.dump_table(&t).map(|d| (t, d)))
        .collect()
}
