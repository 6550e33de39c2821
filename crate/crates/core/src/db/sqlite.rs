use std::path::{Path, PathBuf};

use rusqlite::types::{Value as SqlValue, ValueRef};
use rusqlite::{params_from_iter, Connection, OpenFlags};

use super::schema::{csv_reader, map_csv_error, read_header};
use super::{
    infer_schema, parse_boolean, parse_integer, parse_real, quote_ident, Column, Database, Row,
    SqlScript, SqlType, TableSchema, Value, DEFAULT_SAMPLE_ROWS, LOAD_BATCH_ROWS,
};
use crate::error::{EtlError, Result};

/// The embedded single-file engine.
pub struct SqliteDatabase {
    conn: Connection,
    path: PathBuf,
}

impl SqliteDatabase {
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            if !parent.is_dir() {
                return Err(EtlError::DbUnreachable(format!(
                    "directory {} does not exist",
                    parent.display()
                )));
            }
        }
        let conn = Connection::open_with_flags(
            path,
            OpenFlags::SQLITE_OPEN_READ_WRITE | OpenFlags::SQLITE_OPEN_CREATE,
        )
        .map_err(|e| EtlError::DbUnreachable(format!("{}: {e}", path.display())))?;
        conn.pragma_update(None, "synchronous", "NORMAL")?;
        Ok(SqliteDatabase {
            conn,
            path: path.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn connection(&self) -> &Connection {
        &self.conn
    }
}

fn to_value(v: ValueRef<'_>) -> Value {
    match v {
        ValueRef::Null => Value::Null,
        ValueRef::Integer(i) => Value::Integer(i),
        ValueRef::Real(f) => Value::Real(f),
        ValueRef::Text(t) => Value::Text(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Value::Blob(b.to_vec()),
    }
}

/// Converts one CSV field for a column of type `ty`. Values that do not fit
/// the declared type are stored as text, mirroring the engine's affinity.
fn bind_field(field: &str, ty: SqlType) -> SqlValue {
    if field.is_empty() {
        return SqlValue::Null;
    }
    let text = || SqlValue::Text(field.to_string());
    match ty {
        SqlType::Integer => parse_integer(field)
            .map(SqlValue::Integer)
            .or_else(|| parse_real(field).map(SqlValue::Real))
            .unwrap_or_else(text),
        SqlType::Real => parse_real(field).map(SqlValue::Real).unwrap_or_else(text),
        SqlType::Boolean => parse_boolean(field)
            .map(|b| SqlValue::Integer(b as i64))
            .unwrap_or_else(text),
        SqlType::Text => text(),
    }
}

impl Database for SqliteDatabase {
    fn engine_name(&self) -> &'static str {
        "sqlite"
    }

    fn describe(&self) -> String {
        format!("sqlite {} [{}]", rusqlite::version(), self.path.display())
    }

    fn run_script(&mut self, script: &SqlScript) -> Result<usize> {
        let tx = self.conn.transaction()?;
        for (i, stmt) in script.statements().iter().enumerate() {
            tx.execute_batch(stmt).map_err(|e| EtlError::Script {
                index: i + 1,
                message: e.to_string(),
            })?;
        }
        tx.commit()?;
        Ok(script.len())
    }

    fn wipe(&mut self) -> Result<usize> {
        let tables = self.list_tables()?;
        let views: Vec<String> = self
            .conn
            .prepare("SELECT name FROM sqlite_master WHERE type = 'view'")?
            .query_map([], |r| r.get(0))?
            .collect::<rusqlite::Result<_>>()?;
        self.conn.pragma_update(None, "foreign_keys", "OFF")?;
        let tx = self.conn.transaction()?;
        for v in &views {
            tx.execute_batch(&format!("DROP VIEW IF EXISTS {}", quote_ident(v)))?;
        }
        for t in &tables {
            tx.execute_batch(&format!("DROP TABLE IF EXISTS {}", quote_ident(t)))?;
        }
        tx.commit()?;
        Ok(tables.len())
    }

    fn list_tables(&self) -> Result<Vec<String>> {
        let mut names: Vec<String> = self
            .conn
            .prepare(
                "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite\\_%' ESCAPE '\\'",
            )?
            .query_map([], |r| r.get(0))?
            .collect::<rusqlite::Result<_>>()?;
        names.sort();
        Ok(names)
    }

    fn table_schema(&self, table: &str) -> Result<Option<TableSchema>> {
        let mut stmt = self
            .conn
            .prepare(&format!("PRAGMA table_info({})", quote_ident(table)))?;
        let columns: Vec<Column> = stmt
            .query_map([], |r| {
                let name: String = r.get(1)?;
                let decl: String = r.get(2)?;
                Ok(Column {
                    name,
                    sql_type: SqlType::from_declared(&decl),
                })
            })?
            .collect::<rusqlite::Result<_>>()?;
        Ok((!columns.is_empty()).then(|| TableSchema {
            table: table.to_string(),
            columns,
        }))
    }

    fn load_csv(&mut self, table: &str, csv: &Path, create_if_missing: bool) -> Result<u64> {
        let mut rdr = csv_reader(csv)?;
        let header = read_header(csv, &mut rdr)?;

        // full pass first so a ragged row cannot leave a half-loaded table
        let mut record = csv::StringRecord::new();
        while rdr
            .read_record(&mut record)
            .map_err(|e| map_csv_error(csv, e))?
        {}

        let schema = match self.table_schema(table)? {
            Some(existing) => {
                let names: Vec<&str> = existing.columns.iter().map(|c| c.name.as_str()).collect();
                let matches = header.len() <= names.len()
                    && header
                        .iter()
                        .zip(&names)
                        .all(|(h, n)| h.eq_ignore_ascii_case(n));
                if !matches {
                    return Err(EtlError::TypeMismatch {
                        table: table.to_string(),
                        detail: format!(
                            "CSV columns [{}] are not a prefix of table columns [{}]",
                            header.join(", "),
                            names.join(", ")
                        ),
                    });
                }
                existing
            }
            None if create_if_missing => {
                let mut inferred = infer_schema(csv, DEFAULT_SAMPLE_ROWS)?;
                inferred.table = table.to_string();
                self.conn.execute_batch(&inferred.create_statement())?;
                inferred
            }
            None => {
                return Err(EtlError::TypeMismatch {
                    table: table.to_string(),
                    detail: "table does not exist".into(),
                })
            }
        };

        let types: Vec<SqlType> = schema.columns[..header.len()]
            .iter()
            .map(|c| c.sql_type)
            .collect();
        let insert = format!(
            "INSERT INTO {} ({}) VALUES ({})",
            quote_ident(table),
            header.iter().map(|h| quote_ident(h)).collect::<Vec<_>>().join(", "),
            vec!["?"; header.len()].join(", ")
        );

        let mut rdr = csv_reader(csv)?;
        rdr.headers().map_err(|e| map_csv_error(csv, e))?;
        let mut rows = 0u64;
        let mut done = false;
        while !done {
            let tx = self.conn.transaction()?;
            {
                let mut stmt = tx.prepare_cached(&insert)?;
                for _ in 0..LOAD_BATCH_ROWS {
                    if !rdr
                        .read_record(&mut record)
                        .map_err(|e| map_csv_error(csv, e))?
                    {
                        done = true;
                        break;
                    }
                    let params = record.iter().zip(&types).map(|(f, t)| bind_field(f, *t));
                    stmt.execute(params_from_iter(params))?;
                    rows += 1;
                }
            }
            tx.commit()?;
        }
        Ok(rows)
    }

    fn query(&self, sql: &str) -> Result<Vec<Row>> {
        let mut out = Vec::new();
        self.for_each_row(sql, &mut |row| out.push(row.to_vec()))?;
        Ok(out)
    }

    fn for_each_row(&self, sql: &str, f: &mut dyn FnMut(&[Value])) -> Result<()> {
        let mut stmt = self.conn.prepare(sql)?;
        let n = stmt.column_count();
        let mut rows = stmt.query([])?;
        let mut buf = Vec::with_capacity(n);
        while let Some(row) = rows.next()? {
            buf.clear();
            for i in 0..n {
                buf.push(to_value(row.get_ref(i)?));
            }
            f(&buf);
        }
        Ok(())
    }

    fn dump_table(&self, table: &str) -> Result<String> {
        let q = quote_ident(table);
        let mut stmt = match self.conn.prepare(&format!("SELECT * FROM {q} ORDER BY rowid")) {
            Ok(s) => s,
            // WITHOUT ROWID tables
            Err(_) => self.conn.prepare(&format!("SELECT * FROM {q}"))?,
        };
        let names: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&names)?;
        let n = names.len();
        let mut rows = stmt.query([])?;
        while let Some(row) = rows.next()? {
            let fields: Vec<String> = (0..n)
                .map(|i| row.get_ref(i).map(|v| to_value(v).render()))
                .collect::<rusqlite::Result<_>>()?;
            w.write_record(&fields)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::db::connect;
    use crate::db::ConnectionProfile;

    fn fresh() -> (tempfile::TempDir, Box<dyn Database>) {
        let dir = tempfile::tempdir().unwrap();
        let db = connect(&ConnectionProfile::embedded(dir.path().join("t.sqlite3"))).unwrap();
        (dir, db)
    }

    #[test]
    fn run_script_counts_and_rolls_back() {
        let (_d, mut db) = fresh();
        assert_eq!(db.run_script(&SqlScript::new("")).unwrap(), 0);
        let n = db
            .run_script(&SqlScript::new(
                "CREATE TABLE a(x INT); INSERT INTO a VALUES (1); CREATE TABLE b(y TEXT);",
            ))
            .unwrap();
        assert_eq!(n, 3);
        let before = db.list_tables().unwrap();
        let err = db
            .run_script(&SqlScript::new(
                "CREATE TABLE c(z INT); INSERT INTO nope VALUES (1); CREATE TABLE d(w INT);",
            ))
            .unwrap_err();
        assert!(matches!(err, EtlError::Script { index: 2, .. }));
        assert_eq!(db.list_tables().unwrap(), before);
    }

    #[test]
    fn wipe_drops_everything() {
        let (_d, mut db) = fresh();
        db.run_script(&SqlScript::new(
            "CREATE TABLE a(x); CREATE TABLE b(x); CREATE TABLE c(x); CREATE VIEW v AS SELECT * FROM a;",
        ))
        .unwrap();
        assert_eq!(db.wipe().unwrap(), 3);
        assert!(db.list_tables().unwrap().is_empty());
        assert_eq!(db.wipe().unwrap(), 0);
    }

    #[test]
    fn load_creates_appends_and_checks_header() {
        let (d, mut db) = fresh();
        let p = d.path().join("mtcars.csv");
        std::fs::write(&p, crate::sources::MTCARS_CSV).unwrap();
        assert_eq!(db.load_csv("mtcars", &p, true).unwrap(), 32);
        assert_eq!(db.load_csv("mtcars", &p, true).unwrap(), 32);
        let n = db.query("SELECT COUNT(*) FROM mtcars").unwrap();
        assert_eq!(n[0][0], Value::Integer(64));

        let other = d.path().join("other.csv");
        std::fs::write(&other, "a,b\n1,2\n").unwrap();
        let err = db.load_csv("mtcars", &other, true).unwrap_err();
        assert!(matches!(err, EtlError::TypeMismatch { .. }));
        let n = db.query("SELECT COUNT(*) FROM mtcars").unwrap();
        assert_eq!(n[0][0], Value::Integer(64));
    }

    #[test]
    fn header_only_csv_creates_empty_table() {
        let (d, mut db) = fresh();
        let p = d.path().join("empty.csv");
        std::fs::write(&p, "x,y\n").unwrap();
        assert_eq!(db.load_csv("empty", &p, true).unwrap(), 0);
        assert_eq!(db.list_tables().unwrap(), ["empty"]);
    }

    #[test]
    fn ragged_file_adds_nothing() {
        let (d, mut db) = fresh();
        let p = d.path().join("r.csv");
        std::fs::write(&p, "a,b\n1,2\n3,4,5\n").unwrap();
        assert!(matches!(
            db.load_csv("r", &p, true),
            Err(EtlError::RaggedRows { line: 3, .. })
        ));
        assert!(db.list_tables().unwrap().is_empty());
    }

    #[test]
    fn prefix_header_leaves_tail_null() {
        let (d, mut db) = fresh();
        db.run_script(&SqlScript::new("CREATE TABLE t(a INTEGER, b TEXT, c REAL)"))
            .unwrap();
        let p = d.path().join("t.csv");
        std::fs::write(&p, "a,b\n1,x\n").unwrap();
        assert_eq!(db.load_csv("t", &p, false).unwrap(), 1);
        assert_eq!(db.dump_table("t").unwrap(), "a,b,c\n1,x,\n");
        let missing = db.load_csv("absent", &p, false).unwrap_err();
        assert!(matches!(missing, EtlError::TypeMismatch { .. }));
    }

    #[test]
    fn unreachable_paths() {
        let err = connect(&ConnectionProfile::embedded("/definitely/not/here/x.sqlite3"));
        assert!(matches!(err, Err(EtlError::DbUnreachable(_))));
        let mut prof = ConnectionProfile::server("host.invalid", "db");
        prof.port = Some(1);
        assert!(matches!(connect(&prof), Err(EtlError::DbUnreachable(_))));
    }
}
