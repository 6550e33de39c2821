//! The pipeline object and its verbs.
//!
//! An [`EtlContext`] binds a source, a working directory with `raw/` and
//! `load/` subdirectories, and a database connection. Every verb takes the
//! context by `&mut` and hands the same context back, so calls chain:
//!
//! ```no_run
//! # fn main() -> etl::Result<()> {
//! use etl::{EtlContext, Registry};
//!
//! let registry = Registry::with_builtins();
//! let mut cars = EtlContext::new(&registry, "demo-cars", None, None)?;
//! cars.etl_init(None)?.etl_update(None)?;
//! println!("{}", cars.status()?);
//! # Ok(())
//! # }
//! ```
//!
//! Each verb appends one entry to the phase log (composite verbs also log
//! their children), mirrored to `<dir>/phase_log.jsonl`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use regex::Regex;
use serde::Serialize;

use crate::dates::Selector;
use crate::db::{self, ConnectionProfile, Database, SqlScript};
use crate::error::{EtlError, Result};
use crate::fetch::{now_rfc3339, FetchOptions, MANIFEST_FILE};
use crate::sources::{DefaultHooks, Registry, SourceDescriptor, SourceHooks};

pub const EPHEMERAL_DB_FILE: &str = "etl.sqlite3";
pub const PHASE_LOG_FILE: &str = "phase_log.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verb {
    Init,
    Extract,
    Transform,
    Load,
    Cleanup,
    Update,
    Create,
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verb::Init => "init",
            Verb::Extract => "extract",
            Verb::Transform => "transform",
            Verb::Load => "load",
            Verb::Cleanup => "cleanup",
            Verb::Update => "update",
            Verb::Create => "create",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Ok,
    /// Some requested files failed; the rest went through.
    Partial,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseEntry {
    pub verb: Verb,
    pub selector: Option<String>,
    pub started_at: String,
    pub finished_at: String,
    pub outcome: Outcome,
    pub files: Vec<String>,
    pub rows: BTreeMap<String, u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Default)]
struct PhaseResult {
    outcome: Option<Outcome>,
    files: Vec<String>,
    rows: BTreeMap<String, u64>,
}

/// Which working subdirectories [`EtlContext::etl_cleanup`] touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CleanupTarget {
    Raw,
    Load,
    Both,
}

impl std::str::FromStr for CleanupTarget {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "raw" => Ok(CleanupTarget::Raw),
            "load" => Ok(CleanupTarget::Load),
            "both" => Ok(CleanupTarget::Both),
            other => Err(format!("expected raw, load or both, got '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatusReport {
    pub file_count: u64,
    pub bytes_on_disk: u64,
    pub db_descriptor: String,
    pub table_names: Vec<String>,
}

/// Formats a byte count as gigabytes (2^30 bytes) with three decimals;
/// zero prints as `0`.
pub fn format_gb(bytes: u64) -> String {
    if bytes == 0 {
        "0".to_string()
    } else {
        format!("{:.3}", bytes as f64 / (1u64 << 30) as f64)
    }
}

impl fmt::Display for StatusReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "dir:  {} files occupying {} GB",
            self.file_count,
            format_gb(self.bytes_on_disk)
        )?;
        writeln!(f, "src:  {}", self.db_descriptor)?;
        write!(f, "tbls: {}", self.table_names.join(", "))
    }
}

pub struct EtlContext {
    source: Arc<SourceDescriptor>,
    dir: PathBuf,
    raw_dir: PathBuf,
    load_dir: PathBuf,
    profile: ConnectionProfile,
    db: Box<dyn Database>,
    phase_log: Vec<PhaseEntry>,
    notices: Vec<String>,
    echo_notices: bool,
    fetch: FetchOptions,
}

impl fmt::Debug for EtlContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EtlContext")
            .field("source", &self.source.name)
            .field("dir", &self.dir)
            .field("raw_dir", &self.raw_dir)
            .field("load_dir", &self.load_dir)
            .field("db", &self.db.describe())
            .field("phases", &self.phase_log.len())
            .finish()
    }
}

/// Builds a pipeline for `source_name`. Shorthand for [`EtlContext::new`].
pub fn new_pipeline(
    registry: &Registry,
    source_name: &str,
    db: Option<ConnectionProfile>,
    dir: Option<PathBuf>,
) -> Result<EtlContext> {
    EtlContext::new(registry, source_name, db, dir)
}

impl EtlContext {
    /// Resolves the source, prepares `dir` (a fresh temporary directory
    /// when `None`) with its `raw/` and `load/` subdirectories, and opens
    /// the database. Without a profile an embedded database is created at
    /// `<dir>/etl.sqlite3`.
    pub fn new(
        registry: &Registry,
        source_name: &str,
        db: Option<ConnectionProfile>,
        dir: Option<PathBuf>,
    ) -> Result<Self> {
        let source = registry.resolve(source_name)?;
        Self::with_source(source, db, dir)
    }

    pub fn with_source(
        source: Arc<SourceDescriptor>,
        db: Option<ConnectionProfile>,
        dir: Option<PathBuf>,
    ) -> Result<Self> {
        Self::open(source, db, dir, false)
    }

    /// Like [`with_source`](Self::with_source); a quiet context records
    /// notices without echoing them, including the construction notice.
    pub fn open(
        source: Arc<SourceDescriptor>,
        db: Option<ConnectionProfile>,
        dir: Option<PathBuf>,
        quiet: bool,
    ) -> Result<Self> {
        let dir = match dir {
            Some(d) => {
                fs::create_dir_all(&d)?;
                d
            }
            None => tempfile::Builder::new().prefix("etl-").tempdir()?.keep(),
        };
        let dir = fs::canonicalize(&dir)?;
        let raw_dir = dir.join("raw");
        let load_dir = dir.join("load");
        fs::create_dir_all(&raw_dir)?;
        fs::create_dir_all(&load_dir)?;

        let mut notices = Vec::new();
        let profile = match db {
            Some(p) => p,
            None => {
                let path = dir.join(EPHEMERAL_DB_FILE);
                notices.push(format!(
                    "No database was specified so I created one for you at: {}",
                    path.display()
                ));
                ConnectionProfile::embedded(path)
            }
        };
        let handle = db::connect(&profile)?;

        let mut ctx = EtlContext {
            source,
            dir,
            raw_dir,
            load_dir,
            profile,
            db: handle,
            phase_log: Vec::new(),
            notices: Vec::new(),
            echo_notices: !quiet,
            fetch: FetchOptions::default(),
        };
        for n in notices {
            ctx.notice(&n);
        }
        Ok(ctx)
    }

    /// Stops echoing notices to standard error. They are still recorded.
    pub fn quiet(mut self) -> Self {
        self.echo_notices = false;
        self
    }

    pub fn set_quiet(&mut self, quiet: bool) {
        self.echo_notices = !quiet;
    }

    pub fn set_jobs(&mut self, jobs: usize) {
        self.fetch.jobs = jobs.max(1);
    }

    pub fn set_timeout(&mut self, timeout: Duration) {
        self.fetch.timeout = timeout;
    }

    pub fn fetch_options(&self) -> FetchOptions {
        self.fetch.clone()
    }

    pub fn source(&self) -> &Arc<SourceDescriptor> {
        &self.source
    }

    pub fn source_name(&self) -> &str {
        &self.source.name
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn raw_dir(&self) -> &Path {
        &self.raw_dir
    }

    pub fn load_dir(&self) -> &Path {
        &self.load_dir
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }

    pub fn profile(&self) -> &ConnectionProfile {
        &self.profile
    }

    pub fn db(&self) -> &dyn Database {
        self.db.as_ref()
    }

    pub fn db_mut(&mut self) -> &mut dyn Database {
        self.db.as_mut()
    }

    pub fn phase_log(&self) -> &[PhaseEntry] {
        &self.phase_log
    }

    /// Outcome of the most recent verb, if any ran.
    pub fn last_outcome(&self) -> Option<Outcome> {
        self.phase_log.last().map(|e| e.outcome)
    }

    pub fn notices(&self) -> &[String] {
        &self.notices
    }

    /// Records a single-line notice, echoing `etl: <msg>` to stderr unless
    /// the context is quiet.
    pub fn notice(&mut self, msg: &str) {
        let line = format!("etl: {msg}");
        if self.echo_notices {
            eprintln!("{line}");
        }
        self.notices.push(line);
    }

    fn hooks(&self) -> Arc<dyn SourceHooks> {
        self.source
            .hooks
            .clone()
            .unwrap_or_else(|| Arc::new(DefaultHooks))
    }

    fn record(&mut self, entry: PhaseEntry) -> Result<()> {
        let mut line = serde_json::to_vec(&entry)?;
        line.push(b'\n');
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.dir.join(PHASE_LOG_FILE))?
            .write_all(&line)?;
        self.phase_log.push(entry);
        Ok(())
    }

    fn run_phase(
        &mut self,
        verb: Verb,
        sel: Option<&Selector>,
        body: impl FnOnce(&mut Self) -> Result<PhaseResult>,
    ) -> Result<&mut Self> {
        let started_at = now_rfc3339();
        let result = body(self);
        let selector = sel.map(ToString::to_string);
        match result {
            Ok(r) => {
                self.record(PhaseEntry {
                    verb,
                    selector,
                    started_at,
                    finished_at: now_rfc3339(),
                    outcome: r.outcome.unwrap_or(Outcome::Ok),
                    files: r.files,
                    rows: r.rows,
                    error: None,
                })?;
                Ok(self)
            }
            Err(e) => {
                self.record(PhaseEntry {
                    verb,
                    selector,
                    started_at,
                    finished_at: now_rfc3339(),
                    outcome: Outcome::Failed,
                    files: Vec::new(),
                    rows: BTreeMap::new(),
                    error: Some(e.to_string()),
                })?;
                Err(e)
            }
        }
    }

    fn rel(&self, p: &Path) -> String {
        p.strip_prefix(&self.dir)
            .unwrap_or(p)
            .to_string_lossy()
            .into_owned()
    }

    /// Runs `script`, else the source's init script, else drops every
    /// table.
    pub fn etl_init(&mut self, script: Option<SqlScript>) -> Result<&mut Self> {
        self.run_phase(Verb::Init, None, |ctx| {
            let bundled = ctx
                .source
                .init_script_for(ctx.db.engine_name())
                .map(|s| SqlScript::new(s));
            match script.or(bundled) {
                Some(script) => {
                    ctx.notice(&format!(
                        "Initializing DB using SQL script ({} statements)",
                        script.len()
                    ));
                    ctx.db.run_script(&script)?;
                }
                None => {
                    let dropped = ctx.db.wipe()?;
                    ctx.notice(&format!("Initializing DB by dropping {dropped} table(s)"));
                }
            }
            Ok(PhaseResult::default())
        })
    }

    /// Puts raw files into `raw/`. Individual download failures make the
    /// phase `Partial`; it only fails when every requested file failed.
    pub fn etl_extract(&mut self, sel: Option<&Selector>) -> Result<&mut Self> {
        let hooks = self.hooks();
        self.run_phase(Verb::Extract, sel, |ctx| {
            ctx.notice("Extracting raw data...");
            let report = hooks.extract(ctx, sel)?;
            for f in &report.failed {
                ctx.notice(&format!("download failed: {f}"));
            }
            let succeeded = report.fetched.len() + report.skipped.len();
            if !report.failed.is_empty() && succeeded == 0 {
                return Err(EtlError::FetchFailed {
                    failed: report.failed.len(),
                    first: report.failed[0].to_string(),
                });
            }
            let mut files: Vec<String> = report
                .fetched
                .iter()
                .map(|r| r.local_path.to_string_lossy().into_owned())
                .collect();
            files.extend(report.skipped.iter().map(|p| ctx.rel(p)));
            Ok(PhaseResult {
                outcome: Some(if report.failed.is_empty() {
                    Outcome::Ok
                } else {
                    Outcome::Partial
                }),
                files,
                rows: BTreeMap::new(),
            })
        })
    }

    /// Turns raw files into load-ready CSVs under `load/`.
    pub fn etl_transform(&mut self, sel: Option<&Selector>) -> Result<&mut Self> {
        let hooks = self.hooks();
        self.run_phase(Verb::Transform, sel, |ctx| {
            ctx.notice("Transforming raw data...");
            let out = hooks.transform(ctx, sel)?;
            Ok(PhaseResult {
                files: out.iter().map(|p| ctx.rel(p)).collect(),
                ..Default::default()
            })
        })
    }

    /// Appends load-ready CSVs into the database.
    pub fn etl_load(&mut self, sel: Option<&Selector>) -> Result<&mut Self> {
        let hooks = self.hooks();
        self.run_phase(Verb::Load, sel, |ctx| {
            let rows = hooks.load(ctx, sel)?;
            Ok(PhaseResult {
                files: rows.keys().cloned().collect(),
                rows,
                ..Default::default()
            })
        })
    }

    /// Deletes files whose base name matches `pattern` from the targeted
    /// directories.
    pub fn etl_cleanup(&mut self, pattern: &str, target: CleanupTarget) -> Result<&mut Self> {
        let re = Regex::new(pattern);
        self.run_phase(Verb::Cleanup, None, |ctx| {
            let re = re?;
            ctx.cleanup_matching(Some(&re), target)
        })
    }

    fn cleanup_matching(&mut self, re: Option<&Regex>, target: CleanupTarget) -> Result<PhaseResult> {
        let dirs: Vec<PathBuf> = match target {
            CleanupTarget::Raw => vec![self.raw_dir.clone()],
            CleanupTarget::Load => vec![self.load_dir.clone()],
            CleanupTarget::Both => vec![self.raw_dir.clone(), self.load_dir.clone()],
        };
        let mut deleted = Vec::new();
        if let Some(re) = re {
            for d in dirs {
                for path in crate::sources::list_files(&d)? {
                    let base = path.file_name().map(|n| n.to_string_lossy().into_owned());
                    if base.is_some_and(|b| re.is_match(&b)) {
                        fs::remove_file(&path)?;
                        deleted.push(self.rel(&path));
                    }
                }
            }
        }
        if !deleted.is_empty() {
            self.notice(&format!("Deleted {} file(s)", deleted.len()));
        }
        Ok(PhaseResult {
            files: deleted,
            ..Default::default()
        })
    }

    /// extract, transform and load with the same selector.
    pub fn etl_update(&mut self, sel: Option<&Selector>) -> Result<&mut Self> {
        self.run_phase(Verb::Update, sel, |ctx| {
            ctx.etl_extract(sel)?;
            let partial = ctx.last_outcome() == Some(Outcome::Partial);
            ctx.etl_transform(sel)?;
            ctx.etl_load(sel)?;
            Ok(PhaseResult {
                outcome: Some(if partial { Outcome::Partial } else { Outcome::Ok }),
                ..Default::default()
            })
        })
    }

    /// init, update, then cleanup with the source's cleanup pattern (which
    /// deletes nothing when the source declares none).
    pub fn etl_create(&mut self, sel: Option<&Selector>) -> Result<&mut Self> {
        self.run_phase(Verb::Create, sel, |ctx| {
            ctx.etl_init(None)?;
            ctx.etl_update(sel)?;
            let partial = ctx.last_outcome() == Some(Outcome::Partial);
            let pattern = ctx.source.cleanup_pattern.clone();
            let re = pattern.as_deref().map(Regex::new).transpose();
            ctx.run_phase(Verb::Cleanup, None, |c| {
                let re = re?;
                c.cleanup_matching(re.as_ref(), CleanupTarget::Both)
            })?;
            Ok(PhaseResult {
                outcome: Some(if partial { Outcome::Partial } else { Outcome::Ok }),
                ..Default::default()
            })
        })
    }

    /// File counts and sizes under `raw/` and `load/`, plus the database
    /// description and its tables, all read fresh.
    pub fn status(&self) -> Result<StatusReport> {
        let mut file_count = 0;
        let mut bytes_on_disk = 0;
        for d in [&self.raw_dir, &self.load_dir] {
            for entry in walkdir::WalkDir::new(d) {
                let entry = entry.map_err(|e| std::io::Error::other(e.to_string()))?;
                if entry.file_type().is_file() {
                    file_count += 1;
                    bytes_on_disk += entry
                        .metadata()
                        .map_err(|e| std::io::Error::other(e.to_string()))?
                        .len();
                }
            }
        }
        Ok(StatusReport {
            file_count,
            bytes_on_disk,
            db_descriptor: self.db.describe(),
            table_names: self.db.list_tables()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(dir: &Path) -> EtlContext {
        EtlContext::new(&Registry::with_builtins(), "demo-cars", None, Some(dir.to_path_buf()))
            .unwrap()
            .quiet()
    }

    #[test]
    fn construction_lays_out_directories() {
        let d = tempfile::tempdir().unwrap();
        let c = ctx(d.path());
        let root = fs::canonicalize(d.path()).unwrap();
        assert_eq!(c.raw_dir(), root.join("raw"));
        assert_eq!(c.load_dir(), root.join("load"));
        assert!(c.raw_dir().is_dir() && c.load_dir().is_dir());
        assert!(c.notices()[0].starts_with("etl: No database was specified so I created one for you"));
        assert!(root.join(EPHEMERAL_DB_FILE).exists());
    }

    #[test]
    fn unknown_source_names_it() {
        let err = EtlContext::new(&Registry::with_builtins(), "nope", None, None).unwrap_err();
        assert!(matches!(&err, EtlError::UnknownSource(n) if n == "nope"));
        assert!(err.to_string().contains("'nope'"));
    }

    #[test]
    fn verbs_return_the_same_context() {
        let d = tempfile::tempdir().unwrap();
        let mut c = ctx(d.path());
        let addr = &c as *const EtlContext;
        let back = c.etl_init(None).unwrap() as *const EtlContext;
        assert_eq!(addr, back);
        let back = c
            .etl_extract(None)
            .unwrap()
            .etl_transform(None)
            .unwrap()
            .etl_load(None)
            .unwrap() as *const EtlContext;
        assert_eq!(addr, back);
    }

    #[test]
    fn fresh_status_and_gb_format() {
        let d = tempfile::tempdir().unwrap();
        let c = ctx(d.path());
        let s = c.status().unwrap();
        assert_eq!(s.file_count, 0);
        assert!(s.to_string().starts_with("dir:  0 files occupying 0 GB\n"));
        assert_eq!(format_gb(28_190_000_000), "26.254");
        assert_eq!(format_gb(8 * 1024 * 1024), "0.008");
    }

    #[test]
    fn phase_log_counts_children() {
        let d = tempfile::tempdir().unwrap();
        let mut c = ctx(d.path());
        c.etl_create(None).unwrap();
        let verbs: Vec<Verb> = c.phase_log().iter().map(|e| e.verb).collect();
        assert_eq!(
            verbs,
            [
                Verb::Init,
                Verb::Extract,
                Verb::Transform,
                Verb::Load,
                Verb::Update,
                Verb::Cleanup,
                Verb::Create
            ]
        );
        let persisted = fs::read_to_string(c.dir().join(PHASE_LOG_FILE)).unwrap();
        assert_eq!(persisted.lines().count(), 7);
        assert_eq!(c.phase_log()[3].rows.get("mtcars"), Some(&32));
    }

    #[test]
    fn init_without_script_wipes() {
        let d = tempfile::tempdir().unwrap();
        let mut reg = Registry::new();
        reg.register(SourceDescriptor::new("bare").bundle("t", "a\n1\n")).unwrap();
        let mut c = EtlContext::new(&reg, "bare", None, Some(d.path().to_path_buf()))
            .unwrap()
            .quiet();
        c.db_mut()
            .run_script(&SqlScript::new("CREATE TABLE a(x); CREATE TABLE b(x); CREATE TABLE c(x);"))
            .unwrap();
        c.etl_init(None).unwrap();
        assert!(c.db().list_tables().unwrap().is_empty());
    }

    #[test]
    fn cleanup_pattern_errors_are_logged() {
        let d = tempfile::tempdir().unwrap();
        let mut c = ctx(d.path());
        assert!(matches!(
            c.etl_cleanup("(", CleanupTarget::Both),
            Err(EtlError::InvalidPattern(_))
        ));
        assert_eq!(c.last_outcome(), Some(Outcome::Failed));
    }
}
