//! The `etl` command line.
//!
//! ```text
//! etl <SOURCE> <COMMAND> [OPTIONS]
//! etl scaffold <NAME> [--url URL] [--out DIR]
//! etl bench [--rows N] [--db PROFILE]
//! ```
//!
//! Exit codes: 0 on success, 1 when a phase fails (including a partial
//! extract), 2 on a usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, ValueEnum};

use crate::bench::{run_bench, DEFAULT_BENCH_ROWS, DEFAULT_SEED};
use crate::dates::Selector;
use crate::db::{self, profile_from_config, ConnectionProfile, SqlScript};
use crate::error::{EtlError, Result};
use crate::fetch::{verify_manifest, VerifyStatus};
use crate::grammar::{CleanupTarget, EtlContext, Outcome};
use crate::sources::{scaffold_source, Registry};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Init,
    Extract,
    Transform,
    Load,
    Update,
    Create,
    Cleanup,
    Status,
    Scaffold,
    Verify,
    Bench,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Raw,
    Load,
    Both,
}

impl From<Target> for CleanupTarget {
    fn from(t: Target) -> Self {
        match t {
            Target::Raw => CleanupTarget::Raw,
            Target::Load => CleanupTarget::Load,
            Target::Both => CleanupTarget::Both,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "etl", version, about = "Extract, transform and load public data sets into SQL")]
pub struct Cli {
    /// Source name: built in, or a directory holding source.toml on the
    /// sources path.
    pub source: String,

    #[arg(value_enum)]
    pub command: Command,

    /// Working directory (raw/, load/, manifest). A temporary one if absent.
    #[arg(long, env = "ETL_DIR")]
    pub dir: Option<PathBuf>,

    /// Database: a file path, or `profiles.ini:GROUP`.
    #[arg(long)]
    pub db: Option<String>,

    /// Years as ranges, e.g. `1996:1997` or `2012,2014:2015`.
    #[arg(long)]
    pub years: Option<String>,

    /// Months as ranges, e.g. `1:6,9`. Requires --years.
    #[arg(long)]
    pub months: Option<String>,

    /// Regular expression for cleanup.
    #[arg(long)]
    pub pattern: Option<String>,

    #[arg(long, value_enum, default_value = "both")]
    pub target: Target,

    /// SQL script for init, replacing the source's own.
    #[arg(long)]
    pub script: Option<PathBuf>,

    /// Where to look for (and scaffold) declarative sources.
    #[arg(long, env = "ETL_SOURCES")]
    pub sources: Option<PathBuf>,

    /// Parallel downloads and transforms.
    #[arg(long)]
    pub jobs: Option<usize>,

    /// Per-download timeout in seconds.
    #[arg(long)]
    pub timeout: Option<u64>,

    /// Print machine-readable output on stdout.
    #[arg(long)]
    pub json: bool,

    /// Starting URL written into a scaffolded source.
    #[arg(long)]
    pub url: Option<String>,

    /// Scaffold output directory; defaults to the sources path.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, default_value_t = DEFAULT_BENCH_ROWS)]
    pub rows: usize,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    #[arg(short, long, conflicts_with = "verbose")]
    pub quiet: bool,

    /// Also print each phase log entry.
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

/// Lets `etl scaffold NAME` and `etl bench` read naturally.
fn normalize_args(mut args: Vec<OsString>) -> Vec<OsString> {
    match args.get(1).and_then(|a| a.to_str()) {
        Some("scaffold") if args.len() > 2 && !args[2].to_string_lossy().starts_with('-') => {
            args.swap(1, 2);
        }
        Some("bench") => args.insert(1, OsString::from("-")),
        _ => {}
    }
    args
}

enum Failure {
    Usage(String),
    Phase(EtlError),
}

impl From<EtlError> for Failure {
    fn from(e: EtlError) -> Self {
        Failure::Phase(e)
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = normalize_args(args.into_iter().map(Into::into).collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("etl: usage error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Phase(e)) => {
            eprintln!("etl: error: {e}");
            EXIT_FAILED
        }
    }
}

fn selector(cli: &Cli) -> std::result::Result<Option<Selector>, Failure> {
    match (&cli.years, &cli.months) {
        (None, None) => Ok(None),
        (None, Some(_)) => Err(Failure::Usage("--months needs --years".into())),
        (Some(y), m) => Selector::parse(y, m.as_deref())
            .map(Some)
            .map_err(|e| Failure::Usage(e.to_string())),
    }
}

/// `path.ini:GROUP` or `path.cnf:GROUP` selects an INI profile; anything
/// else is an embedded database file.
pub fn parse_db_ref(db_ref: &str) -> Result<ConnectionProfile> {
    if let Some((file, group)) = db_ref.rsplit_once(':') {
        let lower = file.to_ascii_lowercase();
        if lower.ends_with(".ini") || lower.ends_with(".cnf") {
            return profile_from_config(Path::new(file), group);
        }
    }
    let lower = db_ref.to_ascii_lowercase();
    if lower.ends_with(".ini") || lower.ends_with(".cnf") {
        return Err(EtlError::MalformedConfig(format!(
            "'{db_ref}' is a profile file; name a group as {db_ref}:GROUP"
        )));
    }
    Ok(ConnectionProfile::embedded(PathBuf::from(db_ref)))
}

fn sources_dir(cli: &Cli) -> PathBuf {
    cli.sources.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn execute(cli: &Cli) -> std::result::Result<i32, Failure> {
    let sel = selector(cli)?;
    let profile = match &cli.db {
        Some(db_ref) => Some(parse_db_ref(db_ref).map_err(|e| Failure::Usage(e.to_string()))?),
        None => None,
    };
    match cli.command {
        Command::Scaffold => return scaffold(cli),
        Command::Bench => return bench(cli, profile),
        _ => {}
    }

    let mut registry = Registry::with_builtins();
    registry.add_search_path(sources_dir(cli));
    let source = registry.resolve_or_discover(&cli.source)?;
    let mut ctx = EtlContext::open(source, profile, cli.dir.clone(), cli.quiet)?;
    if let Some(j) = cli.jobs {
        ctx.set_jobs(j);
    }
    if let Some(t) = cli.timeout {
        ctx.set_timeout(Duration::from_secs(t));
    }

    let before = ctx.phase_log().len();
    let result = run_verb(cli, &mut ctx, sel.as_ref());
    if cli.verbose > 0 {
        for entry in &ctx.phase_log()[before..] {
            if let Ok(line) = serde_json::to_string(entry) {
                eprintln!("etl: phase {line}");
            }
        }
    }
    let code = result?;
    if code == EXIT_OK && ctx.last_outcome() == Some(Outcome::Partial) {
        return Ok(EXIT_FAILED);
    }
    Ok(code)
}

fn run_verb(cli: &Cli, ctx: &mut EtlContext, sel: Option<&Selector>) -> std::result::Result<i32, Failure> {
    match cli.command {
        Command::Init => {
            let script = cli.script.as_deref().map(SqlScript::from_path).transpose()?;
            ctx.etl_init(script)?;
        }
        Command::Extract => {
            ctx.etl_extract(sel)?;
        }
        Command::Transform => {
            ctx.etl_transform(sel)?;
        }
        Command::Load => {
            ctx.etl_load(sel)?;
        }
        Command::Update => {
            ctx.etl_update(sel)?;
        }
        Command::Create => {
            ctx.etl_create(sel)?;
        }
        Command::Cleanup => {
            let pattern = cli
                .pattern
                .clone()
                .or_else(|| ctx.source().cleanup_pattern.clone())
                .ok_or_else(|| {
                    Failure::Usage("cleanup needs --pattern (the source declares none)".into())
                })?;
            ctx.etl_cleanup(&pattern, cli.target.into())?;
        }
        Command::Status => {
            let report = ctx.status()?;
            if cli.json {
                println!("{}", serde_json::to_string(&report).map_err(EtlError::from)?);
            } else {
                println!("{report}");
            }
        }
        Command::Verify => {
            let checks = verify_manifest(ctx)?;
            let clean = checks.iter().all(|(_, s)| *s == VerifyStatus::Ok);
            if cli.json {
                let rows: Vec<_> = checks
                    .iter()
                    .map(|(p, s)| serde_json::json!({"path": p, "status": s.to_string()}))
                    .collect();
                println!("{}", serde_json::Value::Array(rows));
            } else {
                for (p, s) in &checks {
                    println!("{s:<8} {}", p.display());
                }
            }
            if !clean {
                return Ok(EXIT_FAILED);
            }
        }
        Command::Scaffold | Command::Bench => unreachable!("handled before a context exists"),
    }
    Ok(EXIT_OK)
}

fn scaffold(cli: &Cli) -> std::result::Result<i32, Failure> {
    let out = cli.out.clone().unwrap_or_else(|| sources_dir(cli));
    let created = scaffold_source(&cli.source, &out, cli.url.as_deref()).map_err(|e| match e {
        EtlError::InvalidSource(m) => Failure::Usage(m),
        other => Failure::Phase(other),
    })?;
    for p in created {
        println!("{}", p.display());
    }
    Ok(EXIT_OK)
}

fn bench(cli: &Cli, profile: Option<ConnectionProfile>) -> std::result::Result<i32, Failure> {
    let work = match &cli.dir {
        Some(d) => {
            std::fs::create_dir_all(d).map_err(EtlError::from)?;
            d.clone()
        }
        None => tempfile::Builder::new()
            .prefix("etl-bench-")
            .tempdir()
            .map_err(EtlError::from)?
            .keep(),
    };
    let profile = profile.unwrap_or_else(|| ConnectionProfile::embedded(work.join("bench.sqlite3")));
    let mut db = db::connect(&profile)?;
    let report = run_bench(db.as_mut(), cli.rows, cli.seed, &work)?;
    if cli.json {
        println!("{}", serde_json::to_string(&report).map_err(EtlError::from)?);
    } else {
        println!("{report}");
    }
    Ok(EXIT_OK)
}
