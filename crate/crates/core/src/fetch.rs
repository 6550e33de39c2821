//! Idempotent downloads and the provenance manifest.
//!
//! A file is fetched only when no non-empty file of the same name exists
//! under `raw/`. Bodies stream into a temporary file next to the target,
//! are hashed on the way, and are renamed into place only once complete,
//! so an interrupted transfer never leaves a partial file under its final
//! name. Every completed fetch appends one line to `manifest.jsonl`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, SecondsFormat, SubsecRound, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::db;
use crate::error::{EtlError, Result};
use crate::grammar::EtlContext;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const DEFAULT_JOBS: usize = 4;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// One fetched (or bundled) file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub url: String,
    /// Path relative to the pipeline directory, e.g. `raw/201307-x.zip`.
    #[serde(rename = "path")]
    pub local_path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
    #[serde(with = "rfc3339")]
    pub fetched_at: DateTime<Utc>,
}

mod rfc3339 {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Millis, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

/// Append-ordered manifest contents. Later records for the same path
/// supersede earlier ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub records: Vec<FileRecord>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Manifest::default()),
            Err(e) => return Err(e.into()),
        };
        let mut records = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line).map_err(|e| EtlError::Parse {
                file: path.to_path_buf(),
                line: i as u64 + 1,
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        Ok(Manifest { records })
    }

    /// The newest record for each path.
    pub fn live(&self) -> BTreeMap<PathBuf, &FileRecord> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            out.insert(r.local_path.clone(), r);
        }
        out
    }
}

/// Serialises appends to `manifest.jsonl` across worker threads.
pub struct ManifestWriter {
    file: Mutex<File>,
}

impl ManifestWriter {
    pub fn open(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ManifestWriter {
            file: Mutex::new(file),
        })
    }

    pub fn append(&self, rec: &FileRecord) -> Result<()> {
        let mut line = serde_json::to_vec(rec)?;
        line.push(b'\n');
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(&line)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchErrorKind {
    Status(u16),
    Timeout,
    Transport(String),
    Io(String),
    BadUrl(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchError {
    pub url: String,
    pub kind: FetchErrorKind,
}

impl fmt::Display for FetchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FetchErrorKind::Status(code) => write!(f, "{}: HTTP status {code}", self.url),
            FetchErrorKind::Timeout => write!(f, "{}: timed out", self.url),
            FetchErrorKind::Transport(m) => write!(f, "{}: {m}", self.url),
            FetchErrorKind::Io(m) => write!(f, "{}: i/o error: {m}", self.url),
            FetchErrorKind::BadUrl(m) => write!(f, "{}: bad url: {m}", self.url),
        }
    }
}

impl std::error::Error for FetchError {}

#[derive(Debug, Clone, Default)]
pub struct DownloadReport {
    pub fetched: Vec<FileRecord>,
    pub skipped: Vec<PathBuf>,
    pub failed: Vec<FetchError>,
}

impl DownloadReport {
    pub fn requested(&self) -> usize {
        self.fetched.len() + self.skipped.len() + self.failed.len()
    }
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub jobs: usize,
    pub timeout: Duration,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions {
            jobs: DEFAULT_JOBS,
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut f = File::open(path)?;
    let mut hasher = Sha256::new();
    io::copy(&mut f, &mut hasher)?;
    Ok(hex::encode(hasher.finalize()))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Last path segment of a URL, used as the default local filename.
pub fn url_basename(url: &str) -> Option<String> {
    let parsed = url::Url::parse(url).ok()?;
    let seg = parsed.path_segments()?.next_back()?.to_string();
    (!seg.is_empty()).then_some(seg)
}

fn safe_filename(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && !name.contains('/')
        && !name.contains('\\')
}

struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
    bytes: u64,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

fn open_url(agent: &ureq::Agent, url: &str) -> std::result::Result<Box<dyn Read>, FetchError> {
    let err = |kind| FetchError {
        url: url.to_string(),
        kind,
    };
    let parsed = url::Url::parse(url).map_err(|e| err(FetchErrorKind::BadUrl(e.to_string())))?;
    match parsed.scheme() {
        "file" => {
            let path = parsed
                .to_file_path()
                .map_err(|_| err(FetchErrorKind::BadUrl("not a local path".into())))?;
            let f = File::open(&path).map_err(|e| err(FetchErrorKind::Io(e.to_string())))?;
            Ok(Box::new(f))
        }
        "http" | "https" => match agent.get(url).call() {
            Ok(resp) => Ok(Box::new(resp.into_body().into_reader())),
            Err(ureq::Error::StatusCode(code)) => Err(err(FetchErrorKind::Status(code))),
            Err(ureq::Error::Timeout(_)) => Err(err(FetchErrorKind::Timeout)),
            Err(e) => Err(err(FetchErrorKind::Transport(e.to_string()))),
        },
        other => Err(err(FetchErrorKind::BadUrl(format!("unsupported scheme '{other}'")))),
    }
}

fn fetch_one(
    agent: &ureq::Agent,
    url: &str,
    target: &Path,
) -> std::result::Result<(u64, String), FetchError> {
    let io_err = |e: io::Error| {
        let kind = if e.kind() == io::ErrorKind::TimedOut {
            FetchErrorKind::Timeout
        } else {
            FetchErrorKind::Io(e.to_string())
        };
        FetchError {
            url: url.to_string(),
            kind,
        }
    };
    let mut reader = open_url(agent, url)?;
    let parent = target.parent().unwrap_or(Path::new("."));
    let tmp = tempfile::Builder::new()
        .prefix(".part-")
        .tempfile_in(parent)
        .map_err(io_err)?;
    let mut w = HashingWriter {
        inner: tmp,
        hasher: Sha256::new(),
        bytes: 0,
    };
    io::copy(&mut reader, &mut w).map_err(io_err)?;
    let HashingWriter {
        inner: tmp,
        hasher,
        bytes,
    } = w;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(target).map_err(|e| io_err(e.error))?;
    Ok((bytes, hex::encode(hasher.finalize())))
}

/// Downloads `urls` into `raw_dir`, skipping any whose target file already
/// exists with nonzero size.
///
/// `new_filenames`, when given, must match `urls` in length and names the
/// local files; otherwise each URL's last path segment is used. Failures
/// are collected in the report instead of aborting the batch.
pub fn download_into(
    dir: &Path,
    raw_dir: &Path,
    manifest: &ManifestWriter,
    urls: &[String],
    new_filenames: Option<&[String]>,
    opts: &FetchOptions,
) -> Result<DownloadReport> {
    if let Some(names) = new_filenames {
        if names.len() != urls.len() {
            return Err(EtlError::InvalidSelector(format!(
                "{} filenames given for {} urls",
                names.len(),
                urls.len()
            )));
        }
    }

    enum Outcome {
        Fetched(FileRecord),
        Skipped(PathBuf),
        Failed(FetchError),
    }

    let plan: Vec<(String, std::result::Result<PathBuf, FetchError>)> = urls
        .iter()
        .enumerate()
        .map(|(i, url)| {
            let name = match new_filenames {
                Some(names) => Some(names[i].clone()),
                None => url_basename(url),
            };
            let target = name.filter(|n| safe_filename(n)).map(|n| raw_dir.join(n)).ok_or(
                FetchError {
                    url: url.clone(),
                    kind: FetchErrorKind::BadUrl("cannot derive a local filename".into()),
                },
            );
            (url.clone(), target)
        })
        .collect();

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(opts.timeout))
        .build()
        .into();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Outcome)>> = Mutex::new(Vec::with_capacity(plan.len()));
    let manifest_err: Mutex<Option<EtlError>> = Mutex::new(None);

    std::thread::scope(|s| {
        for _ in 0..opts.jobs.max(1).min(plan.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((url, target)) = plan.get(i) else {
                    break;
                };
                let outcome = match target {
                    Err(e) => Outcome::Failed(e.clone()),
                    Ok(target) if fs::metadata(target).is_ok_and(|m| m.is_file() && m.len() > 0) => {
                        Outcome::Skipped(target.clone())
                    }
                    Ok(target) => match fetch_one(&agent, url, target) {
                        Ok((bytes, sha256)) => {
                            let rec = FileRecord {
                                url: url.clone(),
                                local_path: target.strip_prefix(dir).unwrap_or(target).to_path_buf(),
                                bytes,
                                sha256,
                                fetched_at: now_millis(),
                            };
                            if let Err(e) = manifest.append(&rec) {
                                manifest_err.lock().unwrap().get_or_insert(e);
                            }
                            Outcome::Fetched(rec)
                        }
                        Err(e) => Outcome::Failed(e),
                    },
                };
                results.lock().unwrap().push((i, outcome));
            });
        }
    });

    if let Some(e) = manifest_err.into_inner().unwrap() {
        return Err(e);
    }
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(i, _)| *i);
    let mut report = DownloadReport::default();
    for (_, outcome) in results {
        match outcome {
            Outcome::Fetched(r) => report.fetched.push(r),
            Outcome::Skipped(p) => report.skipped.push(p),
            Outcome::Failed(e) => report.failed.push(e),
        }
    }
    Ok(report)
}

/// [`download_into`] for a pipeline's `raw/` directory and manifest.
pub fn smart_download(
    ctx: &EtlContext,
    urls: &[String],
    new_filenames: Option<&[String]>,
) -> Result<DownloadReport> {
    let manifest = ManifestWriter::open(&ctx.manifest_path())?;
    download_into(
        ctx.dir(),
        ctx.raw_dir(),
        &manifest,
        urls,
        new_filenames,
        &ctx.fetch_options(),
    )
}

/// Where [`smart_upload`] copies load-ready files.
#[derive(Debug, Clone)]
pub enum UploadTarget {
    Directory(PathBuf),
    /// Each CSV is loaded into an eponymous table unless it already exists.
    Database(db::ConnectionProfile),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UploadReport {
    pub copied: Vec<String>,
    pub skipped: Vec<String>,
}

/// Copies files from `load/` to `target`, skipping names already present.
pub fn smart_upload(
    ctx: &EtlContext,
    target: &UploadTarget,
    pattern: Option<&Regex>,
) -> Result<UploadReport> {
    let mut names: Vec<String> = fs::read_dir(ctx.load_dir())?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_ok_and(|t| t.is_file()))
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| pattern.is_none_or(|p| p.is_match(n)))
        .collect();
    names.sort();

    let mut report = UploadReport::default();
    match target {
        UploadTarget::Directory(dest) => {
            fs::create_dir_all(dest)?;
            for name in names {
                let to = dest.join(&name);
                if to.exists() {
                    report.skipped.push(name);
                } else {
                    let tmp = tempfile::Builder::new().prefix(".part-").tempfile_in(dest)?;
                    fs::copy(ctx.load_dir().join(&name), tmp.path())?;
                    tmp.persist(&to).map_err(|e| e.error)?;
                    report.copied.push(name);
                }
            }
        }
        UploadTarget::Database(profile) => {
            let mut handle = db::connect(profile)?;
            let existing = handle.list_tables()?;
            for name in names.into_iter().filter(|n| n.to_ascii_lowercase().ends_with(".csv")) {
                let table = Path::new(&name)
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                if existing.iter().any(|t| t.eq_ignore_ascii_case(&table)) {
                    report.skipped.push(name);
                } else {
                    handle.load_csv(&table, &ctx.load_dir().join(&name), true)?;
                    report.copied.push(name);
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyStatus {
    Ok,
    Missing,
    Modified,
}

impl fmt::Display for VerifyStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            VerifyStatus::Ok => "ok",
            VerifyStatus::Missing => "missing",
            VerifyStatus::Modified => "modified",
        })
    }
}

/// Re-hashes every live manifest entry.
pub fn verify_manifest(ctx: &EtlContext) -> Result<Vec<(PathBuf, VerifyStatus)>> {
    verify_manifest_at(ctx.dir())
}

pub fn verify_manifest_at(dir: &Path) -> Result<Vec<(PathBuf, VerifyStatus)>> {
    let manifest = Manifest::load(&dir.join(MANIFEST_FILE))?;
    let mut out = Vec::new();
    for (path, rec) in manifest.live() {
        let full = dir.join(&path);
        let status = match fs::metadata(&full) {
            Err(_) => VerifyStatus::Missing,
            Ok(m) if m.len() != rec.bytes => VerifyStatus::Modified,
            Ok(_) if sha256_file(&full)? != rec.sha256 => VerifyStatus::Modified,
            Ok(_) => VerifyStatus::Ok,
        };
        out.push((path, status));
    }
    Ok(out)
}

/// Current time at the precision the manifest stores.
pub(crate) fn now_millis() -> DateTime<Utc> {
    Utc::now().trunc_subsecs(3)
}

pub(crate) fn now_rfc3339() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}
