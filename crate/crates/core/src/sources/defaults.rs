//! Default extract / transform / load behaviour.
//!
//! * extract: write bundled CSV payloads into `raw/`, or download every
//!   URL the template expands to.
//! * transform: copy `raw/*.csv` into `load/` byte for byte and unpack
//!   the CSV members of `raw/*.zip` (flattened to their base names).
//! * load: append every `load/*.csv` into the table named after its stem.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::SourceHooks;
use crate::dates::{match_files_by_year_months, Selector};
use crate::error::{EtlError, Result};
use crate::fetch::{
    sha256_bytes, sha256_file, smart_download, url_basename, DownloadReport, FileRecord,
    ManifestWriter,
};
use crate::grammar::EtlContext;

/// Hooks that always take the default path.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultHooks;

impl SourceHooks for DefaultHooks {}

pub fn default_extract(ctx: &mut EtlContext, sel: Option<&Selector>) -> Result<DownloadReport> {
    let source = ctx.source().clone();
    if !source.bundled_data.is_empty() {
        let manifest = ManifestWriter::open(&ctx.manifest_path())?;
        let mut report = DownloadReport::default();
        for (table, payload) in &source.bundled_data {
            let target = ctx.raw_dir().join(format!("{table}.csv"));
            let sha = sha256_bytes(payload.as_bytes());
            if target.is_file() && sha256_file(&target)? == sha {
                report.skipped.push(target);
                continue;
            }
            write_atomic(&target, |f| io::Write::write_all(f, payload.as_bytes()))?;
            let rec = FileRecord {
                url: format!("bundled:{}/{table}.csv", source.name),
                local_path: target.strip_prefix(ctx.dir()).unwrap_or(&target).to_path_buf(),
                bytes: payload.len() as u64,
                sha256: sha,
                fetched_at: crate::fetch::now_millis(),
            };
            manifest.append(&rec)?;
            report.fetched.push(rec);
        }
        return Ok(report);
    }
    if source.url_template.is_some() {
        let urls = source.expand_urls(sel)?;
        return smart_download(ctx, &urls, None);
    }
    Err(EtlError::NothingToExtract(source.name.clone()))
}

fn is_temporary(p: &Path) -> bool {
    p.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.starts_with(".part-"))
}

/// Regular files under `dir`, recursively, sorted by path.
pub(crate) fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| io::Error::other(e.to_string()))?;
        if entry.file_type().is_file() && !is_temporary(entry.path()) {
            out.push(entry.into_path());
        }
    }
    Ok(out)
}

fn has_ext(p: &Path, ext: &str) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// Raw files a transform over `sel` should read.
fn select_raw_files(ctx: &EtlContext, sel: Option<&Selector>) -> Result<Vec<PathBuf>> {
    let all = list_files(ctx.raw_dir())?;
    let Some(sel) = sel else {
        return Ok(all);
    };
    let source = ctx.source();
    if source.is_templated() {
        let mut wanted = Vec::new();
        for url in source.expand_urls(Some(sel))? {
            let name = url_basename(&url).ok_or_else(|| EtlError::MissingRawFile(PathBuf::from(&url)))?;
            let path = ctx.raw_dir().join(name);
            if !path.is_file() {
                return Err(EtlError::MissingRawFile(path));
            }
            wanted.push(path);
        }
        return Ok(wanted);
    }
    match source.filename_regex()? {
        Some(re) => match_files_by_year_months(&all, &re, sel),
        None => Ok(all),
    }
}

pub fn default_transform(ctx: &mut EtlContext, sel: Option<&Selector>) -> Result<Vec<PathBuf>> {
    let inputs = select_raw_files(ctx, sel)?;
    let load_dir = ctx.load_dir().to_path_buf();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.fetch_options().jobs.max(1))
        .build()
        .map_err(|e| io::Error::other(e.to_string()))?;
    let per_file: Vec<Result<Vec<PathBuf>>> = pool.install(|| {
        inputs
            .par_iter()
            .map(|input| {
                if has_ext(input, "csv") {
                    copy_csv(input, &load_dir).map(|p| vec![p])
                } else if has_ext(input, "zip") {
                    unzip_csvs(input, &load_dir)
                } else {
                    Ok(Vec::new())
                }
            })
            .collect()
    });
    let mut outputs = Vec::new();
    for r in per_file {
        outputs.extend(r?);
    }
    outputs.sort();
    outputs.dedup();
    Ok(outputs)
}

fn write_atomic(target: &Path, write: impl FnOnce(&mut File) -> io::Result<()>) -> Result<()> {
    let parent = target.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::Builder::new().prefix(".part-").tempfile_in(parent)?;
    write(tmp.as_file_mut())?;
    tmp.persist(target).map_err(|e| e.error)?;
    Ok(())
}

fn copy_csv(input: &Path, load_dir: &Path) -> Result<PathBuf> {
    let name = input.file_name().expect("listed files have names");
    let target = load_dir.join(name);
    write_atomic(&target, |out| {
        let mut src = File::open(input)?;
        io::copy(&mut src, out).map(|_| ())
    })?;
    Ok(target)
}

fn unzip_csvs(archive: &Path, load_dir: &Path) -> Result<Vec<PathBuf>> {
    let bad = |e: zip::result::ZipError| EtlError::Parse {
        file: archive.to_path_buf(),
        line: 0,
        message: format!("cannot read archive: {e}"),
    };
    let mut zip = zip::ZipArchive::new(File::open(archive)?).map_err(bad)?;
    let mut out = Vec::new();
    for i in 0..zip.len() {
        let mut member = zip.by_index(i).map_err(bad)?;
        if !member.is_file() {
            continue;
        }
        let Some(base) = Path::new(member.name()).file_name().map(|b| b.to_owned()) else {
            continue;
        };
        let base_path = PathBuf::from(&base);
        if !has_ext(&base_path, "csv") || base.to_string_lossy().starts_with('.') {
            continue;
        }
        let target = load_dir.join(&base);
        write_atomic(&target, |f| io::copy(&mut member, f).map(|_| ()))?;
        out.push(target);
    }
    Ok(out)
}

/// Load-ready CSVs for `sel`, sorted by name.
pub(crate) fn select_load_files(ctx: &EtlContext, sel: Option<&Selector>) -> Result<Vec<PathBuf>> {
    let mut csvs: Vec<PathBuf> = fs::read_dir(ctx.load_dir())?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file() && has_ext(p, "csv") && !is_temporary(p))
        .collect();
    csvs.sort();
    match (sel, ctx.source().filename_regex()?) {
        (Some(sel), Some(re)) => match_files_by_year_months(&csvs, &re, sel),
        _ => Ok(csvs),
    }
}

pub fn default_load(ctx: &mut EtlContext, sel: Option<&Selector>) -> Result<BTreeMap<String, u64>> {
    let files = select_load_files(ctx, sel)?;
    ctx.notice(&format!("Loading {} file(s) into the database...", files.len()));
    let mut rows = BTreeMap::new();
    for path in files {
        let table = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let n = ctx.db_mut().load_csv(&table, &path, true)?;
        *rows.entry(table).or_insert(0) += n;
    }
    Ok(rows)
}
