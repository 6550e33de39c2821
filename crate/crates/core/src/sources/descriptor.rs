//! TOML source descriptors.
//!
//! ```toml
//! name = "citibike"
//! url_template = "https://example.org/{year}{month:02}-citibike-tripdata.zip"
//! filename_pattern = '^(\d{6})-'
//! cleanup_pattern = '\.zip$'
//! init_script = "init.sql"          # a path next to this file, or inline SQL
//! files = ["stations.csv"]          # bundled CSVs; table = file stem
//! years = "2013:2014"               # default selection when none is given
//! months = "1:12"
//! ```
//!
//! When `init_script` is absent, `init.<engine>.sql` and `init.sql` beside
//! the descriptor are picked up automatically.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::SourceDescriptor;
use crate::dates::Selector;
use crate::error::{EtlError, Result};

pub const DESCRIPTOR_FILE: &str = "source.toml";

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DescriptorFile {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    url_template: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    filename_pattern: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cleanup_pattern: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    init_script: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    years: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    months: Option<String>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the first `key =` assignment, for pointing errors at a field.
fn line_of_key(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            l.trim_start()
                .strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
        .unwrap_or(1)
}

/// Parses a descriptor file into a [`SourceDescriptor`] without
/// registering it. Relative paths resolve against the file's directory.
pub fn load_descriptor_file(path: &Path) -> Result<SourceDescriptor> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let err = |line: usize, field: &str, message: String| EtlError::DescriptorParse {
        path: path.to_path_buf(),
        line,
        field: field.to_string(),
        message,
    };

    let raw: DescriptorFile = toml::from_str(&text).map_err(|e| {
        let line = e.span().map(|s| line_of(&text, s.start)).unwrap_or(1);
        let msg = e.message().to_string();
        let field = Regex::new(r"`(\w+)`")
            .ok()
            .and_then(|re| re.captures(&msg).map(|c| c[1].to_string()))
            .unwrap_or_else(|| "document".to_string());
        err(line, &field, msg)
    })?;

    let mut desc = SourceDescriptor::new(raw.name.clone());
    desc.url_template = raw.url_template;
    desc.filename_pattern = raw.filename_pattern;
    desc.cleanup_pattern = raw.cleanup_pattern;

    match raw.init_script {
        Some(s) => {
            let candidate = base.join(&s);
            let looks_like_path = !s.contains('\n') && s.trim_end().ends_with(".sql");
            if looks_like_path {
                if !candidate.is_file() {
                    return Err(err(
                        line_of_key(&text, "init_script"),
                        "init_script",
                        format!("{} does not exist", candidate.display()),
                    ));
                }
                desc.init_script = Some(fs::read_to_string(&candidate)?);
            } else {
                desc.init_script = Some(s);
            }
        }
        None => {
            let generic = base.join("init.sql");
            if generic.is_file() {
                desc.init_script = Some(fs::read_to_string(generic)?);
            }
        }
    }
    desc.engine_init_scripts = engine_scripts_in(base)?;

    for f in &raw.files {
        let p = base.join(f);
        let payload = fs::read_to_string(&p).map_err(|e| {
            err(
                line_of_key(&text, "files"),
                "files",
                format!("{}: {e}", p.display()),
            )
        })?;
        let table = Path::new(f)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        desc.bundled_data.push((table, payload));
    }

    if let Some(years) = &raw.years {
        let sel = Selector::parse(years, raw.months.as_deref())
            .map_err(|e| err(line_of_key(&text, "years"), "years", e.to_string()))?;
        desc.default_selector = Some(sel);
    } else if raw.months.is_some() {
        return Err(err(
            line_of_key(&text, "months"),
            "months",
            "months given without years".into(),
        ));
    }

    desc.validate().map_err(|e| {
        let field = match &e {
            EtlError::InvalidPattern(_) => {
                if desc.cleanup_pattern.as_deref().is_some_and(|p| Regex::new(p).is_err()) {
                    "cleanup_pattern"
                } else {
                    "filename_pattern"
                }
            }
            EtlError::InvalidSource(m) if m.contains("url_template") => "url_template",
            EtlError::InvalidSource(m) if m.contains("filename_pattern") => "filename_pattern",
            _ => "name",
        };
        err(line_of_key(&text, field), field, e.to_string())
    })?;
    Ok(desc)
}

fn engine_scripts_in(dir: &Path) -> Result<BTreeMap<String, String>> {
    let re = Regex::new(r"^init\.([A-Za-z0-9_]+)\.sql$").expect("static regex");
    let mut out = BTreeMap::new();
    let Ok(entries) = fs::read_dir(dir) else {
        return Ok(out);
    };
    for entry in entries.filter_map(|e| e.ok()) {
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(c) = re.captures(&name) {
            out.insert(c[1].to_string(), fs::read_to_string(entry.path())?);
        }
    }
    Ok(out)
}

/// Writes `desc` as `dir/source.toml` plus its bundled CSVs and
/// engine-specific init scripts. Hooks are code and are not written.
pub fn save_descriptor(desc: &SourceDescriptor, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (table, payload) in &desc.bundled_data {
        let name = format!("{table}.csv");
        fs::write(dir.join(&name), payload)?;
        files.push(name);
    }
    for (engine, sql) in &desc.engine_init_scripts {
        fs::write(dir.join(format!("init.{engine}.sql")), sql)?;
    }
    let (years, months) = match &desc.default_selector {
        Some(sel) => {
            let shown = sel.to_string();
            let mut parts = shown.split_whitespace();
            let y = parts.next().and_then(|p| p.strip_prefix("years=")).map(String::from);
            let m = parts.next().and_then(|p| p.strip_prefix("months=")).map(String::from);
            (y, m)
        }
        None => (None, None),
    };
    let file = DescriptorFile {
        name: desc.name.clone(),
        url_template: desc.url_template.clone(),
        filename_pattern: desc.filename_pattern.clone(),
        cleanup_pattern: desc.cleanup_pattern.clone(),
        init_script: desc.init_script.clone(),
        files,
        years,
        months,
    };
    let text = toml::to_string(&file).map_err(|e| std::io::Error::other(e.to_string()))?;
    let path = dir.join(DESCRIPTOR_FILE);
    fs::write(&path, text)?;
    Ok(path)
}
