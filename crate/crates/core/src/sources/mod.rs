//! Data sources and the registry that resolves them by name.
//!
//! A source is described by a [`SourceDescriptor`]: where its files come
//! from (bundled CSV payloads or a URL template), how dated files are
//! named, which SQL script initialises its tables, and optionally a
//! [`SourceHooks`] implementation that replaces the default extract,
//! transform or load behaviour.

mod defaults;
mod demo;
mod descriptor;
mod scaffold;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use regex::Regex;

pub use defaults::{default_extract, default_load, default_transform, DefaultHooks};
pub(crate) use defaults::list_files;
pub use demo::{demo_cars, MTCARS_CSV, MTCARS_INIT_SQL};
pub use descriptor::{load_descriptor_file, save_descriptor, DESCRIPTOR_FILE};
pub use scaffold::scaffold_source;

use crate::dates::{Selector, YearMonth};
use crate::error::{EtlError, Result};
use crate::fetch::DownloadReport;
use crate::grammar::EtlContext;

/// Per-source overrides for the three workhorse verbs. Every method
/// defaults to the built-in behaviour, so an implementation only writes
/// the phases that differ.
pub trait SourceHooks: Send + Sync {
    fn extract(&self, ctx: &mut EtlContext, sel: Option<&Selector>) -> Result<DownloadReport> {
        default_extract(ctx, sel)
    }

    fn transform(&self, ctx: &mut EtlContext, sel: Option<&Selector>) -> Result<Vec<PathBuf>> {
        default_transform(ctx, sel)
    }

    fn load(&self, ctx: &mut EtlContext, sel: Option<&Selector>) -> Result<BTreeMap<String, u64>> {
        default_load(ctx, sel)
    }
}

#[derive(Clone, Default)]
pub struct SourceDescriptor {
    pub name: String,
    /// URL with optional `{year}`, `{month}` and `{month:02}` placeholders.
    pub url_template: Option<String>,
    /// `(table name, CSV payload)` pairs shipped with the source.
    pub bundled_data: Vec<(String, String)>,
    pub init_script: Option<String>,
    /// Engine-specific init scripts keyed by engine name (`sqlite`, ...),
    /// preferred over `init_script` when the engine matches.
    pub engine_init_scripts: BTreeMap<String, String>,
    /// Regex whose first capture group is a `YYYYMM` stamp.
    pub filename_pattern: Option<String>,
    pub cleanup_pattern: Option<String>,
    /// What "everything" means when a verb gets no selector.
    pub default_selector: Option<Selector>,
    pub hooks: Option<Arc<dyn SourceHooks>>,
}

impl PartialEq for SourceDescriptor {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.url_template == other.url_template
            && self.bundled_data == other.bundled_data
            && self.init_script == other.init_script
            && self.engine_init_scripts == other.engine_init_scripts
            && self.filename_pattern == other.filename_pattern
            && self.cleanup_pattern == other.cleanup_pattern
            && self.default_selector == other.default_selector
            && match (&self.hooks, &other.hooks) {
                (None, None) => true,
                (Some(a), Some(b)) => Arc::ptr_eq(a, b),
                _ => false,
            }
    }
}

impl fmt::Debug for SourceDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceDescriptor")
            .field("name", &self.name)
            .field("url_template", &self.url_template)
            .field(
                "bundled_data",
                &self.bundled_data.iter().map(|(t, _)| t).collect::<Vec<_>>(),
            )
            .field("init_script", &self.init_script.as_ref().map(|s| s.len()))
            .field("engine_init_scripts", &self.engine_init_scripts.keys())
            .field("filename_pattern", &self.filename_pattern)
            .field("cleanup_pattern", &self.cleanup_pattern)
            .field("default_selector", &self.default_selector)
            .field("hooks", &self.hooks.is_some())
            .finish()
    }
}

impl SourceDescriptor {
    pub fn new(name: impl Into<String>) -> Self {
        SourceDescriptor {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn url_template(mut self, t: impl Into<String>) -> Self {
        self.url_template = Some(t.into());
        self
    }

    pub fn bundle(mut self, table: impl Into<String>, csv: impl Into<String>) -> Self {
        self.bundled_data.push((table.into(), csv.into()));
        self
    }

    pub fn init_script(mut self, sql: impl Into<String>) -> Self {
        self.init_script = Some(sql.into());
        self
    }

    pub fn filename_pattern(mut self, p: impl Into<String>) -> Self {
        self.filename_pattern = Some(p.into());
        self
    }

    pub fn cleanup_pattern(mut self, p: impl Into<String>) -> Self {
        self.cleanup_pattern = Some(p.into());
        self
    }

    pub fn default_selector(mut self, sel: Selector) -> Self {
        self.default_selector = Some(sel);
        self
    }

    pub fn hooks(mut self, hooks: Arc<dyn SourceHooks>) -> Self {
        self.hooks = Some(hooks);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !valid_source_name(&self.name) {
            return Err(EtlError::InvalidSource(format!(
                "'{}' is not a valid source name (use letters, digits, '_', '-', '.')",
                self.name
            )));
        }
        if let Some(p) = &self.filename_pattern {
            let re = Regex::new(p)?;
            if re.captures_len() < 2 {
                return Err(EtlError::InvalidSource(format!(
                    "filename_pattern '{p}' needs a capture group for the YYYYMM stamp"
                )));
            }
        }
        if let Some(p) = &self.cleanup_pattern {
            Regex::new(p)?;
        }
        if let Some(t) = &self.url_template {
            let sample = YearMonth::new(2000, 1).expect("valid");
            let url = expand_template(t, sample);
            url::Url::parse(&url).map_err(|e| {
                EtlError::InvalidSource(format!("url_template '{t}' is not a valid URL: {e}"))
            })?;
        }
        Ok(())
    }

    pub fn filename_regex(&self) -> Result<Option<Regex>> {
        Ok(self.filename_pattern.as_deref().map(Regex::new).transpose()?)
    }

    pub fn is_templated(&self) -> bool {
        self.url_template.as_deref().is_some_and(has_placeholders)
    }

    /// The URLs an extract over `sel` should fetch, in selector order.
    pub fn expand_urls(&self, sel: Option<&Selector>) -> Result<Vec<String>> {
        let Some(template) = &self.url_template else {
            return Ok(Vec::new());
        };
        if !has_placeholders(template) {
            return Ok(vec![template.clone()]);
        }
        let months = self.selected_months(sel)?;
        Ok(months.into_iter().map(|ym| expand_template(template, ym)).collect())
    }

    /// Resolves an optional selector against the source's default.
    pub fn selected_months(&self, sel: Option<&Selector>) -> Result<Vec<YearMonth>> {
        match sel.or(self.default_selector.as_ref()) {
            Some(s) => Ok(s.expand()),
            None => Err(EtlError::SelectorRequired {
                source_name: self.name.clone(),
                reason: "its URL template is dated and it declares no default years".into(),
            }),
        }
    }

    /// The init script for `engine`, preferring an engine-specific one.
    pub fn init_script_for(&self, engine: &str) -> Option<&str> {
        self.engine_init_scripts
            .get(engine)
            .or(self.init_script.as_ref())
            .map(String::as_str)
    }
}

pub fn valid_source_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !name.starts_with('.')
}

fn has_placeholders(t: &str) -> bool {
    t.contains("{year}") || t.contains("{month}") || t.contains("{month:02}")
}

pub fn expand_template(template: &str, ym: YearMonth) -> String {
    template
        .replace("{year}", &format!("{:04}", ym.year()))
        .replace("{month:02}", &format!("{:02}", ym.month()))
        .replace("{month}", &ym.month().to_string())
}

/// Name-to-descriptor map. Sources are registered up front; lookups that
/// miss can fall back to `<search path>/<name>/source.toml`.
#[derive(Default)]
pub struct Registry {
    sources: BTreeMap<String, Arc<SourceDescriptor>>,
    search_paths: Vec<PathBuf>,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    /// A registry holding the built-in `demo-cars` source.
    pub fn with_builtins() -> Self {
        let mut r = Registry::new();
        r.register(demo_cars()).expect("builtin sources are valid");
        r
    }

    pub fn register(&mut self, desc: SourceDescriptor) -> Result<Arc<SourceDescriptor>> {
        desc.validate()?;
        if self.sources.contains_key(&desc.name) {
            return Err(EtlError::DuplicateSource(desc.name));
        }
        let desc = Arc::new(desc);
        self.sources.insert(desc.name.clone(), desc.clone());
        Ok(desc)
    }

    pub fn resolve(&self, name: &str) -> Result<Arc<SourceDescriptor>> {
        self.sources
            .get(name)
            .cloned()
            .ok_or_else(|| EtlError::UnknownSource(name.to_string()))
    }

    pub fn add_search_path(&mut self, dir: impl Into<PathBuf>) {
        self.search_paths.push(dir.into());
    }

    /// Like [`resolve`](Self::resolve), but on a miss looks for a
    /// descriptor directory named after the source on the search paths.
    pub fn resolve_or_discover(&mut self, name: &str) -> Result<Arc<SourceDescriptor>> {
        if let Ok(d) = self.resolve(name) {
            return Ok(d);
        }
        if valid_source_name(name) {
            let found = self
                .search_paths
                .iter()
                .map(|p| p.join(name).join(DESCRIPTOR_FILE))
                .find(|p| p.is_file());
            if let Some(path) = found {
                let desc = self.load_declarative(&path)?;
                if desc.name == name {
                    return Ok(desc);
                }
            }
        }
        Err(EtlError::UnknownSource(name.to_string()))
    }

    /// Parses a descriptor file and registers the result.
    pub fn load_declarative(&mut self, path: &Path) -> Result<Arc<SourceDescriptor>> {
        let desc = load_descriptor_file(path)?;
        self.register(desc)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sources.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn register_and_resolve() {
        let mut r = Registry::with_builtins();
        let d = r.resolve("demo-cars").unwrap();
        assert_eq!(*d, demo_cars());
        assert!(matches!(r.register(demo_cars()), Err(EtlError::DuplicateSource(_))));
        let err = r.resolve("foo").unwrap_err();
        assert!(err.to_string().contains("'foo'"));
    }

    #[test]
    fn template_expansion() {
        let d = SourceDescriptor::new("t")
            .url_template("http://h/{year}{month:02}-trips.zip")
            .default_selector(Selector::years([2013]));
        let urls = d
            .expand_urls(Some(&Selector::years([1996, 1997]).with_months([1, 2, 3, 4, 5, 6, 9])))
            .unwrap();
        assert_eq!(urls.len(), 14);
        assert_eq!(urls[0], "http://h/199601-trips.zip");
        assert_eq!(d.expand_urls(None).unwrap().len(), 12);

        let fixed = SourceDescriptor::new("f").url_template("http://h/one.csv");
        assert_eq!(fixed.expand_urls(Some(&Selector::years([2013]))).unwrap().len(), 1);

        let undated = SourceDescriptor::new("u").url_template("http://h/{year}.csv");
        assert!(matches!(undated.expand_urls(None), Err(EtlError::SelectorRequired { .. })));
    }

    #[test]
    fn validation() {
        assert!(SourceDescriptor::new("").validate().is_err());
        assert!(SourceDescriptor::new("a b").validate().is_err());
        assert!(SourceDescriptor::new("ok").filename_pattern("^\\d{6}").validate().is_err());
        assert!(SourceDescriptor::new("ok").cleanup_pattern("(").validate().is_err());
        assert!(SourceDescriptor::new("ok").url_template("not a url {year}").validate().is_err());
        assert!(SourceDescriptor::new("ok").filename_pattern("^(\\d{6})").validate().is_ok());
    }

    #[test]
    fn engine_specific_init_wins() {
        let mut d = SourceDescriptor::new("x").init_script("generic");
        assert_eq!(d.init_script_for("sqlite"), Some("generic"));
        d.engine_init_scripts.insert("sqlite".into(), "flavoured".into());
        assert_eq!(d.init_script_for("sqlite"), Some("flavoured"));
        assert_eq!(d.init_script_for("mysql"), Some("generic"));
    }
}
