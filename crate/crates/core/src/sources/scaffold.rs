use std::fs;
use std::path::{Path, PathBuf};

use super::{load_descriptor_file, valid_source_name, DESCRIPTOR_FILE};
use crate::error::{EtlError, Result};

pub const EXAMPLE_URL: &str = "https://example.org/data/sample.csv";

fn descriptor_template(name: &str, url: &str) -> String {
    format!(
        r#"# Source descriptor for '{name}'.
name = "{name}"

# Specify the URL(s) that you want to download. Monthly files can use
# {{year}} and {{month:02}} placeholders together with `years`/`months`.
url_template = "{url}"

# Uncomment for date-stamped files, e.g. 201307-tripdata.zip
# filename_pattern = '^(\d{{6}})-'
# years = "2013:2014"
# months = "1:12"

# Files matching this pattern are deleted at the end of `create`.
# cleanup_pattern = '\.zip$'

# SQL run by `init`; a path next to this file or inline SQL.
# init_script = "init.sql"
"#
    )
}

fn hooks_template(name: &str, url: &str) -> String {
    let ty: String = name
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|p| !p.is_empty())
        .map(|p| {
            let mut cs = p.chars();
            cs.next()
                .map(|c| c.to_ascii_uppercase().to_string() + cs.as_str())
                .unwrap_or_default()
        })
        .collect();
    format!(
        r#"//! Compiled hooks for the '{name}' source.
//!
//! The descriptor next to this file is enough for the default pipeline.
//! Register these hooks when extract, transform or load need custom code:
//!
//!     let desc = etl::sources::load_descriptor_file("{name}/source.toml".as_ref())?
//!         .hooks(std::sync::Arc::new({ty}Hooks));
//!     registry.register(desc)?;

use etl::dates::Selector;
use etl::fetch::{{smart_download, DownloadReport}};
use etl::grammar::EtlContext;
use etl::sources::SourceHooks;

pub struct {ty}Hooks;

impl SourceHooks for {ty}Hooks {{
    fn extract(&self, ctx: &mut EtlContext, _sel: Option<&Selector>) -> etl::Result<DownloadReport> {{
        // Specify the URLs that you want to download
        let src = vec!["{url}".to_string()];

        // smart_download skips files that are already in raw/
        smart_download(ctx, &src, None)
    }}

    // transform and load fall back to the defaults: copy raw CSVs to
    // load/, then append each into the table named after the file.
}}
"#
    )
}

/// Writes a ready-to-run source skeleton to `out_dir/<name>/` and returns
/// the created paths. The descriptor loads as-is; `url` defaults to a
/// placeholder address.
pub fn scaffold_source(name: &str, out_dir: &Path, url: Option<&str>) -> Result<Vec<PathBuf>> {
    if !valid_source_name(name) {
        return Err(EtlError::InvalidSource(format!("'{name}' is not a valid source name")));
    }
    let url = url.unwrap_or(EXAMPLE_URL);
    url::Url::parse(url)
        .map_err(|e| EtlError::InvalidSource(format!("'{url}' is not a valid URL: {e}")))?;
    let target = out_dir.join(name);
    if target.exists() {
        let non_empty = !target.is_dir() || fs::read_dir(&target)?.next().is_some();
        if non_empty {
            return Err(EtlError::TargetExists(target));
        }
    }
    fs::create_dir_all(&target)?;
    let descriptor = target.join(DESCRIPTOR_FILE);
    let hooks = target.join("hooks.rs");
    fs::write(&descriptor, descriptor_template(name, url))?;
    fs::write(&hooks, hooks_template(name, url))?;
    // a scaffold that does not load is a bug here, not the user's problem
    load_descriptor_file(&descriptor)?;
    Ok(vec![descriptor, hooks])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaffold_loads_and_refuses_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let paths = scaffold_source("newpkg", dir.path(), None).unwrap();
        assert_eq!(paths[0], dir.path().join("newpkg").join("source.toml"));
        let desc = load_descriptor_file(&paths[0]).unwrap();
        assert_eq!(desc.name, "newpkg");
        assert_eq!(desc.url_template.as_deref(), Some(EXAMPLE_URL));
        let stub = fs::read_to_string(&paths[1]).unwrap();
        assert!(stub.contains("impl SourceHooks for NewpkgHooks"));
        assert_eq!(stub.matches("https://").count(), 1);

        assert!(matches!(
            scaffold_source("newpkg", dir.path(), None),
            Err(EtlError::TargetExists(_))
        ));
        // an existing but empty directory is fine
        fs::create_dir(dir.path().join("empty")).unwrap();
        scaffold_source("empty", dir.path(), None).unwrap();
    }
}
