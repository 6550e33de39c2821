//! Connection profiles and MySQL-style option files.
//!
//! An option file is INI text: `[group]` headers, `key=value` lines and
//! `#`/`;` comments. Keys in `[client]` (and keys before the first header)
//! are defaults that the selected group overrides. Recognised keys are
//! `host`, `port`, `user`, `password` and `database`, plus `engine` to pick
//! the backend explicitly. Everything else lands in `options`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use ini::{Ini, ParseOption};
use serde::{Deserialize, Serialize};

use crate::error::{EtlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    EmbeddedFile,
    Server,
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionProfile {
    pub engine: Engine,
    /// Database file for embedded profiles.
    pub path: Option<PathBuf>,
    pub host: Option<String>,
    pub port: Option<u16>,
    pub database: Option<String>,
    pub user: Option<String>,
    #[serde(skip_serializing)]
    pub secret: Option<String>,
    pub options: BTreeMap<String, String>,
}

// keeps the password out of logs
impl fmt::Debug for ConnectionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConnectionProfile")
            .field("engine", &self.engine)
            .field("path", &self.path)
            .field("host", &self.host)
            .field("port", &self.port)
            .field("database", &self.database)
            .field("user", &self.user)
            .field("secret", &self.secret.as_ref().map(|_| "***"))
            .field("options", &self.options)
            .finish()
    }
}

impl ConnectionProfile {
    pub fn embedded(path: impl Into<PathBuf>) -> Self {
        ConnectionProfile {
            engine: Engine::EmbeddedFile,
            path: Some(path.into()),
            host: None,
            port: None,
            database: None,
            user: None,
            secret: None,
            options: BTreeMap::new(),
        }
    }

    pub fn server(host: impl Into<String>, database: impl Into<String>) -> Self {
        ConnectionProfile {
            engine: Engine::Server,
            path: None,
            host: Some(host.into()),
            port: None,
            database: Some(database.into()),
            user: None,
            secret: None,
            options: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.engine {
            Engine::EmbeddedFile if self.path.is_none() => Err(EtlError::MalformedConfig(
                "embedded profile needs a database path".into(),
            )),
            Engine::Server if self.host.is_none() || self.database.is_none() => Err(
                EtlError::MalformedConfig("server profile needs host and database".into()),
            ),
            _ => Ok(()),
        }
    }
}

const DEFAULT_GROUPS: &[&str] = &["client"];

/// Reads `group` from an option file, layered over the default groups.
///
/// Relative embedded database paths resolve against the option file's
/// directory.
pub fn profile_from_config(file: &Path, group: &str) -> Result<ConnectionProfile> {
    let text = std::fs::read_to_string(file)?;
    let opts = ParseOption {
        enabled_quote: false,
        enabled_escape: false,
        ..ParseOption::default()
    };
    let ini = Ini::load_from_str_opt(&text, opts)
        .map_err(|e| EtlError::MalformedConfig(format!("{}: {e}", file.display())))?;
    if ini.iter().all(|(_, props)| props.is_empty()) && ini.sections().all(|s| s.is_none()) {
        return Err(EtlError::MalformedConfig(format!(
            "{}: no sections or keys",
            file.display()
        )));
    }

    let selected = ini
        .section(Some(group))
        .ok_or_else(|| EtlError::MissingGroup(group.to_string()))?;

    let mut merged: BTreeMap<String, String> = BTreeMap::new();
    if let Some(general) = ini.section(None::<String>) {
        merged.extend(general.iter().map(|(k, v)| (k.to_string(), v.to_string())));
    }
    for g in DEFAULT_GROUPS.iter().filter(|g| **g != group) {
        if let Some(props) = ini.section(Some(*g)) {
            merged.extend(props.iter().map(|(k, v)| (k.to_string(), v.to_string())));
        }
    }
    merged.extend(selected.iter().map(|(k, v)| (k.to_string(), v.to_string())));

    let base = file.parent().unwrap_or(Path::new("."));
    profile_from_map(merged, base)
}

fn profile_from_map(mut map: BTreeMap<String, String>, base: &Path) -> Result<ConnectionProfile> {
    let engine_key = map.remove("engine");
    let host = map.remove("host");
    let engine = match engine_key.as_deref() {
        Some("sqlite") | Some("embedded") | Some("embedded-file") => Engine::EmbeddedFile,
        Some(other) => {
            map.insert("server_kind".into(), other.to_string());
            Engine::Server
        }
        None if host.is_some() => Engine::Server,
        None => Engine::EmbeddedFile,
    };
    let port = match map.remove("port") {
        Some(p) => Some(
            p.trim()
                .parse::<u16>()
                .map_err(|_| EtlError::MalformedConfig(format!("port '{p}' is not a number")))?,
        ),
        None => None,
    };
    let database = map.remove("database");
    let path = match engine {
        Engine::EmbeddedFile => map
            .remove("path")
            .or_else(|| database.clone())
            .map(|p| base.join(p)),
        Engine::Server => None,
    };
    let profile = ConnectionProfile {
        engine,
        path,
        host,
        port,
        database,
        user: map.remove("user"),
        secret: map.remove("password"),
        options: map,
    };
    profile.validate()?;
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("my.cnf");
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn group_overrides_client() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "# comment\n[client]\nuser=alice\npassword=pw\nhost=localhost\n\n[scidb]\nhost=mysql.example.org\ndatabase=airlines\n; trailing\n",
        );
        let prof = profile_from_config(&p, "scidb").unwrap();
        assert_eq!(prof.engine, Engine::Server);
        assert_eq!(prof.host.as_deref(), Some("mysql.example.org"));
        assert_eq!(prof.user.as_deref(), Some("alice"));
        assert_eq!(prof.secret.as_deref(), Some("pw"));
        assert_eq!(prof.database.as_deref(), Some("airlines"));
        assert!(!format!("{prof:?}").contains("pw\""));
    }

    #[test]
    fn embedded_group_resolves_relative_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "[local]\nengine=sqlite\ndatabase=local.sqlite3\n");
        let prof = profile_from_config(&p, "local").unwrap();
        assert_eq!(prof.engine, Engine::EmbeddedFile);
        assert_eq!(prof.path, Some(dir.path().join("local.sqlite3")));
    }

    #[test]
    fn missing_group_and_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "[client]\nuser=a\n");
        assert!(matches!(profile_from_config(&p, "nope"), Err(EtlError::MissingGroup(g)) if g == "nope"));
        let p = write(dir.path(), "");
        assert!(matches!(profile_from_config(&p, "x"), Err(EtlError::MalformedConfig(_))));
        let p = write(dir.path(), "[s]\nport=abc\nhost=h\ndatabase=d\n");
        assert!(matches!(profile_from_config(&p, "s"), Err(EtlError::MalformedConfig(_))));
    }
}
