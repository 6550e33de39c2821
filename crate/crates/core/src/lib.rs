//! A small grammar for getting medium-sized public data into SQL.
//!
//! A pipeline is an [`EtlContext`]: a named source, a working directory with
//! `raw/` and `load/` subdirectories, and a database. Seven verbs act on it
//! and hand it back so calls chain:
//!
//! * `etl_init` runs the source's SQL schema (or drops every table)
//! * `etl_extract` puts raw files in `raw/`
//! * `etl_transform` turns them into CSVs in `load/`
//! * `etl_load` appends those CSVs into eponymous tables
//! * `etl_cleanup` deletes files by pattern
//! * `etl_update` is extract, transform and load with one selector
//! * `etl_create` is init, update and cleanup
//!
//! Sources are [`SourceDescriptor`]s held in a [`Registry`]; they can be
//! built in code, read from a `source.toml`, or generated with
//! [`sources::scaffold_source`]. Monthly sources take a [`Selector`] of
//! years and months.

pub mod bench;
pub mod cli;
pub mod dates;
pub mod db;
pub mod error;
pub mod fetch;
pub mod fixture;
pub mod grammar;
pub mod sources;

pub use dates::{Selector, YearMonth};
pub use db::{ConnectionProfile, Database, SqlScript};
pub use error::{EtlError, Result};
pub use grammar::{new_pipeline, CleanupTarget, EtlContext, Outcome, StatusReport, Verb};
pub use sources::{Registry, SourceDescriptor, SourceHooks};
