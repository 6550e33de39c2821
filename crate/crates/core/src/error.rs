use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = EtlError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum EtlError {
    #[error("unknown source '{0}': please make sure that the '{0}' source is registered or installed")]
    UnknownSource(String),

    #[error("source '{0}' is already registered")]
    DuplicateSource(String),

    #[error("invalid source: {0}")]
    InvalidSource(String),

    #[error("source '{0}' has neither bundled data nor a URL template; nothing to extract")]
    NothingToExtract(String),

    #[error("source '{source_name}' needs a year/month selector: {reason}")]
    SelectorRequired { source_name: String, reason: String },

    #[error("{path}:{line}: invalid source descriptor ({field}): {message}")]
    DescriptorParse {
        path: PathBuf,
        line: usize,
        field: String,
        message: String,
    },

    #[error("refusing to scaffold into non-empty directory {0}")]
    TargetExists(PathBuf),

    #[error("invalid pattern: {0}")]
    InvalidPattern(#[from] regex::Error),

    #[error("invalid date in '{name}': {detail}")]
    InvalidDate { name: String, detail: String },

    #[error("invalid selector: {0}")]
    InvalidSelector(String),

    #[error("raw file {0} is missing; run extract first")]
    MissingRawFile(PathBuf),

    #[error("{file}:{line}: {message}")]
    Parse {
        file: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{0} has no header row")]
    EmptyCsv(PathBuf),

    #[error("{file}:{line}: row has a different number of fields than the header")]
    RaggedRows { file: PathBuf, line: u64 },

    #[error("table '{table}' does not match the CSV header: {detail}")]
    TypeMismatch { table: String, detail: String },

    #[error("database unreachable: {0}")]
    DbUnreachable(String),

    #[error("statement {index} failed: {message}")]
    Script { index: usize, message: String },

    #[error("every requested file failed to download ({failed} failure(s)); first: {first}")]
    FetchFailed { failed: usize, first: String },

    #[error("connection profile group [{0}] not found")]
    MissingGroup(String),

    #[error("malformed configuration: {0}")]
    MalformedConfig(String),

    #[error("push-down and client-side results differ: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Sqlite(#[from] rusqlite::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Zip(#[from] zip::result::ZipError),

    #[error(transparent)]
    Io(#[from] io::Error),
}
