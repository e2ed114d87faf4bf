use std::path::PathBuf;

use crate::providers::ProviderError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: malformed JSON at byte {offset}: {message}")]
    Parse {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("invalid timestamp {input:?}: {reason}")]
    Timestamp { input: String, reason: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("record {index} in {path}: {reason}")]
    Record {
        path: PathBuf,
        index: usize,
        reason: String,
    },

    #[error(transparent)]
    Provider(#[from] ProviderError),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("not authorized: {0}")]
    Authorization(String),

    #[error("stage `{stage}` requires `{prerequisite}` to run first")]
    Dependency { stage: String, prerequisite: String },

    #[error("{0} (rerun with --force to override)")]
    ConfigMismatch(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Stable machine-readable kind used in JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Timestamp { .. } => "timestamp",
            Error::Validation(_) | Error::Record { .. } => "validation",
            Error::Provider(_) => "provider",
            Error::NotFound(_) => "not_found",
            Error::Authorization(_) => "authorization",
            Error::Dependency { .. } => "dependency",
            Error::ConfigMismatch(_) => "config_mismatch",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Record { .. } | Error::Timestamp { .. } => 2,
            Error::Parse { .. } | Error::Json(_) => 3,
            Error::NotFound(_) => 4,
            Error::Dependency { .. } => 5,
            Error::ConfigMismatch(_) => 6,
            Error::Provider(_) => 7,
            Error::Authorization(_) => 8,
            Error::Io { .. } => 9,
        }
    }
}

/// Convert a serde_json error over `text` into a byte offset.
pub(crate) fn json_byte_offset(text: &str, err: &serde_json::Error) -> usize {
    let (line, column) = (err.line(), err.column());
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(text.len());
        }
        offset += l.len();
    }
    text.len()
}

pub(crate) fn parse_json_file<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_json_text(path, &text)
}

pub(crate) fn parse_json_text<T: serde::de::DeserializeOwned>(
    path: &std::path::Path,
    text: &str,
) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        offset: json_byte_offset(text, &e),
        message: e.to_string(),
    })
}
