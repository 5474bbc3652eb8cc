use std::path::PathBuf;

/// Errors raised anywhere in the forecasting pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input file layout is wrong (bad header, missing key, malformed line).
    #[error("format error in {source_name} at line {line}: {message}")]
    Format {
        source_name: String,
        line: usize,
        message: String,
    },

    /// A numeric or date field could not be parsed.
    #[error("parse error in {source_name} at line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    /// Input violates a domain invariant or an operation precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// Caller passed mismatched shapes, caches or parameter sets.
    #[error("contract error: {0}")]
    Contract(String),

    /// Optimisation diverged or produced non-finite values.
    #[error("training error: {0}")]
    Training(String),

    #[error("input file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// True for errors caused by bad input rather than a failing computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Format { .. }
                | Error::Parse { .. }
                | Error::Validation(_)
                | Error::MissingFile(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
