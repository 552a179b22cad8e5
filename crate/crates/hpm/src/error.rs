//! Error type shared across the crate.

use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Tensor dimensions do not line up for the requested operation.
    Shape(String),
    /// A configuration value is out of range or inconsistent with the rest.
    Config(String),
    /// Raw input data could not be parsed.
    Ingest { message: String, lines: Vec<usize> },
    /// Parsed data violates a structural requirement.
    DataIntegrity(String),
    /// An internal API was called in a way its contract forbids.
    Contract(String),
    /// A loss or parameter became NaN or infinite.
    NonFinite(String),
    /// A required artifact (embeddings, checkpoint, dataset) is absent.
    MissingPrerequisite(String),
    /// Filesystem failure, annotated with the path involved.
    Io { path: PathBuf, source: std::io::Error },
    /// JSON (de)serialization failure.
    Json(serde_json::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Ingest { message, lines } => {
                write!(f, "ingestion failed: {message}")?;
                if !lines.is_empty() {
                    let shown: Vec<String> =
                        lines.iter().take(20).map(|l| l.to_string()).collect();
                    write!(f, " (lines {}", shown.join(", "))?;
                    if lines.len() > 20 {
                        write!(f, ", and {} more", lines.len() - 20)?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
            Error::DataIntegrity(msg) => write!(f, "data integrity violation: {msg}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::MissingPrerequisite(msg) => write!(f, "missing prerequisite: {msg}"),
            Error::Io { path, source } => write!(f, "io error on {}: {source}", path.display()),
            Error::Json(err) => write!(f, "json error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            Error::Json(err) => Some(err),
            _ => None,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Json(err)
    }
}

impl Error {
    /// Attaches a path to a raw io error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
