use std::path::PathBuf;

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("geometry error for muscle `{muscle}`: musculotendon length {lmt:.6} m does not exceed tendon slack length {lst:.6} m at q = {q:.6} rad")]
    Geometry {
        muscle: String,
        q: f64,
        lmt: f64,
        lst: f64,
    },

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("simulation unstable at t = {t:.4} s: q = {q:.4} rad left the joint range {range:?} by more than 0.5 rad")]
    Unstable { t: f64, q: f64, range: [f64; 2] },

    #[error("invalid configuration at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("schema error in {path}: {reason}")]
    Schema { path: String, reason: String },

    #[error("missing artifact: {0}")]
    MissingArtifact(PathBuf),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn schema(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code for the command-line front end: 2 for validation
    /// problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_)
            | Error::Unstable { .. }
            | Error::Geometry { .. }
            | Error::Domain(_)
            | Error::Shape { .. } => 3,
            _ => 2,
        }
    }
}
