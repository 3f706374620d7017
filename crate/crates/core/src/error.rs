use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("truncation level unreachable: g(t)/t never reaches {target} on [0, {limit:e}]")]
    TruncationUnreachable { target: f64, limit: f64 },

    #[error("endpoint search failed: no scaling t <= {t_max:e} gives a nonpositive energy")]
    EndpointSearchFailed { t_max: f64 },

    #[error("mountain-pass geometry lost: peak energy {peak} is not positive")]
    GeometryLost { peak: f64 },

    #[error("refinement diverged after {iterations} iterations: {reason}")]
    Diverged { iterations: usize, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
