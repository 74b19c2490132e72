use std::io;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("point ({lat}, {lon}) is outside the study bounding box")]
    OutOfDomain { lat: f64, lon: f64 },

    #[error("model has no recurrent class")]
    NoRecurrentClass,

    #[error("stationary distribution did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("no usable records")]
    NoUsableRecords,

    #[error("rejection rate {rate:.4} exceeds configured tolerance {tolerance:.4}")]
    RejectionTolerance { rate: f64, tolerance: f64 },

    #[error("{0}")]
    Domain(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that mean "the input data is unusable" rather than
    /// "the configuration or environment is broken".
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::NoUsableRecords | Error::RejectionTolerance { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
