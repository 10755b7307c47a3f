use std::io;
use std::path::{Path, PathBuf};

use gcarl_core::estimator::TrainError;
use gcarl_core::evaluation::EvalError;
use gcarl_core::graphs::GraphError;
use gcarl_core::grn::GrnError;
use gcarl_core::mixing::MixingError;
use gcarl_core::sampler::SamplerError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Numeric(_) => 3,
            Error::Io { .. } | Error::Format { .. } => 4,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, msg: impl Into<String>) -> Self {
        Error::Format { path: path.to_path_buf(), msg: msg.into() }
    }
}

impl From<TrainError> for Error {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { .. } | TrainError::NonFinite { .. } => Error::Numeric(e.to_string()),
            other => Error::Config(other.to_string()),
        }
    }
}

impl From<SamplerError> for Error {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::NonIntegrable => Error::Numeric(e.to_string()),
            other => Error::Config(other.to_string()),
        }
    }
}

impl From<MixingError> for Error {
    fn from(e: MixingError) -> Self {
        match e {
            MixingError::RedrawBudget(_) => Error::Numeric(e.to_string()),
            other => Error::Config(other.to_string()),
        }
    }
}

macro_rules! config_error {
    ($($t:ty),*) => {$(
        impl From<$t> for Error {
            fn from(e: $t) -> Self {
                Error::Config(e.to_string())
            }
        }
    )*};
}

config_error!(GraphError, GrnError, EvalError);
