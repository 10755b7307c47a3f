//! Persistence, configuration and experiment pipelines around `gcarl-core`.

pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
