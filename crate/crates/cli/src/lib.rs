//! Command-line driver: configuration, the pipeline stages and their file
//! outputs.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod svg;

pub use config::{Overrides, PipelineConfig};
pub use error::CliError;
pub use pipeline::{cmd_forecast, cmd_ingest, cmd_run, cmd_score, cmd_topics, execute, Stage};
