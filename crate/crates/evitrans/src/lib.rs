//! Evidence-transfer experiments: file formats, pipeline and CLI support.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataio;
pub mod error;
pub mod pipeline;
pub mod report;

pub use error::{AppError, Result};
