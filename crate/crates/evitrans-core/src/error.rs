//! Error type shared by the core numerics.

use alloc::string::String;
use core::fmt;

/// Errors produced by the core numerics.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Operand shapes are incompatible.
    Shape(String),
    /// A configuration value is out of its valid range.
    Config(String),
    /// A computation produced or received a non-finite value.
    Numeric(String),
    /// Too few rows or neighbors for the requested operation.
    Count(String),
    /// Evidence rows are not aligned with the data rows.
    Alignment(String),
    /// Evidence source is degenerate (fewer than two classes).
    DegenerateEvidence(String),
    /// A screening run could not reach a verdict.
    Inconclusive(String),
    /// A gradient check could not be carried out.
    Check(String),
    /// Cluster ids cannot be put in bijection with the labels.
    Mapping(String),
    /// Training diverged; the payload carries the iteration index.
    Diverged { epoch: usize, detail: String },
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::Shape(msg) => write!(f, "shape error: {msg}"),
            CoreError::Config(msg) => write!(f, "configuration error: {msg}"),
            CoreError::Numeric(msg) => write!(f, "numeric error: {msg}"),
            CoreError::Count(msg) => write!(f, "count error: {msg}"),
            CoreError::Alignment(msg) => write!(f, "alignment error: {msg}"),
            CoreError::DegenerateEvidence(msg) => write!(f, "degenerate evidence: {msg}"),
            CoreError::Inconclusive(msg) => write!(f, "inconclusive: {msg}"),
            CoreError::Check(msg) => write!(f, "gradient check error: {msg}"),
            CoreError::Mapping(msg) => write!(f, "mapping error: {msg}"),
            CoreError::Diverged { epoch, detail } => {
                write!(f, "diverged at epoch {epoch}: {detail}")
            }
        }
    }
}

impl core::error::Error for CoreError {}

pub type Result<T> = core::result::Result<T, CoreError>;
