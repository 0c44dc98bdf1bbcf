//! Error types shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

use crate::condition::ContextCondition;

/// An input violated a documented invariant.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{message}")]
pub struct ValidationError {
    pub message: String,
}

impl ValidationError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }
}

/// Failures while reading relation, probe, vocabulary or replay files.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Validation(#[from] ValidationError),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, column: usize, message: impl Into<String>) -> Self {
        DataError::Format {
            path: path.into(),
            line,
            column,
            message: message.into(),
        }
    }
}

/// Errors raised by the power-law fitting layer.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum FitError {
    #[error("need at least 3 points to fit a power law, got {0}")]
    InsufficientData(usize),
    #[error("series mixes positive and negative values; it cannot be fitted as a single power law")]
    MixedSign,
    #[error("series contains a zero or non-finite value at n = {0}")]
    Domain(u64),
    #[error("{0}")]
    Validation(String),
}

/// Errors from grouping and tabulating entrainment records.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum AnalysisError {
    #[error("no records for model `{model}` under condition `{condition}`")]
    EmptyGroup { model: String, condition: ContextCondition },
    #[error("missing condition `{0}`")]
    MissingCondition(ContextCondition),
    #[error("incomplete grid, missing cells: {}", .0.join(", "))]
    IncompleteGrid(Vec<String>),
    #[error("need at least {needed} model sizes, got {got}")]
    TooFewSizes { needed: usize, got: usize },
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("{0}")]
    Invalid(String),
}

/// Errors from writing a report directory.
#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to report: no fits")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serializing {what}: {message}")]
    Serialize { what: String, message: String },
}
