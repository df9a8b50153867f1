//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Index outside `1..=T`.
    #[error("index error: {0}")]
    Index(String),

    /// Parameter set rejected at construction time.
    #[error("validation error: {0}")]
    Validation(String),

    /// Empty or undefined prediction window.
    #[error("window error: {0}")]
    Window(String),

    /// Inconsistent run configuration (grids, coverage, section wiring).
    #[error("configuration error: {0}")]
    Config(String),

    /// Non-finite value where a finite one is required.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// A stopping rule exceeded its explicit step cap.
    #[error("nontermination: {0}")]
    NonTermination(String),

    /// Request outside the scope the theory supports.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Degenerate input to a diagnostic.
    #[error("diagnostics error: {0}")]
    Diagnostics(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
