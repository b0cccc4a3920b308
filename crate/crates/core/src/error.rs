//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    #[error("parse error at row {row}, column `{column}`: cannot read `{value}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("record ordering error: {0}")]
    Ordering(String),

    #[error("not enough records: {available} available, {requested} requested")]
    Length { available: usize, requested: usize },

    #[error("insufficient history for lags at t={t}; earliest usable t is {earliest}")]
    Lag { t: usize, earliest: usize },

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("zero-norm vector in similarity computation")]
    ZeroNorm,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("report error: {0}")]
    Report(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// Coarse error classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::MissingColumn(_)
            | Error::Parse { .. }
            | Error::EmptyDataset(_)
            | Error::Ordering(_)
            | Error::Length { .. }
            | Error::Lag { .. }
            | Error::Shape { .. }
            | Error::Report(_)
            | Error::Csv { .. } => ErrorClass::Data,
            Error::Numeric(_) | Error::DegenerateSeries(_) | Error::ZeroNorm => {
                ErrorClass::Numeric
            }
            Error::Io { .. } => ErrorClass::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::Shape {
            context: context.into(),
            expected,
            found,
        }
    }
}
