//! Benchmark harness for the `apts` optimizers: config parsing, reference
//! first-order baselines, deterministic experiment runs with CSV metrics,
//! and report generation for comparing runs.

pub mod baselines;
pub mod config;
pub mod modelspec;
pub mod report;
pub mod runner;

/// Errors surfaced by the harness (config, CSV, or optimizer failures).
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("config error: {0}")]
    Invalid(String),

    #[error("{path}: {message}")]
    Csv { path: String, message: String },

    #[error(transparent)]
    Core(#[from] apts::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub(crate) fn config(line: usize, message: impl Into<String>) -> Self {
        HarnessError::Config {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        HarnessError::Invalid(message.into())
    }

    pub(crate) fn csv(path: impl Into<String>, message: impl Into<String>) -> Self {
        HarnessError::Csv {
            path: path.into(),
            message: message.into(),
        }
    }
}
