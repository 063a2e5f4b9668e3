use std::path::PathBuf;

use thiserror::Error;

use crate::topology::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value or file is invalid.
    #[error("{0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("topology failed validation:\n{}", format_violations(.0))]
    Topology(Vec<Violation>),

    /// A CA invariant broke while stepping. This is a bug, not a data condition.
    #[error("invariant violated at step {step}: {detail}\n{dump}")]
    Invariant {
        step: u64,
        detail: String,
        dump: String,
    },

    #[error("usage: {0}")]
    Usage(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("  {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}
