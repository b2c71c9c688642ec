//! Error type shared across the crate.
//!
//! Variants are grouped by how they should terminate a CLI run: configuration
//! and dimension problems are usage errors (exit code 2), while I/O, parse and
//! numerical failures are runtime errors (exit code 1).

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    /// Invalid configuration values (non-positive dt, unknown names, bad
    /// hyperparameters, …).
    #[error("configuration error: {0}")]
    Config(String),

    /// Shapes of vectors/matrices do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Malformed textual input (CSV, JSON); carries a location when known.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// Underlying file-system failure.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A computation produced non-finite values or failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// An integration left the finite range; the prefix computed so far is
    /// kept so callers can inspect how far the trajectory got.
    #[error("trajectory diverged at step {step}")]
    RolloutDivergence {
        step: usize,
        partial: Vec<nalgebra::DVector<f64>>,
    },
}

impl Error {
    /// Process exit code for the CLI: 2 for usage/configuration problems,
    /// 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Dimension(_) => 2,
            _ => 1,
        }
    }

    /// Convenience constructor for parse errors with a line number.
    pub fn parse_at_line(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            location: format!("line {line}"),
            message: message.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_split_usage_from_runtime() {
        assert_eq!(Error::Config("x".into()).exit_code(), 2);
        assert_eq!(Error::Dimension("x".into()).exit_code(), 2);
        assert_eq!(Error::Numerical("x".into()).exit_code(), 1);
        assert_eq!(
            Error::parse_at_line(3, "bad field").exit_code(),
            1,
        );
    }

    #[test]
    fn parse_error_reports_line() {
        let e = Error::parse_at_line(17, "expected number");
        assert_eq!(e.to_string(), "parse error at line 17: expected number");
    }
}
