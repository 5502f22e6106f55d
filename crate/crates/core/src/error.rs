use std::fmt;

use thiserror::Error;

/// A single scenario/configuration problem, located by a JSON-style field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl FieldError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Prefix the path with an enclosing field, e.g. `width_s` -> `m_events[2].width_s`.
    pub fn nested(mut self, parent: &str) -> Self {
        self.path = if self.path.is_empty() {
            parent.to_string()
        } else if self.path.starts_with('[') {
            format!("{parent}{}", self.path)
        } else {
            format!("{parent}.{}", self.path)
        };
        self
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(FieldError),

    #[error("scenario schema violation: {}", join(.0))]
    Schema(Vec<FieldError>),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("no correlation peak above background ({0})")]
    NoPeak(String),

    #[error("acquisition failure: {0}")]
    Acquisition(String),

    #[error("no usable epochs in series")]
    EmptySeries,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("series has gaps: {gaps} of {total} epochs missing")]
    Gaps { gaps: usize, total: usize },

    #[error("unknown figure id {0:?} (expected fig2, fig3, fig4 or fig5)")]
    UnknownFigure(String),

    #[error("unknown builtin scenario {0:?}")]
    UnknownBuiltin(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config(FieldError::new(path, message))
    }

    /// Process exit code for the command line tool: 1 configuration, 2 acquisition, 3 gaps.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoPeak(_) | Error::Acquisition(_) | Error::EmptySeries => 2,
            Error::Gaps { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_paths() {
        let e = FieldError::new("width_s", "must be > 0").nested("[2]").nested("m_events");
        assert_eq!(e.path, "m_events[2].width_s");
        assert_eq!(e.to_string(), "m_events[2].width_s: must be > 0");
    }

    #[test]
    fn exit_codes_are_distinct() {
        assert_eq!(Error::config("x", "bad").exit_code(), 1);
        assert_eq!(Error::Acquisition("none".into()).exit_code(), 2);
        assert_eq!(Error::Gaps { gaps: 9, total: 10 }.exit_code(), 3);
    }
}
