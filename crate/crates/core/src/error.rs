use std::path::PathBuf;

/// Errors surfaced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A scenario or map document violates its schema.
    #[error("configuration error: {0}")]
    Config(String),

    /// Structurally valid input with inconsistent values.
    #[error("validation error: {0}")]
    Validation(String),

    /// An argument falls outside the operation's domain (e.g. pose out of bounds).
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke an API contract (e.g. unnormalized particle weights).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The goal is unreachable from the start on the given costmap.
    #[error("no path from start to goal")]
    NoPath,

    /// The start cell is lethal, unknown, or outside the costmap.
    #[error("invalid start: cell is lethal, unknown, or out of bounds")]
    InvalidStart,

    /// The goal cell is lethal, unknown, or outside the costmap.
    #[error("invalid goal: cell is lethal, unknown, or out of bounds")]
    InvalidGoal,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
