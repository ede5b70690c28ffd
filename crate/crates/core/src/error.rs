use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied something that violates an operation's precondition.
    #[error("input error: {0}")]
    Input(String),

    /// The estimator has no finite value on this sample (e.g. no cross-group ties).
    #[error("estimator undefined: {0}")]
    Undefined(String),

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{path}, row {row}: {message}")]
    Schema { path: PathBuf, row: usize, message: String },

    /// Every offending row of a tabular input, so they can be fixed in one pass.
    #[error("{path}: {} invalid row(s):\n{}", problems.len(), render_rows(problems))]
    Rows {
        path: PathBuf,
        problems: Vec<(usize, String)>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn undefined(msg: impl Into<String>) -> Self {
        Error::Undefined(msg.into())
    }

    /// True for errors caused by bad user input rather than by the data being degenerate.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Input(_)
                | Error::Config { .. }
                | Error::Schema { .. }
                | Error::Rows { .. }
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

fn render_rows(problems: &[(usize, String)]) -> String {
    problems
        .iter()
        .map(|(row, msg)| format!("  row {row}: {msg}"))
        .collect::<Vec<_>>()
        .join("\n")
}
