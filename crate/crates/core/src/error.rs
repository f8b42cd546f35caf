use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("index {index} out of range for field `{field}` (vocab size {vocab})")]
    IndexOutOfRange {
        field: String,
        index: usize,
        vocab: usize,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("function is not deterministic: {0}")]
    Determinism(String),

    #[error("config error at `{key}`{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config {
        key: String,
        line: Option<usize>,
        msg: String,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("AUC undefined: {0}")]
    UndefinedAuc(String),

    #[error("numeric divergence at step {step}: loss component `{component}` is {value}")]
    Divergence {
        component: String,
        step: u64,
        value: f64,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            line: None,
            msg: msg.into(),
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Precondition(_) => 2,
            Error::Parse { .. }
            | Error::Data(_)
            | Error::IndexOutOfRange { .. }
            | Error::Validation(_)
            | Error::Csv(_)
            | Error::UndefinedAuc(_) => 3,
            Error::Divergence { .. } => 4,
            _ => 1,
        }
    }
}
