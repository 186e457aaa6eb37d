use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("index out of range: {0}")]
    Index(String),

    #[error("slot is not registered on this tape")]
    UnknownSlot,

    #[error("bundle parse error: {0}")]
    Parse(String),

    #[error("validation failed [{rule}]: {detail}")]
    Validation { rule: &'static str, detail: String },

    #[error("no valid attacker for victim {victim}: {reason}")]
    NoAttacker { victim: usize, reason: String },

    #[error("invalid budget: {0}")]
    Budget(String),

    #[error("invalid attack goal: {0}")]
    Goal(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("seed {seed}, victim {victim}: {source}")]
    Victim {
        seed: u64,
        victim: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn validation(rule: &'static str, detail: impl Into<String>) -> Self {
        Error::Validation {
            rule,
            detail: detail.into(),
        }
    }
}
