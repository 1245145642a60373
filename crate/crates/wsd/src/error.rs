use thiserror::Error;

#[derive(Debug, Error)]
pub enum WsdError {
    #[error("shape mismatch for tensor `{tensor}`: expected {expected}, got {actual}")]
    Shape { tensor: String, expected: String, actual: String },

    #[error("unknown lemma `{0}`: no softmax head")]
    UnknownLemma(String),

    #[error("vocabulary id {id} out of range (|V| = {vocab_size})")]
    VocabIdOutOfRange { id: usize, vocab_size: usize },

    #[error("{path}:{line}: {msg}")]
    ParseLine { path: String, line: usize, msg: String },

    #[error("malformed XML in {path} near byte {offset}: {msg}")]
    Xml { path: String, offset: u64, msg: String },

    #[error("checkpoint version mismatch: expected {expected}, found {found}")]
    CheckpointVersion { expected: u32, found: u32 },

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, WsdError>;
