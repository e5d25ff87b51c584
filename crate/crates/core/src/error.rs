use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Ingest { line: usize, message: String },

    #[error("corpus contains no usable utterances")]
    EmptyCorpus,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("utterance {utterance}: {message}")]
    Mismatch { utterance: usize, message: String },

    #[error("empty training stream")]
    EmptyStream,

    #[error("unknown token `{0}`")]
    UnknownToken(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
