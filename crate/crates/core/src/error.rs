use thiserror::Error;

/// Errors produced by the library.
///
/// Record-level schema problems during corpus parsing are *not* fatal and are
/// collected per line by the parser; everything here aborts the operation
/// that raised it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A single input line violated the record schema.
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },

    /// An argument or config value is outside its documented range.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Per-token data whose length must match the token count does not.
    #[error("{what}: expected length {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("no verdict for term {term:?}")]
    MissingVerdict { term: String },

    /// A curriculum stage asked for more samples than remain at its levels.
    #[error(
        "stage {stage} (levels {levels:?}): requested {requested} samples, only {available} available"
    )]
    Shortfall {
        stage: usize,
        levels: Vec<u8>,
        requested: usize,
        available: usize,
    },

    #[error("duplicate utterance id {id:?}")]
    DuplicateId { id: String },

    /// WER is undefined for an empty reference.
    #[error("empty reference for utterance {id:?}")]
    EmptyReference { id: String },

    /// UMWER is undefined when every reference token is a mask.
    #[error("reference for utterance {id:?} consists only of mask tokens")]
    AllMaskReference { id: String },

    #[error("distribution shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The finite-difference probe hit a NaN or infinite loss value.
    #[error("non-finite loss at finite-difference probe point")]
    NonFiniteLoss,
}

pub type Result<T> = std::result::Result<T, Error>;
