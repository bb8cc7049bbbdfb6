use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shapes, ranges, empty input).
    #[error("contract violation: {0}")]
    Contract(String),
    /// The experiment configuration is invalid or incomplete.
    #[error("configuration error: {0}")]
    Config(String),
    /// Target training labels were requested without oracle access.
    #[error("oracle access required: {0}")]
    OracleRequired(String),
    /// A loss term produced NaN or infinity during training.
    #[error("non-finite loss in term `{term}` at epoch {epoch}, step {step}: {value}")]
    NonFiniteLoss {
        term: &'static str,
        epoch: usize,
        step: usize,
        value: f64,
    },
    /// Checkpoint bytes do not start with the expected magic.
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated checkpoint")]
    Truncated,
    /// Checkpoint tensors disagree with its layer-spec table.
    #[error("checkpoint shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! contract {
    ($($arg:tt)*) => {
        $crate::Error::Contract(alloc::format!($($arg)*))
    };
}
pub(crate) use contract;
