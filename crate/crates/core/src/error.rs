use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("slot budget exceeded: needed more than {max_slots} slots")]
    SlotBudgetExceeded { max_slots: u64 },

    #[error("no schedule satisfies the synchronization constraints")]
    InfeasibleSchedule,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("power spectral density is identically zero")]
    DegeneratePsd,

    #[error("reference sequence is empty, error rates are undefined")]
    EmptyTruth,

    #[error("invalid injection: {0}")]
    Injection(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl SimError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e.to_string())
    }
}

impl From<csv::Error> for SimError {
    fn from(e: csv::Error) -> Self {
        SimError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
