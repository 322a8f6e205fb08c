use crate::tuner::TunerId;

/// Errors surfaced by tuners, policies, and state plumbing.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("tuner requires at least one choice")]
    EmptyChoices,

    #[error("reward must be finite, got {0}")]
    NonFiniteReward(f64),

    #[error("input value must be finite")]
    NonFiniteInput,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("policy is contextual but no context vector was provided")]
    MissingContext,

    #[error("policy is context-free but a context vector was provided")]
    UnexpectedContext,

    #[error("need at least {needed} observations, have {got}")]
    InsufficientData { needed: u64, got: u64 },

    #[error("linear system is singular beyond regularization")]
    SingularSystem,

    #[error("covariance factorization failed even after jitter")]
    NotPositiveDefinite,

    #[error("token was issued by a different tuner")]
    ForeignToken,

    #[error("token has already been observed")]
    AlreadyObserved,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state kinds do not match (context-free vs contextual)")]
    StateKindMismatch,

    #[error("tuner {0:?} is not registered on this worker")]
    UnknownTuner(TunerId),

    #[error("malformed state message: {0}")]
    MalformedMessage(String),
}

pub type Result<T> = std::result::Result<T, Error>;
