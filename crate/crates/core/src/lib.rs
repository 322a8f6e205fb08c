//! Online selection among interchangeable implementations of an operation.
//!
//! The central abstraction is a [`Tuner`]: it owns one bandit arm per
//! candidate implementation, hands out a [`Token`] on every `choose`, and
//! folds the observed reward (conventionally negative runtime, so that
//! maximizing reward minimizes latency) back into the chosen arm's state on
//! `observe`. Arm state is a pair of running moments that merge
//! associatively, which is what makes the distributed and epoch-based layers
//! possible: workers exchange compact state summaries instead of raw
//! observations.
//!
//! Layers on top of the single-process tuner:
//!
//! * [`distributed`] — per-worker local/remote state pairs plus a central
//!   [`distributed::ModelStore`] that workers push to and pull
//!   aggregate-of-others from on a fixed interval.
//! * [`dynamic`] — epoch-segmented state with statistical similarity tests
//!   deciding whether history (or another agent's state) still describes the
//!   current regime.

pub mod contextual;
pub mod distributed;
pub mod dynamic;
pub mod error;
pub mod linalg;
pub mod policy;
pub mod stats;
pub mod state;
pub mod tuner;
pub mod wire;

pub use contextual::{CoMomentState, LinearModel};
pub use error::{Error, Result};
pub use policy::{PolicyKind, PosteriorSample};
pub use stats::RunningStat;
pub use state::TunerState;
pub use tuner::{DeferredCompletion, PolicySpec, Token, Tuner, TunerConfig, TunerHandle, TunerId};
