//! Arm-state container shared by the single-process, distributed, and
//! epoch-based layers.
//!
//! A `TunerState` is everything a tuner has learned: one moment summary per
//! arm, either context-free or contextual. It merges arm-wise, which lets
//! remote summaries, epoch history, and live observations combine with the
//! same primitive.

use crate::contextual::CoMomentState;
use crate::error::{Error, Result};
use crate::stats::RunningStat;

/// Per-arm learned state for one tuner.
#[derive(Debug, Clone, PartialEq)]
pub enum TunerState {
    ContextFree(Vec<RunningStat>),
    Contextual(Vec<CoMomentState>),
}

impl TunerState {
    pub fn new_context_free(arms: usize) -> Self {
        TunerState::ContextFree(vec![RunningStat::new(); arms])
    }

    pub fn new_contextual(arms: usize, dim: usize) -> Self {
        TunerState::Contextual(vec![CoMomentState::new(dim); arms])
    }

    /// Same shape (kind, arm count, dimension) with zeroed moments.
    pub fn empty_like(&self) -> Self {
        match self {
            TunerState::ContextFree(arms) => Self::new_context_free(arms.len()),
            TunerState::Contextual(arms) => {
                Self::new_contextual(arms.len(), arms.first().map_or(0, |a| a.dim()))
            }
        }
    }

    pub fn arm_count(&self) -> usize {
        match self {
            TunerState::ContextFree(arms) => arms.len(),
            TunerState::Contextual(arms) => arms.len(),
        }
    }

    /// Observation count for one arm.
    pub fn arm_n(&self, arm: usize) -> u64 {
        match self {
            TunerState::ContextFree(arms) => arms[arm].n,
            TunerState::Contextual(arms) => arms[arm].n,
        }
    }

    /// Total observations across arms.
    pub fn total_n(&self) -> u64 {
        (0..self.arm_count()).map(|i| self.arm_n(i)).sum()
    }

    /// Folds one observation into the given arm. Context-free states reject
    /// a context vector and contextual states require one.
    pub fn observe(&mut self, arm: usize, context: Option<&[f64]>, reward: f64) -> Result<()> {
        if arm >= self.arm_count() {
            return Err(Error::InvalidParameter(format!(
                "arm index {arm} out of range ({} arms)",
                self.arm_count()
            )));
        }
        match (self, context) {
            (TunerState::ContextFree(arms), None) => arms[arm].update(reward),
            (TunerState::ContextFree(_), Some(_)) => Err(Error::UnexpectedContext),
            (TunerState::Contextual(_), None) => Err(Error::MissingContext),
            (TunerState::Contextual(arms), Some(x)) => arms[arm].update(x, reward),
        }
    }

    /// Arm-wise merge of another state of the same shape.
    pub fn merge(&mut self, other: &TunerState) -> Result<()> {
        self.merge_masked(other, None)
    }

    /// Arm-wise merge restricted to arms where `mask` is true (all arms when
    /// `mask` is `None`). The epoch layer merges history per arm, so a mask
    /// avoids cloning states apart.
    pub fn merge_masked(&mut self, other: &TunerState, mask: Option<&[bool]>) -> Result<()> {
        if self.arm_count() != other.arm_count() {
            return Err(Error::DimensionMismatch {
                expected: self.arm_count(),
                got: other.arm_count(),
            });
        }
        if let Some(m) = mask {
            if m.len() != self.arm_count() {
                return Err(Error::DimensionMismatch {
                    expected: self.arm_count(),
                    got: m.len(),
                });
            }
        }
        let included = |i: usize| mask.map_or(true, |m| m[i]);
        match (self, other) {
            (TunerState::ContextFree(a), TunerState::ContextFree(b)) => {
                for (i, (ai, bi)) in a.iter_mut().zip(b).enumerate() {
                    if included(i) {
                        ai.merge(bi);
                    }
                }
                Ok(())
            }
            (TunerState::Contextual(a), TunerState::Contextual(b)) => {
                for (i, (ai, bi)) in a.iter_mut().zip(b).enumerate() {
                    if included(i) {
                        ai.merge(bi)?;
                    }
                }
                Ok(())
            }
            _ => Err(Error::StateKindMismatch),
        }
    }

    /// `merge` as a pure function.
    pub fn merged_with(&self, other: &TunerState) -> Result<TunerState> {
        let mut out = self.clone();
        out.merge(other)?;
        Ok(out)
    }

    pub fn as_context_free(&self) -> Option<&[RunningStat]> {
        match self {
            TunerState::ContextFree(arms) => Some(arms),
            TunerState::Contextual(_) => None,
        }
    }

    pub fn as_contextual(&self) -> Option<&[CoMomentState]> {
        match self {
            TunerState::ContextFree(_) => None,
            TunerState::Contextual(arms) => Some(arms),
        }
    }
}
