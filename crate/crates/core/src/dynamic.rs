//! Epoch-based adaptation for time-varying workloads.
//!
//! Observations are segmented into epochs. At each boundary the epoch's
//! state is compared against the aggregate of past epochs with a statistical
//! similarity test: similar history is merged (keep learning from it),
//! dissimilar history is replaced (the regime changed, forget it). The same
//! test filters which other agents' states are worth borrowing. Memory stays
//! at exactly two states per agent — one aggregate of the similar past, one
//! for the running epoch — no matter how long the process lives.

use std::time::Duration;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::contextual::CoMomentState;
use crate::error::{Error, Result};
use crate::stats::RunningStat;
use crate::state::TunerState;

/// When an epoch ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpochConfig {
    /// After a fixed number of tuning rounds (counted at choose).
    Rounds(u64),
    /// After a fixed amount of wall-clock time.
    WallClock(Duration),
    /// Only when the caller signals a boundary (e.g. one data partition per
    /// epoch).
    PartitionBoundary,
}

impl EpochConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            EpochConfig::Rounds(n) if *n == 0 => Err(Error::InvalidParameter(
                "epoch length must be at least one round".into(),
            )),
            EpochConfig::WallClock(d) if d.is_zero() => Err(Error::InvalidParameter(
                "epoch duration must be positive".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Which similarity test gates merging, and its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimilarityKind {
    /// Welch's unequal-variances t-test on reward means; similar when the
    /// two-sided p-value is at least `alpha`.
    Welch { alpha: f64, n_min: u64 },
    /// Model-parameter ball test for contextual states: similar when the
    /// fitted coefficient vectors are within the sum of confidence radii
    /// cb(n) = beta·sqrt((1 + ln(1+n)) / (1+n)).
    ModelBall { beta: f64, n_min: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTestConfig {
    pub kind: SimilarityKind,
    /// Test each arm independently (default). When false, one verdict — all
    /// arms must pass — is applied to every arm.
    pub per_arm: bool,
}

impl Default for SimilarityTestConfig {
    fn default() -> Self {
        Self {
            kind: SimilarityKind::Welch {
                alpha: 0.05,
                n_min: 5,
            },
            per_arm: true,
        }
    }
}

impl SimilarityTestConfig {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SimilarityKind::Welch { alpha, n_min } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "alpha must be in (0,1), got {alpha}"
                    )));
                }
                if n_min < 2 {
                    return Err(Error::InvalidParameter(
                        "welch n_min must be at least 2".into(),
                    ));
                }
            }
            SimilarityKind::ModelBall { beta, n_min } => {
                if !(beta > 0.0) || !beta.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "beta must be finite and > 0, got {beta}"
                    )));
                }
                if n_min < 2 {
                    return Err(Error::InvalidParameter(
                        "model-ball n_min must be at least 2".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Welch's t-test for equal means, reported as a similarity verdict.
///
/// Either side with fewer than `n_min` observations fails outright — slim
/// evidence must not certify similarity. Two zero-variance sides are similar
/// exactly when their means coincide.
pub fn welch_similar(a: &RunningStat, b: &RunningStat, alpha: f64, n_min: u64) -> bool {
    if a.n < n_min || b.n < n_min {
        return false;
    }
    // n_min is validated >= 2, so variances exist.
    let (va, vb) = (a.variance().unwrap(), b.variance().unwrap());
    let (na, nb) = (a.n as f64, b.n as f64);
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        return a.mean == b.mean;
    }
    let t = (a.mean - b.mean).abs() / se2.sqrt();
    // Welch–Satterthwaite degrees of freedom.
    let df = se2 * se2
        / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    let dist = match StudentsT::new(0.0, 1.0, df) {
        Ok(d) => d,
        Err(_) => return false,
    };
    let p = 2.0 * (1.0 - dist.cdf(t));
    p >= alpha
}

/// Confidence-ball radius used by the model-parameter test.
pub fn confidence_radius(beta: f64, n: u64) -> f64 {
    let n = n as f64;
    beta * ((1.0 + (1.0 + n).ln()) / (1.0 + n)).sqrt()
}

/// Model-parameter ball test: fits both arms' linear models (at the default
/// regularization) and declares similarity when the coefficient vectors lie
/// within the sum of the two confidence radii. A fit that cannot be computed
/// (too little data, singular system) counts as dissimilar.
pub fn model_ball_similar(
    a: &CoMomentState,
    b: &CoMomentState,
    beta: f64,
    n_min: u64,
) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if a.n < n_min || b.n < n_min {
        return Ok(false);
    }
    let (wa, wb) = match (a.fit_model(1.0), b.fit_model(1.0)) {
        (Ok(ma), Ok(mb)) => (ma.w, mb.w),
        _ => return Ok(false),
    };
    let dist = wa
        .iter()
        .zip(&wb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    Ok(dist <= confidence_radius(beta, a.n) + confidence_radius(beta, b.n))
}

fn arm_similar(a: &TunerState, b: &TunerState, arm: usize, cfg: &SimilarityTestConfig) -> Result<bool> {
    match cfg.kind {
        SimilarityKind::Welch { alpha, n_min } => {
            // For contextual states the test runs on the reward marginals.
            let (sa, sb) = match (a, b) {
                (TunerState::ContextFree(x), TunerState::ContextFree(y)) => (x[arm], y[arm]),
                (TunerState::Contextual(x), TunerState::Contextual(y)) => (
                    RunningStat::from_parts(x[arm].n, x[arm].mu_r, x[arm].m2_r),
                    RunningStat::from_parts(y[arm].n, y[arm].mu_r, y[arm].m2_r),
                ),
                _ => return Err(Error::StateKindMismatch),
            };
            Ok(welch_similar(&sa, &sb, alpha, n_min))
        }
        SimilarityKind::ModelBall { beta, n_min } => match (a, b) {
            (TunerState::Contextual(x), TunerState::Contextual(y)) => {
                model_ball_similar(&x[arm], &y[arm], beta, n_min)
            }
            _ => Err(Error::InvalidParameter(
                "model-ball similarity requires contextual states".into(),
            )),
        },
    }
}

/// Per-arm similarity verdicts between two states of the same shape. With
/// `per_arm` off, a single all-arms verdict is broadcast to every arm.
pub fn similarity_mask(
    a: &TunerState,
    b: &TunerState,
    cfg: &SimilarityTestConfig,
) -> Result<Vec<bool>> {
    if a.arm_count() != b.arm_count() {
        return Err(Error::DimensionMismatch {
            expected: a.arm_count(),
            got: b.arm_count(),
        });
    }
    let mut mask = Vec::with_capacity(a.arm_count());
    for arm in 0..a.arm_count() {
        mask.push(arm_similar(a, b, arm, cfg)?);
    }
    if !cfg.per_arm {
        let all = mask.iter().all(|&v| v);
        mask.iter_mut().for_each(|v| *v = all);
    }
    Ok(mask)
}

/// Two-state memory for one agent: the aggregate of past similar epochs and
/// the running epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentLedger {
    pub agent: u32,
    pub old: TunerState,
    pub current: TunerState,
    pub epoch: u64,
}

impl AgentLedger {
    pub fn new(agent: u32, shape: &TunerState) -> Self {
        Self {
            agent,
            old: shape.empty_like(),
            current: shape.empty_like(),
            epoch: 0,
        }
    }

    /// Ends the running epoch: per arm, similar history absorbs the epoch,
    /// dissimilar history is replaced by it. The first rollover always
    /// replaces (an empty aggregate fails the n_min rule by construction).
    pub fn rollover(&mut self, cfg: &SimilarityTestConfig) -> Result<()> {
        let mask = similarity_mask(&self.old, &self.current, cfg)?;
        match (&mut self.old, &self.current) {
            (TunerState::ContextFree(old), TunerState::ContextFree(cur)) => {
                for (i, (o, c)) in old.iter_mut().zip(cur).enumerate() {
                    if mask[i] {
                        o.merge(c);
                    } else {
                        *o = *c;
                    }
                }
            }
            (TunerState::Contextual(old), TunerState::Contextual(cur)) => {
                for (i, (o, c)) in old.iter_mut().zip(cur).enumerate() {
                    if mask[i] {
                        o.merge(c)?;
                    } else {
                        *o = c.clone();
                    }
                }
            }
            _ => return Err(Error::StateKindMismatch),
        }
        self.current = self.current.empty_like();
        self.epoch += 1;
        Ok(())
    }

    /// Decision view for the running epoch: the current state plus, per arm,
    /// the aggregate of old epochs when it still looks like the present.
    pub fn decision_state(&self, cfg: &SimilarityTestConfig) -> Result<TunerState> {
        let mask = similarity_mask(&self.current, &self.old, cfg)?;
        let mut merged = self.current.clone();
        merged.merge_masked(&self.old, Some(&mask))?;
        Ok(merged)
    }
}
