//! The user-facing tuner: construct with a list of interchangeable choices,
//! ask it to `choose`, time the chosen implementation, and hand the reward
//! back through the issued [`Token`].
//!
//! A token records everything the tuner needs to credit the observation:
//! the arm, the context (if any), the issue instant, and the epoch it was
//! issued in. Tokens are single-use — the tuner tracks outstanding token
//! serials and rejects duplicates — and may cross threads, so pipelined
//! operators can defer their reward until a downstream consumer finishes
//! ([`DeferredCompletion`]).
//!
//! Internally the tuner keeps a local state (observations made through this
//! tuner) and a non-local state (aggregates installed by the distributed
//! layer); decisions run on their transient merge. With an epoch
//! configuration the local side becomes an [`AgentLedger`] and decisions
//! additionally consult the similarity-tested aggregate of past epochs.

use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::prelude::*;
use rand::rngs::StdRng;

use crate::dynamic::{AgentLedger, EpochConfig, SimilarityKind, SimilarityTestConfig};
use crate::error::{Error, Result};
use crate::policy::{eps_greedy_choose, ts_choose, ucb1_choose, PolicyKind};
use crate::contextual::ctx_choose;
use crate::state::TunerState;
use crate::wire::Payload;

/// Identifies a logical tuner across workers; two workers tuning the same
/// operation share a `TunerId` so the store can aggregate their states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TunerId(pub u32);

/// Decision rule plus the state shape it needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicySpec {
    ContextFree(PolicyKind),
    Contextual { dim: usize, lambda: f64 },
}

impl PolicySpec {
    /// Contextual policy with the default regularization strength.
    pub fn contextual(dim: usize) -> Self {
        PolicySpec::Contextual { dim, lambda: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            PolicySpec::ContextFree(kind) => kind.validate(),
            PolicySpec::Contextual { dim, lambda } => {
                if dim == 0 {
                    return Err(Error::InvalidParameter(
                        "contextual policy needs at least one feature".into(),
                    ));
                }
                if !(lambda > 0.0) || !lambda.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "lambda must be finite and > 0, got {lambda}"
                    )));
                }
                Ok(())
            }
        }
    }

    fn context_dim(&self) -> Option<usize> {
        match *self {
            PolicySpec::ContextFree(_) => None,
            PolicySpec::Contextual { dim, .. } => Some(dim),
        }
    }
}

/// Construction parameters for a [`Tuner`].
#[derive(Debug, Clone)]
pub struct TunerConfig<C> {
    pub choices: Vec<C>,
    pub policy: PolicySpec,
    pub seed: u64,
    pub id: TunerId,
    pub agent: u32,
    pub epochs: Option<EpochConfig>,
    pub similarity: SimilarityTestConfig,
}

impl<C> TunerConfig<C> {
    pub fn new(choices: Vec<C>, policy: PolicySpec) -> Self {
        Self {
            choices,
            policy,
            seed: 0,
            id: TunerId(0),
            agent: 0,
            epochs: None,
            similarity: SimilarityTestConfig::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_id(mut self, id: TunerId) -> Self {
        self.id = id;
        self
    }

    pub fn with_agent(mut self, agent: u32) -> Self {
        self.agent = agent;
        self
    }

    pub fn with_epochs(mut self, epochs: EpochConfig) -> Self {
        self.epochs = Some(epochs);
        self
    }

    pub fn with_similarity(mut self, similarity: SimilarityTestConfig) -> Self {
        self.similarity = similarity;
        self
    }
}

/// Receipt for one decision; observe it exactly once.
#[derive(Debug, Clone)]
pub struct Token {
    nonce: u64,
    tuner: TunerId,
    serial: u64,
    arm: usize,
    context: Option<Vec<f64>>,
    issued_at: Instant,
    agent: u32,
    epoch: u64,
}

impl Token {
    pub fn tuner(&self) -> TunerId {
        self.tuner
    }

    pub fn arm(&self) -> usize {
        self.arm
    }

    pub fn context(&self) -> Option<&[f64]> {
        self.context.as_deref()
    }

    pub fn issued_at(&self) -> Instant {
        self.issued_at
    }

    pub fn agent(&self) -> u32 {
        self.agent
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }
}

enum Mode {
    /// Flat local state; the common case.
    Plain { local: TunerState },
    /// Epoch-segmented local state.
    Dynamic {
        ledger: AgentLedger,
        epoch_cfg: EpochConfig,
        rounds_in_epoch: u64,
        epoch_started: Instant,
    },
}

struct Inner {
    policy: PolicySpec,
    rng: StdRng,
    mode: Mode,
    /// Aggregate of other workers' states, installed by the distributed
    /// layer; never mutated by observe.
    nonlocal: TunerState,
    similarity: SimilarityTestConfig,
    agent: u32,
    outstanding: HashSet<u64>,
    next_serial: u64,
}

impl Inner {
    /// Ends the running epoch if its configured length has elapsed.
    fn maybe_rollover(&mut self) -> Result<()> {
        let Mode::Dynamic {
            ledger,
            epoch_cfg,
            rounds_in_epoch,
            epoch_started,
        } = &mut self.mode
        else {
            return Ok(());
        };
        let due = match epoch_cfg {
            EpochConfig::Rounds(n) => *rounds_in_epoch >= *n,
            EpochConfig::WallClock(d) => epoch_started.elapsed() >= *d,
            EpochConfig::PartitionBoundary => false,
        };
        if due {
            ledger.rollover(&self.similarity)?;
            *rounds_in_epoch = 0;
            *epoch_started = Instant::now();
        }
        Ok(())
    }

    fn force_rollover(&mut self) -> Result<()> {
        match &mut self.mode {
            Mode::Dynamic {
                ledger,
                rounds_in_epoch,
                epoch_started,
                ..
            } => {
                ledger.rollover(&self.similarity)?;
                *rounds_in_epoch = 0;
                *epoch_started = Instant::now();
                Ok(())
            }
            Mode::Plain { .. } => Err(Error::InvalidParameter(
                "epoch boundaries require an epoch configuration".into(),
            )),
        }
    }

    /// The transient state decisions are made on: local view merged with the
    /// non-local aggregate. Neither constituent is mutated.
    fn decision_state(&self) -> Result<TunerState> {
        let mut view = match &self.mode {
            Mode::Plain { local } => local.clone(),
            Mode::Dynamic { ledger, .. } => ledger.decision_state(&self.similarity)?,
        };
        view.merge(&self.nonlocal)?;
        Ok(view)
    }

    fn current_epoch(&self) -> u64 {
        match &self.mode {
            Mode::Plain { .. } => 0,
            Mode::Dynamic { ledger, .. } => ledger.epoch,
        }
    }

    fn choose_arm(&mut self, context: Option<&[f64]>) -> Result<usize> {
        self.maybe_rollover()?;
        if let Mode::Dynamic {
            rounds_in_epoch, ..
        } = &mut self.mode
        {
            *rounds_in_epoch += 1;
        }
        let decision = self.decision_state()?;
        let policy = self.policy;
        match policy {
            PolicySpec::ContextFree(kind) => {
                if context.is_some() {
                    return Err(Error::UnexpectedContext);
                }
                let arms = decision.as_context_free().expect("shape fixed at build");
                match kind {
                    PolicyKind::Thompson => ts_choose(arms, &mut self.rng),
                    PolicyKind::EpsilonGreedy { epsilon } => {
                        eps_greedy_choose(arms, epsilon, &mut self.rng)
                    }
                    PolicyKind::Ucb1 { c } => ucb1_choose(arms, c, decision.total_n().max(1)),
                }
            }
            PolicySpec::Contextual { dim, lambda } => {
                let Some(x) = context else {
                    return Err(Error::MissingContext);
                };
                if x.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: x.len(),
                    });
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteInput);
                }
                let arms = decision.as_contextual().expect("shape fixed at build");
                ctx_choose(arms, x, lambda, &mut self.rng)
            }
        }
    }

    fn record_observation(&mut self, token: &Token, reward: f64) -> Result<()> {
        match &mut self.mode {
            Mode::Plain { local } => local.observe(token.arm, token.context(), reward),
            Mode::Dynamic { ledger, .. } => {
                if token.epoch == ledger.epoch {
                    ledger.current.observe(token.arm, token.context(), reward)
                } else {
                    // The epoch this token belongs to has been rolled over;
                    // its state no longer exists separately, so the reward
                    // is dropped rather than misattributed.
                    Ok(())
                }
            }
        }
    }
}

/// Shared, non-generic view of a tuner's state machinery. The distributed
/// layer registers handles so it can push local state and install pulled
/// aggregates without knowing the choice type.
#[derive(Clone)]
pub struct TunerHandle {
    inner: Arc<Mutex<Inner>>,
    nonce: u64,
    id: TunerId,
}

impl TunerHandle {
    pub fn id(&self) -> TunerId {
        self.id
    }

    pub fn agent(&self) -> u32 {
        self.inner.lock().unwrap().agent
    }

    /// Snapshot of the locally learned state (the running-epoch state in
    /// epoch mode).
    pub fn local_snapshot(&self) -> TunerState {
        let inner = self.inner.lock().unwrap();
        match &inner.mode {
            Mode::Plain { local } => local.clone(),
            Mode::Dynamic { ledger, .. } => ledger.current.clone(),
        }
    }

    pub fn nonlocal_snapshot(&self) -> TunerState {
        self.inner.lock().unwrap().nonlocal.clone()
    }

    /// What a push message should carry for this tuner.
    pub fn push_payload(&self) -> Payload {
        let inner = self.inner.lock().unwrap();
        match &inner.mode {
            Mode::Plain { local } => Payload::State(local.clone()),
            Mode::Dynamic { ledger, .. } => Payload::AgentPair {
                agent: inner.agent,
                old: ledger.old.clone(),
                current: ledger.current.clone(),
            },
        }
    }

    /// What a pull request should carry for this tuner.
    pub fn pull_payload(&self) -> Payload {
        let inner = self.inner.lock().unwrap();
        match &inner.mode {
            Mode::Plain { .. } => Payload::None,
            Mode::Dynamic { .. } => Payload::AgentRequest { agent: inner.agent },
        }
    }

    /// Installs a pulled aggregate as the non-local state.
    pub fn set_nonlocal(&self, state: TunerState) -> Result<()> {
        let mut inner = self.inner.lock().unwrap();
        if state.arm_count() != inner.nonlocal.arm_count() {
            return Err(Error::DimensionMismatch {
                expected: inner.nonlocal.arm_count(),
                got: state.arm_count(),
            });
        }
        match (&inner.nonlocal, &state) {
            (TunerState::ContextFree(_), TunerState::ContextFree(_))
            | (TunerState::Contextual(_), TunerState::Contextual(_)) => {
                inner.nonlocal = state;
                Ok(())
            }
            _ => Err(Error::StateKindMismatch),
        }
    }

    /// Merged view a decision would run on right now (diagnostics/tests).
    pub fn decision_snapshot(&self) -> Result<TunerState> {
        self.inner.lock().unwrap().decision_state()
    }

    fn observe_token(&self, token: &Token, reward: f64) -> Result<()> {
        if token.nonce != self.nonce {
            return Err(Error::ForeignToken);
        }
        if !reward.is_finite() {
            return Err(Error::NonFiniteReward(reward));
        }
        let mut inner = self.inner.lock().unwrap();
        if !inner.outstanding.remove(&token.serial) {
            return Err(Error::AlreadyObserved);
        }
        inner.record_observation(token, reward)
    }

    fn check_unobserved(&self, token: &Token) -> Result<()> {
        if token.nonce != self.nonce {
            return Err(Error::ForeignToken);
        }
        let inner = self.inner.lock().unwrap();
        if !inner.outstanding.contains(&token.serial) {
            return Err(Error::AlreadyObserved);
        }
        Ok(())
    }
}

static TUNER_NONCE: AtomicU64 = AtomicU64::new(1);

/// Multi-armed tuner over an ordered list of opaque choices.
pub struct Tuner<C> {
    choices: Arc<Vec<C>>,
    handle: TunerHandle,
}

impl<C> Clone for Tuner<C> {
    fn clone(&self) -> Self {
        Self {
            choices: Arc::clone(&self.choices),
            handle: self.handle.clone(),
        }
    }
}

impl<C> Tuner<C> {
    pub fn new(config: TunerConfig<C>) -> Result<Self> {
        if config.choices.is_empty() {
            return Err(Error::EmptyChoices);
        }
        config.policy.validate()?;
        config.similarity.validate()?;
        if let Some(e) = &config.epochs {
            e.validate()?;
            if matches!(config.similarity.kind, SimilarityKind::ModelBall { .. })
                && config.policy.context_dim().is_none()
            {
                return Err(Error::InvalidParameter(
                    "model-ball similarity requires a contextual policy".into(),
                ));
            }
        }
        let arms = config.choices.len();
        let shape = match config.policy.context_dim() {
            None => TunerState::new_context_free(arms),
            Some(dim) => TunerState::new_contextual(arms, dim),
        };
        let mode = match config.epochs {
            None => Mode::Plain {
                local: shape.clone(),
            },
            Some(epoch_cfg) => Mode::Dynamic {
                ledger: AgentLedger::new(config.agent, &shape),
                epoch_cfg,
                rounds_in_epoch: 0,
                epoch_started: Instant::now(),
            },
        };
        let inner = Inner {
            policy: config.policy,
            rng: StdRng::seed_from_u64(config.seed),
            mode,
            nonlocal: shape,
            similarity: config.similarity,
            agent: config.agent,
            outstanding: HashSet::new(),
            next_serial: 0,
        };
        Ok(Self {
            choices: Arc::new(config.choices),
            handle: TunerHandle {
                inner: Arc::new(Mutex::new(inner)),
                nonce: TUNER_NONCE.fetch_add(1, Ordering::Relaxed),
                id: config.id,
            },
        })
    }

    pub fn id(&self) -> TunerId {
        self.handle.id
    }

    pub fn choices(&self) -> &[C] {
        &self.choices
    }

    pub fn handle(&self) -> TunerHandle {
        self.handle.clone()
    }

    fn issue(&self, arm: usize, context: Option<&[f64]>) -> Token {
        let mut inner = self.handle.inner.lock().unwrap();
        let serial = inner.next_serial;
        inner.next_serial += 1;
        inner.outstanding.insert(serial);
        Token {
            nonce: self.handle.nonce,
            tuner: self.handle.id,
            serial,
            arm,
            context: context.map(|x| x.to_vec()),
            issued_at: Instant::now(),
            agent: inner.agent,
            epoch: inner.current_epoch(),
        }
    }

    /// Picks a choice for a context-free policy.
    pub fn choose(&self) -> Result<(&C, Token)> {
        let arm = self.handle.inner.lock().unwrap().choose_arm(None)?;
        let token = self.issue(arm, None);
        Ok((&self.choices[arm], token))
    }

    /// Picks a choice given the round's context vector.
    pub fn choose_with_context(&self, context: &[f64]) -> Result<(&C, Token)> {
        let arm = self.handle.inner.lock().unwrap().choose_arm(Some(context))?;
        let token = self.issue(arm, Some(context));
        Ok((&self.choices[arm], token))
    }

    /// Credits `reward` to the token's arm. Each token observes once; later
    /// attempts report an error and change nothing.
    pub fn observe(&self, token: &Token, reward: f64) -> Result<()> {
        self.handle.observe_token(token, reward)
    }

    /// Observes with reward = −(seconds since the token was issued), the
    /// convention that makes maximizing reward minimize runtime.
    pub fn observe_elapsed(&self, token: &Token) -> Result<()> {
        let reward = -token.issued_at.elapsed().as_secs_f64();
        self.handle.observe_token(token, reward)
    }

    /// Converts a token into a completion handle that any thread may invoke
    /// later; the reward covers issue-to-completion, so pipelined consumers
    /// are included in the measurement.
    pub fn defer(&self, token: Token) -> Result<DeferredCompletion> {
        self.handle.check_unobserved(&token)?;
        Ok(DeferredCompletion {
            handle: self.handle.clone(),
            token,
        })
    }

    /// Explicitly ends the running epoch (partition-boundary epochs).
    pub fn end_epoch(&self) -> Result<()> {
        self.handle.inner.lock().unwrap().force_rollover()
    }
}

/// One-shot completion for a deferred observation. Consuming `complete`
/// observes elapsed time since the token was issued.
pub struct DeferredCompletion {
    handle: TunerHandle,
    token: Token,
}

impl DeferredCompletion {
    pub fn complete(self) -> Result<()> {
        let reward = -self.token.issued_at.elapsed().as_secs_f64();
        self.handle.observe_token(&self.token, reward)
    }
}
