//! Multi-agent regime scenarios for epoch-based tuning.
//!
//! Eight (configurable) agents tune the same variant set, but each agent in
//! each time segment sees variant runtimes remapped by a rotation of the
//! mean-runtime grid. Rotations guarantee that two different regimes
//! disagree on the mean of every variant, so pooling observations across
//! regimes is genuinely harmful. Scenarios control where rotations apply:
//!
//! * `Stationary` — identity everywhere; pooling is purely helpful.
//! * `VaryThreads` — rotations differ between agent pairs but are fixed in
//!   time (heterogeneous hardware).
//! * `VaryTime` — all agents share a rotation that changes each segment
//!   (global regime shifts).
//! * `VaryBoth` — rotations differ per pair and per segment.
//!
//! Five sharing strategies run on identical draws: the epoch ledger with
//! similarity-filtered sharing, everything shared, everything local, and the
//! recent-epoch-only variants of shared/local.

use mabtune::distributed::ModelStore;
use mabtune::dynamic::{AgentLedger, SimilarityTestConfig};
use mabtune::wire::{self, MessageKind, Payload, StateMessage};
use mabtune::{TunerId, TunerState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::synthetic::{build_variants, RoundPricer};
use crate::trials::{aggregate_outcomes, trial_seeds, RunResult, TrialOutcome};

const TUNER: TunerId = TunerId(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Stationary,
    VaryThreads,
    VaryTime,
    VaryBoth,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::Stationary,
        ScenarioKind::VaryThreads,
        ScenarioKind::VaryTime,
        ScenarioKind::VaryBoth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Stationary => "stationary",
            ScenarioKind::VaryThreads => "vary-threads",
            ScenarioKind::VaryTime => "vary-time",
            ScenarioKind::VaryBoth => "vary-both",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}")))
    }
}

/// How observations move between an agent's epochs and between agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Strategy {
    /// Epoch ledger with similarity-gated history and store-filtered sharing.
    Dynamic,
    /// One pool: everything every agent ever observed, unfiltered.
    AllShared,
    /// Each agent keeps all of its own history, shares nothing.
    LocalAll,
    /// Only current-epoch observations, shared unfiltered.
    RecentShared,
    /// Only the agent's own current epoch.
    RecentLocal,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Dynamic,
        Strategy::AllShared,
        Strategy::LocalAll,
        Strategy::RecentShared,
        Strategy::RecentLocal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Dynamic => "dynamic",
            Strategy::AllShared => "all-observations-shared",
            Strategy::LocalAll => "local-only",
            Strategy::RecentShared => "recent-epoch-shared",
            Strategy::RecentLocal => "recent-epoch-local",
        }
    }

    fn uses_epochs(self) -> bool {
        matches!(self, Strategy::RecentShared | Strategy::RecentLocal)
    }
}

/// Parameters of a dynamic scenario run.
#[derive(Debug, Clone, Copy)]
pub struct DynamicConfig {
    pub agents: usize,
    pub rounds_per_agent: u64,
    /// Agent-local rounds per epoch.
    pub epoch_rounds: u64,
    /// Time segments; regime rotations may change at segment boundaries.
    pub segments: usize,
    pub n: usize,
    pub m: f64,
    pub k: f64,
    /// Agent-local rounds between store synchronisations.
    pub comm_every: u64,
    pub trials: usize,
    pub seed: u64,
    pub similarity: SimilarityTestConfig,
}

impl Default for DynamicConfig {
    fn default() -> Self {
        Self {
            agents: 8,
            rounds_per_agent: 5_000,
            epoch_rounds: 500,
            segments: 3,
            n: 3,
            m: 3.0,
            k: 0.25,
            comm_every: 10,
            trials: 32,
            seed: 1,
            similarity: SimilarityTestConfig::default(),
        }
    }
}

impl DynamicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.agents == 0 {
            return Err(Error::Config("need at least one agent".into()));
        }
        if self.rounds_per_agent == 0 || self.epoch_rounds == 0 || self.comm_every == 0 {
            return Err(Error::Config("round counts must be positive".into()));
        }
        if self.segments == 0 || self.segments as u64 > self.rounds_per_agent {
            return Err(Error::Config("segments must fit in the run".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        self.similarity.validate().map_err(Error::from)?;
        build_variants(self.n, self.m, self.k).map(|_| ())
    }

    fn segment_len(&self) -> u64 {
        self.rounds_per_agent.div_ceil(self.segments as u64)
    }
}

/// Regime table: a rotation offset per (agent, segment).
///
/// Variant `v` runs at the mean-grid entry `(v + shift) % n`, so the fastest
/// variant under shift `s` is `(n − s) % n`. Agents come in pairs sharing a
/// rotation, which gives filtered sharing something legitimate to find.
#[derive(Debug, Clone)]
pub struct RegimeTable {
    shifts: Vec<Vec<usize>>, // [agent][segment]
    n: usize,
}

impl RegimeTable {
    pub fn build(kind: ScenarioKind, cfg: &DynamicConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = cfg.agents.div_ceil(2);
        let segments = cfg.segments;
        let n = cfg.n;
        // Per-pair base rotations: pair 0 keeps the identity so "variant 0
        // fastest" stays meaningful somewhere; others draw nonzero shifts.
        let mut pair_base = vec![0usize];
        for _ in 1..pairs {
            pair_base.push(rng.random_range(1..n));
        }
        let mut shifts = vec![vec![0usize; segments]; cfg.agents];
        for agent in 0..cfg.agents {
            let base = match kind {
                ScenarioKind::Stationary | ScenarioKind::VaryTime => 0,
                ScenarioKind::VaryThreads | ScenarioKind::VaryBoth => pair_base[agent / 2],
            };
            shifts[agent][0] = base;
        }
        for seg in 1..segments {
            // One draw per pair per segment keeps paired agents aligned.
            let mut pair_next = Vec::with_capacity(pairs);
            for pair in 0..pairs {
                let prev = shifts[pair * 2][seg - 1];
                let next = match kind {
                    ScenarioKind::Stationary | ScenarioKind::VaryThreads => prev,
                    ScenarioKind::VaryTime | ScenarioKind::VaryBoth => {
                        // Force a real regime change at every boundary.
                        let step = rng.random_range(1..n);
                        (prev + step) % n
                    }
                };
                pair_next.push(next);
            }
            for agent in 0..cfg.agents {
                let pair = agent / 2;
                shifts[agent][seg] = match kind {
                    ScenarioKind::VaryTime => pair_next[0],
                    _ => pair_next[pair],
                };
            }
        }
        // VaryTime shares one rotation across all agents per segment.
        if kind == ScenarioKind::VaryTime {
            for seg in 0..segments {
                let common = shifts[0][seg];
                for row in shifts.iter_mut() {
                    row[seg] = common;
                }
            }
        }
        Self { shifts, n }
    }

    pub fn shift(&self, agent: usize, segment: usize) -> usize {
        self.shifts[agent][segment]
    }

    /// Mean-grid index variant `v` maps to for this agent and segment.
    pub fn mu_index(&self, agent: usize, segment: usize, v: usize) -> usize {
        (v + self.shifts[agent][segment]) % self.n
    }

    /// The variant with the smallest mean under this regime.
    pub fn fastest_variant(&self, agent: usize, segment: usize) -> usize {
        (self.n - self.shifts[agent][segment]) % self.n
    }
}

struct AgentSim {
    ledger: AgentLedger,
    nonlocal: TunerState,
    rounds: u64,
}

/// Runs one trial of one strategy on a fixed regime table.
///
/// The returned outcome stores 0 in `choices` when the agent picked its
/// regime's fastest variant and 1 otherwise, so aggregation over trials
/// yields `p_fastest` directly.
fn run_strategy_trial(
    cfg: &DynamicConfig,
    regimes: &RegimeTable,
    strategy: Strategy,
    seed: u64,
) -> Result<TrialOutcome> {
    let variants = build_variants(cfg.n, cfg.m, cfg.k)?;
    let pricer = RoundPricer::new(variants);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = TunerState::new_context_free(cfg.n);
    let store = ModelStore::new();
    store.configure_similarity(TUNER, cfg.similarity);
    let mut agents: Vec<AgentSim> = (0..cfg.agents)
        .map(|a| AgentSim {
            ledger: AgentLedger::new(a as u32, &shape),
            nonlocal: shape.empty_like(),
            rounds: 0,
        })
        .collect();
    let seg_len = cfg.segment_len();
    let total_rounds = cfg.rounds_per_agent * cfg.agents as u64;
    let mut choices = Vec::with_capacity(total_rounds as usize);
    let mut cum_throughput = Vec::with_capacity(total_rounds as usize);
    let mut oracle_cum_throughput = Vec::with_capacity(total_rounds as usize);
    let mut total = 0.0f64;
    let mut oracle_total = 0.0f64;

    for round in 0..total_rounds {
        let a = (round % cfg.agents as u64) as usize;

        // Epoch boundary for epoch-based strategies.
        let agent_round = agents[a].rounds;
        if agent_round > 0 && agent_round % cfg.epoch_rounds == 0 {
            match strategy {
                Strategy::Dynamic => agents[a].ledger.rollover(&cfg.similarity)?,
                s if s.uses_epochs() => {
                    // Recent-epoch strategies simply discard the epoch.
                    let fresh = agents[a].ledger.current.empty_like();
                    agents[a].ledger.current = fresh;
                    agents[a].ledger.epoch += 1;
                }
                _ => {}
            }
        }

        // Store synchronisation wave (instant; latency is exercised by the
        // distributed simulation, not here).
        if round % (cfg.comm_every * cfg.agents as u64) == 0 {
            match strategy {
                Strategy::Dynamic => sync_dynamic(&store, &mut agents)?,
                Strategy::AllShared | Strategy::RecentShared => sync_plain(&store, &mut agents)?,
                _ => {}
            }
        }

        let segment = ((agent_round / seg_len) as usize).min(cfg.segments - 1);
        let decision = match strategy {
            Strategy::Dynamic => agents[a]
                .ledger
                .decision_state(&cfg.similarity)?
                .merged_with(&agents[a].nonlocal)?,
            Strategy::AllShared | Strategy::RecentShared => {
                agents[a].ledger.current.merged_with(&agents[a].nonlocal)?
            }
            Strategy::LocalAll | Strategy::RecentLocal => agents[a].ledger.current.clone(),
        };
        let arms = decision.as_context_free().expect("scenario states are context-free");
        let v = mabtune::policy::ts_choose(arms, &mut rng)?;
        let z = pricer.draw_z(&mut rng);
        let runtime = pricer.runtime(regimes.mu_index(a, segment, v), z);
        agents[a].ledger.current.observe(v, None, -runtime)?;
        agents[a].rounds += 1;

        total += runtime;
        let fastest = regimes.fastest_variant(a, segment);
        oracle_total += pricer.runtime(regimes.mu_index(a, segment, fastest), z);
        let done = (round + 1) as f64;
        choices.push(u16::from(v != fastest));
        cum_throughput.push(done / total);
        oracle_cum_throughput.push(done / oracle_total);
    }
    Ok(TrialOutcome { choices, cum_throughput, oracle_cum_throughput })
}

/// Dynamic-strategy wave: push every agent's (old, current) pair, then pull
/// the similarity-filtered aggregate of the other agents.
fn sync_dynamic(store: &ModelStore, agents: &mut [AgentSim]) -> Result<()> {
    for (i, agent) in agents.iter().enumerate() {
        let push = StateMessage {
            kind: MessageKind::Push,
            worker_id: i as u32,
            entries: vec![(
                TUNER,
                Payload::AgentPair {
                    agent: agent.ledger.agent,
                    old: agent.ledger.old.clone(),
                    current: agent.ledger.current.clone(),
                },
            )],
        };
        store.handle(&wire::encode_message(&push))?;
    }
    for (i, agent) in agents.iter_mut().enumerate() {
        let pull = StateMessage {
            kind: MessageKind::PullRequest,
            worker_id: i as u32,
            entries: vec![(TUNER, Payload::AgentRequest { agent: agent.ledger.agent })],
        };
        apply_reply(store, agent, &pull)?;
    }
    Ok(())
}

/// Unfiltered wave: push each agent's working state, pull the aggregate of
/// the others.
fn sync_plain(store: &ModelStore, agents: &mut [AgentSim]) -> Result<()> {
    for (i, agent) in agents.iter().enumerate() {
        let push = StateMessage {
            kind: MessageKind::Push,
            worker_id: i as u32,
            entries: vec![(TUNER, Payload::State(agent.ledger.current.clone()))],
        };
        store.handle(&wire::encode_message(&push))?;
    }
    for (i, agent) in agents.iter_mut().enumerate() {
        let pull = StateMessage {
            kind: MessageKind::PullRequest,
            worker_id: i as u32,
            entries: vec![(TUNER, Payload::None)],
        };
        apply_reply(store, agent, &pull)?;
    }
    Ok(())
}

fn apply_reply(store: &ModelStore, agent: &mut AgentSim, pull: &StateMessage) -> Result<()> {
    if let Some(reply) = store.handle(&wire::encode_message(pull))? {
        let msg = wire::decode_message(&reply)?;
        debug_assert_eq!(msg.kind, MessageKind::PullReply);
        for (tuner, payload) in msg.entries {
            if tuner == TUNER {
                if let Payload::State(state) = payload {
                    agent.nonlocal = state;
                }
            }
        }
    }
    Ok(())
}

/// Averaged per-round records for every strategy on one scenario.
pub fn run_dynamic(
    cfg: &DynamicConfig,
    kind: ScenarioKind,
) -> Result<Vec<(Strategy, RunResult)>> {
    cfg.validate()?;
    let regimes = RegimeTable::build(kind, cfg, cfg.seed ^ 0x5eed_0001);
    let seeds = trial_seeds(cfg.seed, cfg.trials);
    let total_rounds = cfg.rounds_per_agent * cfg.agents as u64;
    let mut out = Vec::with_capacity(Strategy::ALL.len());
    for strategy in Strategy::ALL {
        let outcomes: Vec<TrialOutcome> = seeds
            .par_iter()
            .map(|&seed| run_strategy_trial(cfg, &regimes, strategy, seed))
            .collect::<Result<_>>()?;
        out.push((strategy, aggregate_outcomes(total_rounds, &outcomes)));
    }
    Ok(out)
}

/// Final cumulative throughput of one strategy in a `run_dynamic` result.
pub fn final_throughput(results: &[(Strategy, RunResult)], strategy: Strategy) -> f64 {
    results
        .iter()
        .find(|(s, _)| *s == strategy)
        .map(|(_, r)| r.records.last().expect("runs are non-empty").cum_throughput)
        .expect("strategy present")
}
