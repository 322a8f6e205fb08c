//! Discrete-event simulation of distributed tuning over the synthetic
//! workload.
//!
//! Rounds are the unit of virtual time. One global round executes one
//! decision on one worker (round-robin). Workers exchange state with a
//! central model store through the binary wire format: a communication wave
//! pushes every worker's local state and then pulls the aggregate of the
//! other workers' states. Messages travel with a configurable one-way
//! latency in rounds; a partitioned worker neither sends nor receives but
//! keeps tuning on its local state.

use std::collections::VecDeque;

use mabtune::distributed::ModelStore;
use mabtune::wire::{self, MessageKind, Payload, StateMessage};
use mabtune::{PolicyKind, TunerId, TunerState};
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::synthetic::{build_variants, RoundPricer, SyntheticConfig};
use crate::trials::{aggregate_outcomes, choose_arm, trial_seeds, RunResult, TrialOutcome};

const TUNER: TunerId = TunerId(0);

/// A worker cut off from the store from `at_round` onward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionSpec {
    pub worker: usize,
    pub at_round: u64,
}

/// Shape of the simulated cluster.
#[derive(Debug, Clone, Copy)]
pub struct ClusterConfig {
    pub workers: usize,
    /// Rounds between communication waves.
    pub comm_every: u64,
    /// One-way message latency in rounds.
    pub latency: u64,
    /// When false, workers never talk to the store.
    pub sharing: bool,
    pub partition: Option<PartitionSpec>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { workers: 8, comm_every: 10, latency: 0, sharing: true, partition: None }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("need at least one worker".into()));
        }
        if self.comm_every == 0 {
            return Err(Error::Config("comm_every must be positive".into()));
        }
        if let Some(p) = self.partition {
            if p.worker >= self.workers {
                return Err(Error::Config(format!(
                    "partitioned worker {} out of range ({} workers)",
                    p.worker, self.workers
                )));
            }
        }
        Ok(())
    }

    fn is_partitioned(&self, worker: usize, round: u64) -> bool {
        matches!(self.partition, Some(p) if p.worker == worker && round >= p.at_round)
    }
}

/// Result of a distributed batch: global per-round records plus per-worker
/// decision counts summed across trials.
#[derive(Debug, Clone)]
pub struct DistributedResult {
    pub run: RunResult,
    pub worker_rounds: Vec<u64>,
}

enum Dest {
    Store,
    Worker(usize),
}

struct Envelope {
    deliver: u64,
    origin: usize,
    dest: Dest,
    bytes: Vec<u8>,
}

struct Cluster<'a> {
    cfg: &'a ClusterConfig,
    store: ModelStore,
    local: Vec<TunerState>,
    nonlocal: Vec<TunerState>,
    queue: VecDeque<Envelope>,
}

impl<'a> Cluster<'a> {
    fn new(cfg: &'a ClusterConfig, arms: usize) -> Self {
        Self {
            cfg,
            store: ModelStore::new(),
            local: vec![TunerState::new_context_free(arms); cfg.workers],
            nonlocal: vec![TunerState::new_context_free(arms); cfg.workers],
            queue: VecDeque::new(),
        }
    }

    /// Delivers every message due at `round`. Replies enqueued during
    /// delivery are themselves delivered when latency is zero, so a wave
    /// completes within the round that sent it.
    fn deliver_due(&mut self, round: u64) -> Result<()> {
        while matches!(self.queue.front(), Some(env) if env.deliver <= round) {
            let env = self.queue.pop_front().expect("front checked above");
            // A partition drops traffic in both directions, including
            // messages already in flight.
            if self.cfg.is_partitioned(env.origin, round) {
                continue;
            }
            match env.dest {
                Dest::Store => {
                    if let Some(reply) = self.store.handle(&env.bytes)? {
                        self.queue.push_back(Envelope {
                            deliver: round + self.cfg.latency,
                            origin: env.origin,
                            dest: Dest::Worker(env.origin),
                            bytes: reply,
                        });
                    }
                }
                Dest::Worker(w) => {
                    if self.cfg.is_partitioned(w, round) {
                        continue;
                    }
                    let msg = wire::decode_message(&env.bytes)?;
                    if msg.kind != MessageKind::PullReply {
                        return Err(Error::Config("worker received a non-reply".into()));
                    }
                    for (tuner, payload) in msg.entries {
                        if tuner == TUNER {
                            if let Payload::State(state) = payload {
                                self.nonlocal[w] = state;
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Queues one wave: every reachable worker pushes, then pulls.
    fn send_wave(&mut self, round: u64) {
        let deliver = round + self.cfg.latency;
        for w in 0..self.cfg.workers {
            if self.cfg.is_partitioned(w, round) {
                continue;
            }
            let push = StateMessage {
                kind: MessageKind::Push,
                worker_id: w as u32,
                entries: vec![(TUNER, Payload::State(self.local[w].clone()))],
            };
            self.queue.push_back(Envelope {
                deliver,
                origin: w,
                dest: Dest::Store,
                bytes: wire::encode_message(&push),
            });
        }
        for w in 0..self.cfg.workers {
            if self.cfg.is_partitioned(w, round) {
                continue;
            }
            let pull = StateMessage {
                kind: MessageKind::PullRequest,
                worker_id: w as u32,
                entries: vec![(TUNER, Payload::None)],
            };
            self.queue.push_back(Envelope {
                deliver,
                origin: w,
                dest: Dest::Store,
                bytes: wire::encode_message(&pull),
            });
        }
    }
}

/// Runs one distributed trial; also returns per-worker decision counts.
pub fn run_cluster_trial(
    synth: &SyntheticConfig,
    cluster: &ClusterConfig,
    policy: PolicyKind,
    seed: u64,
) -> Result<(TrialOutcome, Vec<u64>)> {
    let pricer = RoundPricer::new(build_variants(synth.n, synth.m, synth.k)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sim = Cluster::new(cluster, synth.n);
    let rounds = synth.rounds as usize;
    let mut choices = Vec::with_capacity(rounds);
    let mut cum_throughput = Vec::with_capacity(rounds);
    let mut oracle_cum_throughput = Vec::with_capacity(rounds);
    let mut worker_rounds = vec![0u64; cluster.workers];
    let mut total = 0.0f64;
    let mut oracle_total = 0.0f64;
    for round in 0..synth.rounds {
        sim.deliver_due(round)?;
        if cluster.sharing && round % cluster.comm_every == 0 {
            sim.send_wave(round);
            // Zero latency resolves the whole wave before the decision.
            sim.deliver_due(round)?;
        }
        let w = (round % cluster.workers as u64) as usize;
        let merged = sim.local[w].merged_with(&sim.nonlocal[w])?;
        let arms = merged.as_context_free().expect("cluster states are context-free");
        let arm = choose_arm(policy, arms, merged.total_n(), &mut rng)?;
        let z = pricer.draw_z(&mut rng);
        let runtime = pricer.runtime(arm, z);
        sim.local[w].observe(arm, None, -runtime)?;
        worker_rounds[w] += 1;
        total += runtime;
        oracle_total += pricer.runtime(0, z);
        let done = (round + 1) as f64;
        choices.push(arm as u16);
        cum_throughput.push(done / total);
        oracle_cum_throughput.push(done / oracle_total);
    }
    Ok((TrialOutcome { choices, cum_throughput, oracle_cum_throughput }, worker_rounds))
}

/// Runs `synth.trials` distributed trials in parallel and averages them.
pub fn run_distributed(
    synth: &SyntheticConfig,
    cluster: &ClusterConfig,
    policy: PolicyKind,
) -> Result<DistributedResult> {
    synth.validate()?;
    cluster.validate()?;
    policy.validate()?;
    let seeds = trial_seeds(synth.seed, synth.trials);
    let outcomes: Vec<(TrialOutcome, Vec<u64>)> = seeds
        .par_iter()
        .map(|&seed| run_cluster_trial(synth, cluster, policy, seed))
        .collect::<Result<_>>()?;
    let mut worker_rounds = vec![0u64; cluster.workers];
    for (_, counts) in &outcomes {
        for (acc, c) in worker_rounds.iter_mut().zip(counts) {
            *acc += c;
        }
    }
    let trials: Vec<TrialOutcome> = outcomes.into_iter().map(|(t, _)| t).collect();
    Ok(DistributedResult { run: aggregate_outcomes(synth.rounds, &trials), worker_rounds })
}
