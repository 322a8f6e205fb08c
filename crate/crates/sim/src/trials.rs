//! Centralized tuning trials over the synthetic workload.
//!
//! Each trial runs one tuner for a fixed number of rounds, choosing a
//! variant, pricing its runtime, and feeding the negated runtime back as the
//! reward. Trials run in parallel but aggregate in trial order, so results
//! are byte-identical across runs with the same seed.

use mabtune::policy::{eps_greedy_choose, ts_choose, ucb1_choose};
use mabtune::{PolicyKind, RunningStat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::metrics::MetricsRecord;
use crate::synthetic::{build_variants, RoundPricer, SyntheticConfig};

/// Raw per-round outcome of a single trial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    /// Chosen variant per round.
    pub choices: Vec<u16>,
    /// Rounds completed so far divided by runtime spent so far, per round.
    pub cum_throughput: Vec<f64>,
    /// Same ratio for an oracle that picks the fastest-mean variant on the
    /// identical runtime draws.
    pub oracle_cum_throughput: Vec<f64>,
}

/// Aggregated result of a batch of trials.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<MetricsRecord>,
    /// Per-round mean over trials of (actual − oracle) cumulative runtime.
    pub exploration_cost: Vec<f64>,
    /// Largest per-trial, per-round ratio of tuner throughput to oracle
    /// throughput observed in the batch.
    pub max_oracle_ratio: f64,
}

/// Derives one independent RNG seed per trial from the master seed.
pub fn trial_seeds(master: u64, trials: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..trials).map(|_| rng.random()).collect()
}

/// One policy step on context-free arm statistics.
///
/// `rounds_so_far` feeds UCB1's total-count term; Thompson and ε-greedy
/// ignore it.
pub fn choose_arm<R: Rng + ?Sized>(
    policy: PolicyKind,
    arms: &[RunningStat],
    rounds_so_far: u64,
    rng: &mut R,
) -> Result<usize> {
    let arm = match policy {
        PolicyKind::Thompson => ts_choose(arms, rng)?,
        PolicyKind::EpsilonGreedy { epsilon } => eps_greedy_choose(arms, epsilon, rng)?,
        PolicyKind::Ucb1 { c } => ucb1_choose(arms, c, rounds_so_far.max(1))?,
    };
    Ok(arm)
}

/// Runs one trial with its own RNG stream.
pub fn run_single_trial(cfg: &SyntheticConfig, policy: PolicyKind, seed: u64) -> Result<TrialOutcome> {
    let pricer = RoundPricer::new(build_variants(cfg.n, cfg.m, cfg.k)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arms = vec![RunningStat::new(); cfg.n];
    let rounds = cfg.rounds as usize;
    let mut choices = Vec::with_capacity(rounds);
    let mut cum_throughput = Vec::with_capacity(rounds);
    let mut oracle_cum_throughput = Vec::with_capacity(rounds);
    let mut total = 0.0f64;
    let mut oracle_total = 0.0f64;
    for round in 0..cfg.rounds {
        let arm = choose_arm(policy, &arms, round, &mut rng)?;
        let z = pricer.draw_z(&mut rng);
        let runtime = pricer.runtime(arm, z);
        arms[arm].update(-runtime)?;
        total += runtime;
        oracle_total += pricer.runtime(0, z);
        let done = (round + 1) as f64;
        choices.push(arm as u16);
        cum_throughput.push(done / total);
        oracle_cum_throughput.push(done / oracle_total);
    }
    Ok(TrialOutcome { choices, cum_throughput, oracle_cum_throughput })
}

/// Averages per-trial outcomes into per-round records.
///
/// `p_fastest` counts choices of variant 0, which [`build_variants`] always
/// makes the fastest-mean variant.
pub fn aggregate_outcomes(rounds: u64, outcomes: &[TrialOutcome]) -> RunResult {
    let rounds = rounds as usize;
    let trials = outcomes.len().max(1) as f64;
    let mut fastest = vec![0u64; rounds];
    let mut throughput = vec![0.0f64; rounds];
    let mut cost = vec![0.0f64; rounds];
    let mut max_ratio = 0.0f64;
    for out in outcomes {
        for r in 0..rounds {
            if out.choices[r] == 0 {
                fastest[r] += 1;
            }
            throughput[r] += out.cum_throughput[r];
            let done = (r + 1) as f64;
            // Cumulative runtimes recovered from the stored ratios.
            cost[r] += done / out.cum_throughput[r] - done / out.oracle_cum_throughput[r];
            let ratio = out.cum_throughput[r] / out.oracle_cum_throughput[r];
            if ratio > max_ratio {
                max_ratio = ratio;
            }
        }
    }
    let records = (0..rounds)
        .map(|r| MetricsRecord {
            round: (r + 1) as u64,
            p_fastest: fastest[r] as f64 / trials,
            cum_throughput: throughput[r] / trials,
        })
        .collect();
    let exploration_cost = cost.iter().map(|c| c / trials).collect();
    RunResult { records, exploration_cost, max_oracle_ratio: max_ratio }
}

/// Runs `cfg.trials` independent trials in parallel and averages them.
pub fn run_trials(cfg: &SyntheticConfig, policy: PolicyKind) -> Result<RunResult> {
    cfg.validate()?;
    policy.validate()?;
    let seeds = trial_seeds(cfg.seed, cfg.trials);
    let outcomes: Vec<TrialOutcome> = seeds
        .par_iter()
        .map(|&seed| run_single_trial(cfg, policy, seed))
        .collect::<Result<_>>()?;
    Ok(aggregate_outcomes(cfg.rounds, &outcomes))
}
