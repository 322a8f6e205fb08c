//! Microbenchmarks of the tuner's per-round and merge overhead.
//!
//! These measure the full facade path — choose, token issue, observe — under
//! a synthetic constant-cost reward, plus the cost of merging two populated
//! states. Results report mean and p99 wall-clock seconds.

use std::hint::black_box;
use std::time::Instant;

use mabtune::{PolicyKind, PolicySpec, Tuner, TunerConfig, TunerState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct OverheadReport {
    pub rounds: usize,
    pub mean_secs: f64,
    pub p99_secs: f64,
}

fn summarize(mut samples: Vec<f64>) -> OverheadReport {
    let rounds = samples.len();
    let mean_secs = samples.iter().sum::<f64>() / rounds as f64;
    samples.sort_unstable_by(|a, b| a.partial_cmp(b).expect("durations are finite"));
    let idx = ((rounds as f64 * 0.99).ceil() as usize).min(rounds) - 1;
    OverheadReport { rounds, mean_secs, p99_secs: samples[idx] }
}

/// Times `rounds` choose+observe cycles of a context-free Thompson tuner.
pub fn measure_context_free(arms: usize, rounds: usize) -> Result<OverheadReport> {
    let tuner = Tuner::new(
        TunerConfig::new(
            (0..arms).collect::<Vec<usize>>(),
            PolicySpec::ContextFree(PolicyKind::Thompson),
        )
        .with_seed(7),
    )?;
    let mut samples = Vec::with_capacity(rounds);
    for i in 0..rounds {
        let reward = -((i % 11) as f64) / 10.0;
        let started = Instant::now();
        let (choice, token) = tuner.choose()?;
        black_box(choice);
        tuner.observe(&token, reward)?;
        samples.push(started.elapsed().as_secs_f64());
    }
    Ok(summarize(samples))
}

/// Times `rounds` choose+observe cycles of a contextual tuner with `dim`
/// features, cycling through a fixed pool of context vectors.
pub fn measure_contextual(arms: usize, dim: usize, rounds: usize) -> Result<OverheadReport> {
    let tuner = Tuner::new(
        TunerConfig::new((0..arms).collect::<Vec<usize>>(), PolicySpec::contextual(dim))
            .with_seed(7),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pool: Vec<Vec<f64>> = (0..64)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut samples = Vec::with_capacity(rounds);
    for i in 0..rounds {
        let context = &pool[i % pool.len()];
        let reward = -((i % 11) as f64) / 10.0;
        let started = Instant::now();
        let (choice, token) = tuner.choose_with_context(context)?;
        black_box(choice);
        tuner.observe(&token, reward)?;
        samples.push(started.elapsed().as_secs_f64());
    }
    Ok(summarize(samples))
}

/// Times merging two populated states (contextual, `dim` features) `reps`
/// times.
pub fn measure_merge(arms: usize, dim: usize, reps: usize) -> Result<OverheadReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut build = || -> Result<TunerState> {
        let mut state = TunerState::new_contextual(arms, dim);
        for _ in 0..200 {
            let arm = rng.random_range(0..arms);
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let reward = rng.random_range(-2.0..0.0);
            state.observe(arm, Some(&x), reward)?;
        }
        Ok(state)
    };
    let a = build()?;
    let b = build()?;
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let started = Instant::now();
        let merged = a.merged_with(&b)?;
        samples.push(started.elapsed().as_secs_f64());
        black_box(&merged);
    }
    Ok(summarize(samples))
}
