//! End-to-end acceptance checks for the tuning stack: convergence speed,
//! throughput milestones, merge equivalence, distributed and multi-agent
//! behaviour, contextual payoff, facade overhead, and API invariants.
//!
//! Every check prints one `acceptance <name>: PASS|FAIL` line; run with
//! `cargo test -p mabtune-sim --test acceptance -- --nocapture` to see them
//! all. The checks share a lock so timing-sensitive measurements never run
//! while another check saturates the CPU.

use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use mabtune::contextual::CoMomentState;
use mabtune::dynamic::welch_similar;
use mabtune::stats::RunningStat;
use mabtune::{PolicyKind, PolicySpec, Tuner, TunerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mabtune_sim::cluster::{run_cluster_trial, run_distributed, ClusterConfig};
use mabtune_sim::demo::conv::{
    adaptive_convolve, convolve_blocked, convolve_direct, convolve_fft, make_workload,
    ConvSelector, WorkloadKind,
};
use mabtune_sim::demo::join::{adaptive_join, generate_table, nested_loop_join};
use mabtune_sim::overhead::{measure_context_free, measure_contextual, measure_merge};
use mabtune_sim::scenarios::{final_throughput, run_dynamic, DynamicConfig, ScenarioKind, Strategy};
use mabtune_sim::trials::{run_single_trial, run_trials};
use mabtune_sim::SyntheticConfig;

static GATE: Mutex<()> = Mutex::new(());

fn gate() -> MutexGuard<'static, ()> {
    // A failed check must not wedge the remaining ones.
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(name: &str, failures: Vec<String>) {
    if failures.is_empty() {
        println!("acceptance {name}: PASS");
    } else {
        println!("acceptance {name}: FAIL [{}]", failures.join("; "));
    }
    assert!(failures.is_empty(), "acceptance {name} failed: {failures:?}");
}

fn check(failures: &mut Vec<String>, ok: bool, detail: String) {
    if !ok {
        failures.push(detail);
    }
}

/// Default workload (5 variants, ratio 5.7, noise 0.25, 200 trials): the
/// tuner should pick the fastest variant in half the trials by round 300 and
/// nine tenths by round 2000 (±0.05), inside a two-minute budget.
#[test]
fn convergence_on_default_workload() {
    let _g = gate();
    let started = Instant::now();
    let cfg = SyntheticConfig::default();
    let res = run_trials(&cfg, PolicyKind::Thompson).unwrap();
    let elapsed = started.elapsed();
    let p300 = res.records[299].p_fastest;
    let p2000 = res.records[1999].p_fastest;
    let mut failures = Vec::new();
    check(&mut failures, p300 >= 0.45, format!("p_fastest(300) = {p300} < 0.45"));
    check(&mut failures, p2000 >= 0.85, format!("p_fastest(2000) = {p2000} < 0.85"));
    check(
        &mut failures,
        elapsed.as_secs_f64() <= 120.0,
        format!("took {elapsed:?}, budget 120 s"),
    );
    report("convergence-on-default-workload", failures);
}

/// Cumulative-throughput milestones across workload shapes: an easy spread
/// converges almost immediately, a three-orders-of-magnitude spread pays a
/// real but bounded exploration bill, two variants are near-instant, and 25
/// variants take visibly longer but still get there.
#[test]
fn cumulative_throughput_milestones() {
    let _g = gate();
    let base = SyntheticConfig::default();
    let mut failures = Vec::new();

    let easy = SyntheticConfig { m: 2.0, rounds: 2_000, ..base };
    let res = run_trials(&easy, PolicyKind::Thompson).unwrap();
    let cross = res.records.iter().find(|r| r.cum_throughput >= 0.9).map(|r| r.round);
    check(
        &mut failures,
        matches!(cross, Some(r) if (50..=300).contains(&r)),
        format!("m=2: cum throughput crossed 0.9 at {cross:?}, want within [50, 300]"),
    );

    let brutal = SyntheticConfig { m: 1024.0, rounds: 10_000, ..base };
    let res = run_trials(&brutal, PolicyKind::Thompson).unwrap();
    let t = res.records.last().unwrap().cum_throughput;
    check(
        &mut failures,
        (0.5..=0.7).contains(&t),
        format!("m=1024: cum throughput at 10000 = {t}, want within [0.5, 0.7]"),
    );

    let two = SyntheticConfig { n: 2, rounds: 1_000, ..base };
    let res = run_trials(&two, PolicyKind::Thompson).unwrap();
    let cross = res.records.iter().find(|r| r.cum_throughput >= 0.6).map(|r| r.round);
    check(
        &mut failures,
        matches!(cross, Some(r) if r <= 40),
        format!("n=2: cum throughput crossed 0.6 at {cross:?}, want by round 40"),
    );

    let many = SyntheticConfig { n: 25, rounds: 1_000, ..base };
    let res = run_trials(&many, PolicyKind::Thompson).unwrap();
    let cross = res.records.iter().find(|r| r.cum_throughput >= 0.6).map(|r| r.round);
    check(
        &mut failures,
        matches!(cross, Some(r) if r > 60),
        format!("n=25: cum throughput crossed 0.6 at {cross:?}, want after round 60"),
    );
    check(
        &mut failures,
        cross.is_some(),
        format!("n=25: cum throughput never reached 0.6 within 1000 rounds"),
    );

    report("cumulative-throughput-milestones", failures);
}

/// One-pass merges must agree with a from-scratch two-pass computation over
/// the concatenated stream, to 1e-9 relative, across 1000 random splits for
/// both the scalar and the co-moment state.
#[test]
fn merges_match_two_pass_oracles() {
    let _g = gate();
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);

    let mut worst_scalar = 0.0f64;
    for _ in 0..1_000 {
        let len = rng.random_range(2..200);
        let split = rng.random_range(1..len);
        let values: Vec<f64> = (0..len).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut a = RunningStat::new();
        let mut b = RunningStat::new();
        for &v in &values[..split] {
            a.update(v).unwrap();
        }
        for &v in &values[split..] {
            b.update(v).unwrap();
        }
        let merged = mabtune::stats::merged(&a, &b);
        let mean = values.iter().sum::<f64>() / len as f64;
        let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        worst_scalar = worst_scalar.max(rel(merged.mean, mean)).max(rel(merged.m2, m2));
    }
    check(
        &mut failures,
        worst_scalar <= 1e-9,
        format!("scalar merge worst relative error {worst_scalar:e} > 1e-9"),
    );

    let dim = 3;
    let mut worst_ctx = 0.0f64;
    for _ in 0..1_000 {
        let len = rng.random_range(2..120);
        let split = rng.random_range(1..len);
        let xs: Vec<Vec<f64>> = (0..len)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let rs: Vec<f64> = (0..len).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut a = CoMomentState::new(dim);
        let mut b = CoMomentState::new(dim);
        for i in 0..split {
            a.update(&xs[i], rs[i]).unwrap();
        }
        for i in split..len {
            b.update(&xs[i], rs[i]).unwrap();
        }
        let merged = mabtune::contextual::merged(&a, &b).unwrap();
        // Two-pass oracle over the whole stream.
        let nf = len as f64;
        let mut mu_x = vec![0.0; dim];
        for x in &xs {
            for (m, v) in mu_x.iter_mut().zip(x) {
                *m += v / nf;
            }
        }
        let mu_r = rs.iter().sum::<f64>() / nf;
        for i in 0..dim {
            worst_ctx = worst_ctx.max(rel(merged.mu_x[i], mu_x[i]));
            let mut c_xr = 0.0;
            for (x, r) in xs.iter().zip(&rs) {
                c_xr += (x[i] - mu_x[i]) * (r - mu_r);
            }
            worst_ctx = worst_ctx.max(rel(merged.c_xr[i], c_xr));
            for j in 0..dim {
                let mut c_xx = 0.0;
                for x in &xs {
                    c_xx += (x[i] - mu_x[i]) * (x[j] - mu_x[j]);
                }
                worst_ctx = worst_ctx.max(rel(merged.c_xx.at(i, j), c_xx));
            }
        }
        let m2_r = rs.iter().map(|r| (r - mu_r).powi(2)).sum::<f64>();
        worst_ctx = worst_ctx.max(rel(merged.mu_r, mu_r)).max(rel(merged.m2_r, m2_r));
    }
    check(
        &mut failures,
        worst_ctx <= 1e-9,
        format!("co-moment merge worst relative error {worst_ctx:e} > 1e-9"),
    );

    report("merges-match-two-pass-oracles", failures);
}

/// Distributed tuning: with per-round zero-latency sharing the cluster's
/// choice sequence is identical to a centralized tuner on the same seed;
/// with 10-round latency the converged quality stays within 3 points; and
/// sharing must beat isolation early (round 500, 8 workers).
#[test]
fn distributed_tracks_centralized() {
    let _g = gate();
    let mut failures = Vec::new();

    let one = SyntheticConfig { trials: 1, ..SyntheticConfig::default() };
    let lockstep = ClusterConfig { workers: 8, comm_every: 1, latency: 0, ..Default::default() };
    for seed in [11u64, 12, 13] {
        let central = run_single_trial(&one, PolicyKind::Thompson, seed).unwrap();
        let (dist, _) = run_cluster_trial(&one, &lockstep, PolicyKind::Thompson, seed).unwrap();
        check(
            &mut failures,
            central.choices == dist.choices,
            format!("lockstep choice sequence diverged from centralized (seed {seed})"),
        );
    }

    let synth = SyntheticConfig::default();
    let central = run_trials(&synth, PolicyKind::Thompson).unwrap();
    let lagged = ClusterConfig { workers: 8, comm_every: 10, latency: 10, ..Default::default() };
    let dist = run_distributed(&synth, &lagged, PolicyKind::Thompson).unwrap();
    let pc = central.records.last().unwrap().p_fastest;
    let pd = dist.run.records.last().unwrap().p_fastest;
    check(
        &mut failures,
        (pc - pd).abs() <= 0.03,
        format!("latency-10 final p_fastest {pd} vs centralized {pc}, want within 0.03"),
    );

    let early = SyntheticConfig { rounds: 500, ..synth };
    let on = ClusterConfig { workers: 8, comm_every: 10, latency: 0, ..Default::default() };
    let off = ClusterConfig { sharing: false, ..on };
    let p_on = run_distributed(&early, &on, PolicyKind::Thompson)
        .unwrap()
        .run
        .records
        .last()
        .unwrap()
        .p_fastest;
    let p_off = run_distributed(&early, &off, PolicyKind::Thompson)
        .unwrap()
        .run
        .records
        .last()
        .unwrap()
        .p_fastest;
    check(
        &mut failures,
        p_on > p_off,
        format!("sharing-on p_fastest(500) {p_on} not above sharing-off {p_off}"),
    );

    report("distributed-tracks-centralized", failures);
}

/// Multi-agent regime scenarios: the epoch ledger with filtered sharing must
/// stay within 5% of the best control on every varying scenario, and within
/// 15% of all-observations-shared when the world is stationary (where that
/// control is the rightful winner, up to a 2% tie band).
#[test]
fn dynamic_strategy_comparisons() {
    let _g = gate();
    let cfg = DynamicConfig::default();
    let mut failures = Vec::new();
    let controls = [
        Strategy::AllShared,
        Strategy::LocalAll,
        Strategy::RecentShared,
        Strategy::RecentLocal,
    ];
    for kind in [ScenarioKind::VaryThreads, ScenarioKind::VaryTime, ScenarioKind::VaryBoth] {
        let results = run_dynamic(&cfg, kind).unwrap();
        let dynamic = final_throughput(&results, Strategy::Dynamic);
        for control in controls {
            let value = final_throughput(&results, control);
            check(
                &mut failures,
                dynamic >= 0.95 * value,
                format!(
                    "{}: dynamic {dynamic:.4} below 95% of {} {value:.4}",
                    kind.name(),
                    control.name()
                ),
            );
        }
    }
    let results = run_dynamic(&cfg, ScenarioKind::Stationary).unwrap();
    let dynamic = final_throughput(&results, Strategy::Dynamic);
    let shared = final_throughput(&results, Strategy::AllShared);
    check(
        &mut failures,
        shared >= 0.98 * dynamic,
        format!("stationary: all-shared {shared:.4} not ahead of dynamic {dynamic:.4}"),
    );
    check(
        &mut failures,
        dynamic >= 0.85 * shared,
        format!("stationary: dynamic {dynamic:.4} below 85% of all-shared {shared:.4}"),
    );
    report("dynamic-strategy-comparisons", failures);
}

/// On a mixed-size convolution stream, context-aware selection must beat the
/// best single choice a context-free tuner converges to, and junk features
/// must not cost more than 20% of context-free throughput.
#[test]
fn contextual_pays_off_on_mixed_workload() {
    let _g = gate();
    let cases = make_workload(WorkloadKind::MixedKernels, 400, 41);
    let warmup = 120;
    let contextual = adaptive_convolve(&cases, ConvSelector::Contextual, 17).unwrap();
    let context_free = adaptive_convolve(&cases, ConvSelector::ContextFree, 17).unwrap();
    let random = adaptive_convolve(&cases, ConvSelector::ContextualRandomFeatures, 17).unwrap();
    let t_ctx = contextual.total_secs_after(warmup);
    let t_cf = context_free.total_secs_after(warmup);
    let t_rand = random.total_secs_after(warmup);
    let mut failures = Vec::new();
    check(
        &mut failures,
        t_ctx < t_cf,
        format!("contextual {t_ctx:.4}s not faster than context-free {t_cf:.4}s"),
    );
    // Throughput ratio = inverse time ratio over the same case window.
    check(
        &mut failures,
        t_cf / t_rand >= 0.8,
        format!("random-feature throughput {:.3} of context-free, want >= 0.8", t_cf / t_rand),
    );
    report("contextual-pays-off-on-mixed-workload", failures);
}

/// The facade must stay out of the way: a context-free round within 0.1 ms,
/// a contextual round with 8 features within 0.3 ms, and a 5-arm, 10-feature
/// state merge within 10 µs.
#[test]
fn facade_overhead_is_negligible() {
    let _g = gate();
    let mut failures = Vec::new();
    let cf = measure_context_free(5, 20_000).unwrap();
    check(
        &mut failures,
        cf.mean_secs <= 1e-4,
        format!("context-free round mean {:.2} µs > 100 µs", cf.mean_secs * 1e6),
    );
    let cx = measure_contextual(5, 8, 10_000).unwrap();
    check(
        &mut failures,
        cx.mean_secs <= 3e-4,
        format!("contextual round mean {:.2} µs > 300 µs", cx.mean_secs * 1e6),
    );
    let mg = measure_merge(5, 10, 2_000).unwrap();
    check(
        &mut failures,
        mg.mean_secs <= 1e-5,
        format!("merge mean {:.2} µs > 10 µs", mg.mean_secs * 1e6),
    );
    println!(
        "  overhead detail: context-free mean {:.2} µs p99 {:.2} µs; contextual mean {:.2} µs p99 {:.2} µs; merge mean {:.2} µs p99 {:.2} µs",
        cf.mean_secs * 1e6,
        cf.p99_secs * 1e6,
        cx.mean_secs * 1e6,
        cx.p99_secs * 1e6,
        mg.mean_secs * 1e6,
        mg.p99_secs * 1e6
    );
    report("facade-overhead-is-negligible", failures);
}

/// API and operator invariants: concurrent token conservation, forced
/// exploration, join multiset equality against a nested-loop oracle,
/// convolution agreement to 1e-6, and Welch similarity hit/miss rates.
#[test]
fn api_and_demo_invariants_hold() {
    let _g = gate();
    let mut failures = Vec::new();

    // Token conservation: 4 threads, 10_000 observations, none lost.
    let tuner = Tuner::new(
        TunerConfig::new(
            vec![0usize, 1, 2, 3, 4],
            PolicySpec::ContextFree(PolicyKind::Thompson),
        )
        .with_seed(3),
    )
    .unwrap();
    std::thread::scope(|scope| {
        for t in 0..4 {
            let tuner = &tuner;
            scope.spawn(move || {
                for i in 0..2_500u64 {
                    let (_, token) = tuner.choose().unwrap();
                    tuner.observe(&token, -((t as f64) + (i % 7) as f64)).unwrap();
                }
            });
        }
    });
    let total = tuner.handle().local_snapshot().total_n();
    check(
        &mut failures,
        total == 10_000,
        format!("token conservation: recorded {total} of 10000 observations"),
    );

    // Forced exploration: after 2·arms rounds every arm has two looks.
    let fresh = Tuner::new(
        TunerConfig::new(
            vec![0usize, 1, 2, 3, 4],
            PolicySpec::ContextFree(PolicyKind::Thompson),
        )
        .with_seed(9),
    )
    .unwrap();
    for i in 0..10 {
        let (_, token) = fresh.choose().unwrap();
        fresh.observe(&token, -(i as f64)).unwrap();
    }
    let state = fresh.handle().local_snapshot();
    let min_n = (0..5).map(|a| state.arm_n(a)).min().unwrap();
    check(
        &mut failures,
        min_n >= 2,
        format!("forced exploration: an arm has only {min_n} observations after 10 rounds"),
    );

    // Adaptive join over 512 partitions equals the nested-loop oracle as a
    // multiset.
    let left = generate_table(2_000, 500, 101);
    let right = generate_table(6_000, 500, 102);
    let (mut rows, picks) = adaptive_join(&left, &right, 512, 7).unwrap();
    let mut oracle = nested_loop_join(&left, &right);
    rows.sort_unstable();
    oracle.sort_unstable();
    check(&mut failures, rows == oracle, "join multiset differs from oracle".into());
    check(
        &mut failures,
        picks.len() == 512,
        format!("join executed {} partitions, want 512", picks.len()),
    );

    // Convolution variants agree to 1e-6 relative.
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst = 0.0f64;
    for &(n, kk) in &[(1_000usize, 33usize), (509, 128), (64, 64), (2_048, 511)] {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k: Vec<f64> = (0..kk).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d = convolve_direct(&x, &k);
        for other in [convolve_fft(&x, &k), convolve_blocked(&x, &k)] {
            for (a, b) in d.iter().zip(&other) {
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
            }
        }
    }
    check(
        &mut failures,
        worst <= 1e-6,
        format!("convolution variants disagree: worst relative error {worst:e}"),
    );

    // Welch similarity: same-distribution pairs pass at roughly 1−alpha;
    // well-separated pairs never pass.
    let mut same = 0usize;
    let mut apart = 0usize;
    let trials = 400;
    for _ in 0..trials {
        let draw = |mean: f64, rng: &mut ChaCha8Rng| {
            let mut s = RunningStat::new();
            for _ in 0..1_000 {
                s.update(mean + rng.random_range(-0.5..0.5)).unwrap();
            }
            s
        };
        let a = draw(0.0, &mut rng);
        let b = draw(0.0, &mut rng);
        if welch_similar(&a, &b, 0.05, 5) {
            same += 1;
        }
        let c = draw(1.0, &mut rng);
        if welch_similar(&a, &c, 0.05, 5) {
            apart += 1;
        }
    }
    let same_rate = same as f64 / trials as f64;
    check(
        &mut failures,
        same_rate >= 0.90,
        format!("same-distribution similarity rate {same_rate} < 0.90 (alpha 0.05)"),
    );
    check(
        &mut failures,
        apart == 0,
        format!("separated distributions passed similarity {apart} times"),
    );

    report("api-and-demo-invariants-hold", failures);
}
