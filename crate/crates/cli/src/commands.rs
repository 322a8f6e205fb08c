//! Subcommand definitions and implementations.
//!
//! Flags that describe wall-clock behaviour (`--interval-ms`,
//! `--epoch-seconds`, `--latency-ms`) are mapped onto simulated rounds via
//! [`MILLIS_PER_ROUND`]; everything downstream runs in round units.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mabtune::dynamic::{SimilarityKind, SimilarityTestConfig};
use mabtune::PolicyKind;
use mabtune_sim::cluster::{run_distributed, ClusterConfig, PartitionSpec};
use mabtune_sim::demo::conv::{
    adaptive_convolve, adaptive_convolve_with, make_workload, ConvMethod, ConvSelector,
    WorkloadKind,
};
use mabtune_sim::demo::join::{
    adaptive_join, generate_table, hash_join, partition_rows, sort_merge_join, JoinMethod,
};
use mabtune_sim::metrics::{emit_csv, summary_json, write_text};
use mabtune_sim::overhead::{measure_context_free, measure_contextual, measure_merge};
use mabtune_sim::scenarios::{run_dynamic, DynamicConfig, ScenarioKind, Strategy};
use mabtune_sim::trials::run_trials;
use mabtune_sim::{Error, Result, SyntheticConfig};

use crate::output::{csv_from_rows, write_json};

/// Virtual milliseconds represented by one simulated round: a round stands
/// for one ~30 ms query, so `--epoch-seconds 15` is 500 rounds.
const MILLIS_PER_ROUND: f64 = 30.0;

fn rounds_from_millis(ms: f64) -> u64 {
    if ms <= 0.0 {
        0
    } else {
        ((ms / MILLIS_PER_ROUND).round() as u64).max(1)
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthetic single-tuner sweep over a seeded variant grid
    Simulate(SimulateArgs),
    /// Discrete-event worker cluster sharing one model store
    Distributed(DistributedArgs),
    /// Multi-agent regime scenarios comparing five sharing strategies
    Dynamic(DynamicArgs),
    /// Operator demos driven by a live tuner
    #[command(subcommand)]
    Demo(DemoCommand),
    /// Micro-benchmark per-round and merge overhead
    BenchOverhead(BenchArgs),
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => simulate(&args),
        Command::Distributed(args) => distributed(&args),
        Command::Dynamic(args) => dynamic(&args),
        Command::Demo(DemoCommand::Conv(args)) => demo_conv(&args),
        Command::Demo(DemoCommand::Join(args)) => demo_join(&args),
        Command::BenchOverhead(args) => bench_overhead(&args),
    }
}

#[derive(Args, Debug, Clone, Copy)]
struct SynthArgs {
    /// Number of variants
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Slowest-to-fastest mean runtime ratio
    #[arg(long, default_value_t = 5.7)]
    m: f64,
    /// Noise scale (sigma_i = k * mu_i)
    #[arg(long, default_value_t = 0.25)]
    k: f64,
    /// Rounds per trial
    #[arg(long, default_value_t = 20_000)]
    rounds: u64,
    /// Independent trials to average over
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Master seed; every random stream derives from it
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl SynthArgs {
    fn config(&self) -> SyntheticConfig {
        SyntheticConfig {
            n: self.n,
            m: self.m,
            k: self.k,
            rounds: self.rounds,
            trials: self.trials,
            seed: self.seed,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum PolicyChoice {
    Thompson,
    EpsGreedy,
    Ucb1,
}

#[derive(Args, Debug, Clone, Copy)]
struct PolicyArgs {
    /// Decision policy
    #[arg(long, value_enum, default_value_t = PolicyChoice::Thompson)]
    policy: PolicyChoice,
    /// Exploration rate for --policy eps-greedy
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Exploration constant for --policy ucb1
    #[arg(long, default_value_t = 2.0)]
    ucb_c: f64,
}

impl PolicyArgs {
    fn kind(&self) -> Result<PolicyKind> {
        let kind = match self.policy {
            PolicyChoice::Thompson => PolicyKind::Thompson,
            PolicyChoice::EpsGreedy => PolicyKind::EpsilonGreedy { epsilon: self.epsilon },
            PolicyChoice::Ucb1 => PolicyKind::Ucb1 { c: self.ucb_c },
        };
        kind.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(kind)
    }
}

fn policy_json(kind: PolicyKind) -> Value {
    match kind {
        PolicyKind::Thompson => json!({ "kind": "thompson" }),
        PolicyKind::EpsilonGreedy { epsilon } => json!({ "kind": "eps-greedy", "epsilon": epsilon }),
        PolicyKind::Ucb1 { c } => json!({ "kind": "ucb1", "c": c }),
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    synth: SynthArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Directory for simulate.csv and simulate.json
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = args.synth.config();
    let policy = args.policy.kind()?;
    let run = run_trials(&cfg, policy)?;

    let mut config = serde_json::to_value(cfg).expect("config serializes");
    config["policy"] = policy_json(policy);
    let mut summary = summary_json(config, cfg.seed, &run.records);
    summary["command"] = json!("simulate");
    summary["max_oracle_ratio"] = json!(run.max_oracle_ratio);
    summary["final_exploration_cost"] = json!(run.exploration_cost.last().copied());

    let csv_path = args.out_dir.join("simulate.csv");
    write_text(&csv_path, &emit_csv(&run.records))?;
    write_json(&args.out_dir.join("simulate.json"), &summary)?;

    let last = run.records.last().expect("rounds >= 1");
    println!(
        "simulate: final p_fastest {:.4}, cum throughput {:.4} -> {}",
        last.p_fastest,
        last.cum_throughput,
        csv_path.display()
    );
    Ok(())
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Toggle {
    On,
    Off,
}

#[derive(Args, Debug)]
pub struct DistributedArgs {
    #[command(flatten)]
    synth: SynthArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Worker count
    #[arg(long, default_value_t = 8)]
    workers: usize,
    /// Virtual milliseconds between store synchronisations
    #[arg(long, default_value_t = 500.0)]
    interval_ms: f64,
    /// One-way message latency in virtual milliseconds
    #[arg(long, default_value_t = 0.0)]
    latency_ms: f64,
    /// Share observations through the model store
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    sharing: Toggle,
    /// Cut this worker off from the store... (requires --at-round)
    #[arg(long)]
    partition_worker: Option<usize>,
    /// ...from this round onward (requires --partition-worker)
    #[arg(long)]
    at_round: Option<u64>,
    /// Directory for distributed.csv and distributed.json
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn distributed(args: &DistributedArgs) -> Result<()> {
    let synth = args.synth.config();
    let policy = args.policy.kind()?;
    if args.interval_ms <= 0.0 {
        return Err(Error::Config(format!(
            "--interval-ms must be positive, got {}",
            args.interval_ms
        )));
    }
    if args.latency_ms < 0.0 {
        return Err(Error::Config(format!(
            "--latency-ms must be non-negative, got {}",
            args.latency_ms
        )));
    }
    let partition = match (args.partition_worker, args.at_round) {
        (None, None) => None,
        (Some(worker), Some(at_round)) => Some(PartitionSpec { worker, at_round }),
        _ => {
            return Err(Error::Config(
                "--partition-worker and --at-round must be given together".into(),
            ))
        }
    };
    let cluster = ClusterConfig {
        workers: args.workers,
        comm_every: rounds_from_millis(args.interval_ms),
        latency: rounds_from_millis(args.latency_ms),
        sharing: args.sharing == Toggle::On,
        partition,
    };
    let dist = run_distributed(&synth, &cluster, policy)?;
    // Centralized single-tuner baseline on the identical workload and seed.
    let central = run_trials(&synth, policy)?;

    let header = "round,p_fastest,cum_throughput,p_fastest_centralized";
    let rows = dist.run.records.iter().zip(&central.records).map(|(d, c)| {
        format!("{},{},{},{}", d.round, d.p_fastest, d.cum_throughput, c.p_fastest)
    });
    let csv_path = args.out_dir.join("distributed.csv");
    write_text(&csv_path, &csv_from_rows(header, rows))?;

    let config = json!({
        "synthetic": serde_json::to_value(synth).expect("config serializes"),
        "policy": policy_json(policy),
        "cluster": {
            "workers": cluster.workers,
            "interval_ms": args.interval_ms,
            "comm_every_rounds": cluster.comm_every,
            "latency_ms": args.latency_ms,
            "latency_rounds": cluster.latency,
            "sharing": cluster.sharing,
            "partition": cluster.partition.map(|p| json!({
                "worker": p.worker,
                "at_round": p.at_round,
            })),
        },
    });
    let workers: Vec<Value> = dist
        .worker_rounds
        .iter()
        .enumerate()
        .map(|(w, decisions)| {
            let partitioned = cluster.partition.filter(|p| p.worker == w);
            json!({
                "worker": w,
                "decisions": decisions,
                "partitioned": partitioned.is_some(),
                "partitioned_at_round": partitioned.map(|p| p.at_round),
            })
        })
        .collect();
    let p_dist = dist.run.records.last().expect("rounds >= 1").p_fastest;
    let p_central = central.records.last().expect("rounds >= 1").p_fastest;
    let mut summary = summary_json(config, synth.seed, &dist.run.records);
    summary["command"] = json!("distributed");
    summary["workers"] = json!(workers);
    summary["centralized_baseline"] = json!({
        "final_p_fastest_distributed": p_dist,
        "final_p_fastest_centralized": p_central,
        "abs_diff": (p_dist - p_central).abs(),
    });
    write_json(&args.out_dir.join("distributed.json"), &summary)?;

    println!(
        "distributed: final p_fastest {:.4} (centralized {:.4}) -> {}",
        p_dist,
        p_central,
        csv_path.display()
    );
    Ok(())
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum SimilarityChoice {
    Welch,
    ModelBall,
}

#[derive(Args, Debug)]
pub struct DynamicArgs {
    /// Scenario: stationary, vary-threads, vary-time, or vary-both
    #[arg(long)]
    scenario: String,
    /// Tuning agents
    #[arg(long, default_value_t = 8)]
    agents: usize,
    /// Rounds each agent runs
    #[arg(long, default_value_t = 5_000)]
    rounds_per_agent: u64,
    /// Epoch length in virtual seconds
    #[arg(long, default_value_t = 15.0)]
    epoch_seconds: f64,
    /// Time segments; regimes may change at segment boundaries
    #[arg(long, default_value_t = 3)]
    segments: usize,
    /// Number of variants
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Slowest-to-fastest mean runtime ratio
    #[arg(long, default_value_t = 3.0)]
    m: f64,
    /// Noise scale (sigma_i = k * mu_i)
    #[arg(long, default_value_t = 0.25)]
    k: f64,
    /// Virtual milliseconds between store synchronisations per agent
    #[arg(long, default_value_t = 300.0)]
    interval_ms: f64,
    /// Independent trials to average over
    #[arg(long, default_value_t = 32)]
    trials: usize,
    /// Master seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Similarity test gating what the store hands back
    #[arg(long, value_enum, default_value_t = SimilarityChoice::Welch)]
    similarity: SimilarityChoice,
    /// Significance level for --similarity welch
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Confidence-radius scale for --similarity model-ball
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Observations required per side before a test can pass
    #[arg(long, default_value_t = 5)]
    n_min: u64,
    /// Test each arm independently instead of one verdict for all arms
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    per_arm: bool,
    /// Directory for per-strategy CSVs and dynamic.json
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn similarity_json(cfg: SimilarityTestConfig) -> Value {
    match cfg.kind {
        SimilarityKind::Welch { alpha, n_min } => json!({
            "test": "welch", "alpha": alpha, "n_min": n_min, "per_arm": cfg.per_arm,
        }),
        SimilarityKind::ModelBall { beta, n_min } => json!({
            "test": "model-ball", "beta": beta, "n_min": n_min, "per_arm": cfg.per_arm,
        }),
    }
}

fn dynamic(args: &DynamicArgs) -> Result<()> {
    let kind = ScenarioKind::parse(&args.scenario)?;
    if args.epoch_seconds <= 0.0 {
        return Err(Error::Config(format!(
            "--epoch-seconds must be positive, got {}",
            args.epoch_seconds
        )));
    }
    if args.interval_ms <= 0.0 {
        return Err(Error::Config(format!(
            "--interval-ms must be positive, got {}",
            args.interval_ms
        )));
    }
    if args.n_min < 2 {
        return Err(Error::Config(format!("--n-min must be at least 2, got {}", args.n_min)));
    }
    let similarity_kind = match args.similarity {
        SimilarityChoice::Welch => {
            if !(args.alpha > 0.0 && args.alpha < 1.0) {
                return Err(Error::Config(format!(
                    "--alpha must be in (0, 1), got {}",
                    args.alpha
                )));
            }
            SimilarityKind::Welch { alpha: args.alpha, n_min: args.n_min }
        }
        SimilarityChoice::ModelBall => {
            if args.beta <= 0.0 {
                return Err(Error::Config(format!("--beta must be positive, got {}", args.beta)));
            }
            SimilarityKind::ModelBall { beta: args.beta, n_min: args.n_min }
        }
    };
    let cfg = DynamicConfig {
        agents: args.agents,
        rounds_per_agent: args.rounds_per_agent,
        epoch_rounds: rounds_from_millis(args.epoch_seconds * 1000.0),
        segments: args.segments,
        n: args.n,
        m: args.m,
        k: args.k,
        comm_every: rounds_from_millis(args.interval_ms),
        trials: args.trials,
        seed: args.seed,
        similarity: SimilarityTestConfig { kind: similarity_kind, per_arm: args.per_arm },
    };
    let results = run_dynamic(&cfg, kind)?;

    for (strategy, run) in &results {
        let path = args.out_dir.join(format!("dynamic-{}.csv", strategy.name()));
        write_text(&path, &emit_csv(&run.records))?;
    }
    let mut ranking: Vec<(Strategy, f64)> = results
        .iter()
        .map(|(s, r)| (*s, r.records.last().expect("rounds >= 1").cum_throughput))
        .collect();
    ranking.sort_by(|a, b| b.1.total_cmp(&a.1));

    let config = json!({
        "scenario": kind.name(),
        "agents": cfg.agents,
        "rounds_per_agent": cfg.rounds_per_agent,
        "epoch_seconds": args.epoch_seconds,
        "epoch_rounds": cfg.epoch_rounds,
        "segments": cfg.segments,
        "n": cfg.n,
        "m": cfg.m,
        "k": cfg.k,
        "interval_ms": args.interval_ms,
        "comm_every_rounds": cfg.comm_every,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "similarity": similarity_json(cfg.similarity),
    });
    let summary = json!({
        "command": "dynamic",
        "config": config,
        "seed": cfg.seed,
        "ranking": ranking.iter().map(|(s, v)| json!({
            "strategy": s.name(),
            "final_cum_throughput": v,
        })).collect::<Vec<_>>(),
    });
    write_json(&args.out_dir.join("dynamic.json"), &summary)?;

    let line = ranking
        .iter()
        .map(|(s, v)| format!("{} {:.4}", s.name(), v))
        .collect::<Vec<_>>()
        .join(" > ");
    println!("dynamic {}: {}", kind.name(), line);
    Ok(())
}

#[derive(Subcommand, Debug)]
pub enum DemoCommand {
    /// Adaptive convolution over a stream of sized requests
    Conv(ConvArgs),
    /// Adaptive partitioned join picking hash vs sort-merge
    Join(JoinArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ConvMode {
    Contextual,
    ContextFree,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum FeatureChoice {
    /// Signal and kernel size features
    Sizes,
    /// Seeded noise instead of real features (sensitivity check)
    RandomOnly,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum WorkloadChoice {
    /// Small-kernel cases mixed with large FFT-favoured cases
    Mixed,
    /// Near-identical mid-size cases
    Uniform,
}

#[derive(Args, Debug)]
pub struct ConvArgs {
    /// Tuner mode for the adaptive run
    #[arg(long, value_enum, default_value_t = ConvMode::Contextual)]
    mode: ConvMode,
    /// Features fed to the contextual tuner
    #[arg(long, value_enum, default_value_t = FeatureChoice::Sizes)]
    features: FeatureChoice,
    /// Number of convolution requests
    #[arg(long, default_value_t = 400)]
    signals: usize,
    /// Workload shape
    #[arg(long, value_enum, default_value_t = WorkloadChoice::Mixed)]
    workload: WorkloadChoice,
    /// Ridge strength for the contextual model
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Master seed (workload and tuner)
    #[arg(long, default_value_t = 41)]
    seed: u64,
    /// Directory for demo-conv.csv and demo-conv.json
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn demo_conv(args: &ConvArgs) -> Result<()> {
    if args.signals == 0 {
        return Err(Error::Config("--signals must be at least 1".into()));
    }
    if !(args.lambda > 0.0) {
        return Err(Error::Config(format!("--lambda must be positive, got {}", args.lambda)));
    }
    let selector = match (args.mode, args.features) {
        (ConvMode::Contextual, FeatureChoice::Sizes) => ConvSelector::Contextual,
        (ConvMode::Contextual, FeatureChoice::RandomOnly) => {
            ConvSelector::ContextualRandomFeatures
        }
        (ConvMode::ContextFree, FeatureChoice::Sizes) => ConvSelector::ContextFree,
        (ConvMode::ContextFree, FeatureChoice::RandomOnly) => {
            return Err(Error::Config(
                "--features random-only requires --mode contextual".into(),
            ))
        }
    };
    let workload = match args.workload {
        WorkloadChoice::Mixed => WorkloadKind::MixedKernels,
        WorkloadChoice::Uniform => WorkloadKind::Uniform,
    };
    let cases = make_workload(workload, args.signals, args.seed);
    let adaptive = adaptive_convolve_with(&cases, selector, args.seed, args.lambda)?;
    let fixed: Vec<_> = ConvMethod::ALL
        .iter()
        .map(|&m| adaptive_convolve(&cases, ConvSelector::Fixed(m), args.seed))
        .collect::<Result<_>>()?;

    let mut header = String::from("case,adaptive_secs");
    for m in ConvMethod::ALL {
        header.push_str(&format!(",{}_secs", m.name()));
    }
    header.push_str(",oracle_secs");
    let mut cum_adaptive = 0.0;
    let mut cum_fixed = [0.0f64; 3];
    let mut cum_oracle = 0.0;
    let mut rows = Vec::with_capacity(cases.len());
    for i in 0..cases.len() {
        cum_adaptive += adaptive.case_secs[i];
        let mut best = f64::INFINITY;
        for (j, rep) in fixed.iter().enumerate() {
            cum_fixed[j] += rep.case_secs[i];
            best = best.min(rep.case_secs[i]);
        }
        cum_oracle += best;
        rows.push(format!(
            "{i},{cum_adaptive},{},{},{},{cum_oracle}",
            cum_fixed[0], cum_fixed[1], cum_fixed[2]
        ));
    }
    let csv_path = args.out_dir.join("demo-conv.csv");
    write_text(&csv_path, &csv_from_rows(&header, rows.into_iter()))?;

    let mode_name = match args.mode {
        ConvMode::Contextual => "contextual",
        ConvMode::ContextFree => "context-free",
    };
    let feature_name = match args.features {
        FeatureChoice::Sizes => "sizes",
        FeatureChoice::RandomOnly => "random-only",
    };
    let workload_name = match args.workload {
        WorkloadChoice::Mixed => "mixed",
        WorkloadChoice::Uniform => "uniform",
    };
    let mut totals = serde_json::Map::new();
    totals.insert("adaptive_secs".into(), json!(cum_adaptive));
    for (m, total) in ConvMethod::ALL.iter().zip(cum_fixed) {
        totals.insert(format!("{}_secs", m.name()), json!(total));
    }
    totals.insert("oracle_secs".into(), json!(cum_oracle));
    let counts: serde_json::Map<String, Value> = ConvMethod::ALL
        .iter()
        .zip(adaptive.counts)
        .map(|(m, c)| (m.name().to_string(), json!(c)))
        .collect();
    let summary = json!({
        "command": "demo-conv",
        "config": {
            "mode": mode_name,
            "features": feature_name,
            "workload": workload_name,
            "signals": args.signals,
            "lambda": args.lambda,
            "seed": args.seed,
        },
        "seed": args.seed,
        "totals": totals,
        "adaptive_counts": counts,
    });
    write_json(&args.out_dir.join("demo-conv.json"), &summary)?;

    println!(
        "demo conv ({mode_name}, {feature_name}): adaptive {:.4}s, oracle {:.4}s -> {}",
        cum_adaptive,
        cum_oracle,
        csv_path.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct JoinArgs {
    /// Partitions to join independently
    #[arg(long, default_value_t = 512)]
    partitions: usize,
    /// Rows in the left table
    #[arg(long, default_value_t = 20_000)]
    left_rows: usize,
    /// Rows in the right table
    #[arg(long, default_value_t = 60_000)]
    right_rows: usize,
    /// Distinct join keys
    #[arg(long, default_value_t = 5_000)]
    key_space: u64,
    /// Master seed (tables and tuner)
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Directory for demo-join.csv and demo-join.json
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn demo_join(args: &JoinArgs) -> Result<()> {
    if args.partitions == 0 {
        return Err(Error::Config("--partitions must be at least 1".into()));
    }
    if args.key_space == 0 {
        return Err(Error::Config("--key-space must be at least 1".into()));
    }
    let left = generate_table(args.left_rows, args.key_space, args.seed);
    let right = generate_table(args.right_rows, args.key_space, args.seed.wrapping_add(1));

    let started = Instant::now();
    let (rows, picks) = adaptive_join(&left, &right, args.partitions, args.seed)?;
    let adaptive_secs = started.elapsed().as_secs_f64();
    let hash_picks = picks.iter().filter(|&&m| m == JoinMethod::Hash).count();

    let left_parts = partition_rows(&left, args.partitions);
    let right_parts = partition_rows(&right, args.partitions);
    let mut cum_hash = 0.0;
    let mut cum_merge = 0.0;
    let mut cum_oracle = 0.0;
    let mut fixed_rows = 0usize;
    let mut csv_rows = Vec::with_capacity(args.partitions);
    for (i, (l, r)) in left_parts.iter().zip(&right_parts).enumerate() {
        let t = Instant::now();
        let joined = hash_join(l, r);
        let hash_secs = t.elapsed().as_secs_f64();
        fixed_rows += joined.len();
        let t = Instant::now();
        let _ = sort_merge_join(l, r);
        let merge_secs = t.elapsed().as_secs_f64();
        cum_hash += hash_secs;
        cum_merge += merge_secs;
        cum_oracle += hash_secs.min(merge_secs);
        csv_rows.push(format!("{i},{cum_hash},{cum_merge},{cum_oracle}"));
    }
    let csv_path = args.out_dir.join("demo-join.csv");
    write_text(
        &csv_path,
        &csv_from_rows("partition,hash_secs,sort_merge_secs,oracle_secs", csv_rows.into_iter()),
    )?;

    let summary = json!({
        "command": "demo-join",
        "config": {
            "partitions": args.partitions,
            "left_rows": args.left_rows,
            "right_rows": args.right_rows,
            "key_space": args.key_space,
            "seed": args.seed,
        },
        "seed": args.seed,
        "adaptive": {
            "total_secs": adaptive_secs,
            "rows": rows.len(),
            "hash_fraction": hash_picks as f64 / picks.len().max(1) as f64,
            "picks": {
                "hash": hash_picks,
                "sort-merge": picks.len() - hash_picks,
            },
        },
        "fixed": {
            "hash_secs": cum_hash,
            "sort_merge_secs": cum_merge,
            "oracle_secs": cum_oracle,
            "rows": fixed_rows,
        },
    });
    write_json(&args.out_dir.join("demo-join.json"), &summary)?;

    println!(
        "demo join: {} rows over {} partitions, adaptive {:.4}s (hash fraction {:.2}) -> {}",
        rows.len(),
        args.partitions,
        adaptive_secs,
        hash_picks as f64 / picks.len().max(1) as f64,
        csv_path.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Arms in the benchmark tuners
    #[arg(long, default_value_t = 5)]
    arms: usize,
    /// Choose+observe rounds per benchmark
    #[arg(long, default_value_t = 20_000)]
    rounds: usize,
    /// State merges for the merge benchmark
    #[arg(long, default_value_t = 2_000)]
    merge_reps: usize,
    /// Directory for bench-overhead.csv and bench-overhead.json
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn bench_overhead(args: &BenchArgs) -> Result<()> {
    if args.arms == 0 || args.rounds == 0 || args.merge_reps == 0 {
        return Err(Error::Config("--arms, --rounds, and --merge-reps must be positive".into()));
    }
    let entries = [
        ("context-free", measure_context_free(args.arms, args.rounds)?),
        ("contextual-f2", measure_contextual(args.arms, 2, args.rounds)?),
        ("contextual-f4", measure_contextual(args.arms, 4, args.rounds)?),
        ("contextual-f8", measure_contextual(args.arms, 8, args.rounds)?),
        ("merge-f10", measure_merge(args.arms, 10, args.merge_reps)?),
    ];

    let rows = entries
        .iter()
        .map(|(name, r)| format!("{name},{},{}", r.mean_secs, r.p99_secs));
    let csv_path = args.out_dir.join("bench-overhead.csv");
    write_text(&csv_path, &csv_from_rows("benchmark,mean_secs,p99_secs", rows))?;

    let summary = json!({
        "command": "bench-overhead",
        "config": {
            "arms": args.arms,
            "rounds": args.rounds,
            "merge_reps": args.merge_reps,
        },
        "results": entries.iter().map(|(name, r)| json!({
            "benchmark": name,
            "rounds": r.rounds,
            "mean_secs": r.mean_secs,
            "p99_secs": r.p99_secs,
        })).collect::<Vec<_>>(),
    });
    write_json(&args.out_dir.join("bench-overhead.json"), &summary)?;

    for (name, r) in &entries {
        println!(
            "bench {name}: mean {:.2} us, p99 {:.2} us over {} rounds",
            r.mean_secs * 1e6,
            r.p99_secs * 1e6,
            r.rounds
        );
    }
    println!("bench overhead -> {}", csv_path.display());
    Ok(())
}
