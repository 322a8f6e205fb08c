//! Simulation harness and demo operators for the mabtune tuning library.
//!
//! The harness prices synthetic variant runtimes, runs centralized,
//! distributed (discrete-event), and multi-agent epoch scenarios, and
//! reports per-round metrics as CSV plus a JSON summary. The demo modules
//! embed tuners in real operators — convolution with three implementations
//! and a partitioned join — and the overhead module microbenchmarks the
//! facade itself.

pub mod cluster;
pub mod demo;
pub mod error;
pub mod metrics;
pub mod overhead;
pub mod scenarios;
pub mod synthetic;
pub mod trials;

pub use cluster::{ClusterConfig, DistributedResult, PartitionSpec};
pub use error::{Error, Result};
pub use metrics::MetricsRecord;
pub use scenarios::{DynamicConfig, ScenarioKind, Strategy};
pub use synthetic::{build_variants, sample_runtime, SyntheticConfig, VariantSpec};
pub use trials::{run_trials, RunResult};
