//! Partitioned equi-join with a per-partition choice of join algorithm.
//!
//! Rows are split into partitions by a deterministic key hash, so matching
//! keys always land in the same partition and the union of per-partition
//! joins equals the whole join. Within each partition the operator picks
//! hash join (build on the smaller side) or sort-merge join via a
//! context-free tuner. Rewards use deferred completions: the timer for a
//! partition stops only when the consumer has drained its rows, so slow
//! consumers show up in the measurement.

use std::collections::{HashMap, VecDeque};

use mabtune::{PolicyKind, PolicySpec, Tuner, TunerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// (key, payload)
pub type Row = (u64, u64);
/// (key, left payload, right payload)
pub type Joined = (u64, u64, u64);

/// Generates `rows` rows with keys uniform in `0..key_space`.
pub fn generate_table(rows: usize, key_space: u64, seed: u64) -> Vec<Row> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows).map(|i| (rng.random_range(0..key_space), i as u64)).collect()
}

/// Deterministic 64-bit mix (splitmix64 finalizer); stable across runs and
/// platforms, unlike the standard library's seeded hasher.
fn mix(mut key: u64) -> u64 {
    key = (key ^ (key >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    key = (key ^ (key >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    key ^ (key >> 31)
}

/// Splits rows into `partitions` buckets by hashed key.
pub fn partition_rows(rows: &[Row], partitions: usize) -> Vec<Vec<Row>> {
    let mut out = vec![Vec::new(); partitions];
    for &row in rows {
        out[(mix(row.0) % partitions as u64) as usize].push(row);
    }
    out
}

/// Hash join; builds on the smaller input and probes with the larger.
pub fn hash_join(left: &[Row], right: &[Row]) -> Vec<Joined> {
    let (build, probe, build_is_left) =
        if left.len() <= right.len() { (left, right, true) } else { (right, left, false) };
    let mut table: HashMap<u64, Vec<u64>> = HashMap::with_capacity(build.len());
    for &(key, payload) in build {
        table.entry(key).or_default().push(payload);
    }
    let mut out = Vec::new();
    for &(key, payload) in probe {
        if let Some(matches) = table.get(&key) {
            for &m in matches {
                if build_is_left {
                    out.push((key, m, payload));
                } else {
                    out.push((key, payload, m));
                }
            }
        }
    }
    out
}

/// Sort-merge join with duplicate-group cross products.
pub fn sort_merge_join(left: &[Row], right: &[Row]) -> Vec<Joined> {
    let mut l = left.to_vec();
    let mut r = right.to_vec();
    l.sort_unstable();
    r.sort_unstable();
    let mut out = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    while i < l.len() && j < r.len() {
        let key = l[i].0;
        match key.cmp(&r[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let i_end = l[i..].iter().position(|x| x.0 != key).map_or(l.len(), |p| i + p);
                let j_end = r[j..].iter().position(|x| x.0 != key).map_or(r.len(), |p| j + p);
                for &(_, lp) in &l[i..i_end] {
                    for &(_, rp) in &r[j..j_end] {
                        out.push((key, lp, rp));
                    }
                }
                i = i_end;
                j = j_end;
            }
        }
    }
    out
}

/// Quadratic reference join for correctness checks.
pub fn nested_loop_join(left: &[Row], right: &[Row]) -> Vec<Joined> {
    let mut out = Vec::new();
    for &(lk, lp) in left {
        for &(rk, rp) in right {
            if lk == rk {
                out.push((lk, lp, rp));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinMethod {
    Hash,
    SortMerge,
}

impl JoinMethod {
    pub const ALL: [JoinMethod; 2] = [JoinMethod::Hash, JoinMethod::SortMerge];

    pub fn name(self) -> &'static str {
        match self {
            JoinMethod::Hash => "hash",
            JoinMethod::SortMerge => "sort-merge",
        }
    }

    pub fn run(self, left: &[Row], right: &[Row]) -> Vec<Joined> {
        match self {
            JoinMethod::Hash => hash_join(left, right),
            JoinMethod::SortMerge => sort_merge_join(left, right),
        }
    }
}

/// Streaming adaptive join over hashed partitions.
///
/// Each partition costs one tuner decision and exactly one observation; the
/// observation fires when the consumer exhausts that partition's rows (or
/// the iterator itself), so the reward covers produce *and* consume time.
pub struct AdaptiveJoin {
    parts: VecDeque<(Vec<Row>, Vec<Row>)>,
    tuner: Tuner<JoinMethod>,
    buffer: VecDeque<Joined>,
    pending: Option<mabtune::DeferredCompletion>,
    /// Methods picked so far, one entry per executed partition.
    pub picks: Vec<JoinMethod>,
}

impl AdaptiveJoin {
    pub fn new(left: &[Row], right: &[Row], partitions: usize, seed: u64) -> Result<Self> {
        if partitions == 0 {
            return Err(Error::Config("need at least one partition".into()));
        }
        let lparts = partition_rows(left, partitions);
        let rparts = partition_rows(right, partitions);
        let tuner = Tuner::new(
            TunerConfig::new(
                JoinMethod::ALL.to_vec(),
                PolicySpec::ContextFree(PolicyKind::Thompson),
            )
            .with_seed(seed),
        )?;
        Ok(Self {
            parts: lparts.into_iter().zip(rparts).collect(),
            tuner,
            buffer: VecDeque::new(),
            pending: None,
            picks: Vec::new(),
        })
    }

    /// Tuner state access for tests and reports.
    pub fn handle(&self) -> mabtune::TunerHandle {
        self.tuner.handle()
    }

    /// Fraction of `JoinMethod::Hash` picks over the last `window` executed
    /// partitions.
    pub fn hash_fraction_over_last(&self, window: usize) -> f64 {
        let tail = &self.picks[self.picks.len().saturating_sub(window)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().filter(|m| **m == JoinMethod::Hash).count() as f64 / tail.len() as f64
    }
}

impl Iterator for AdaptiveJoin {
    type Item = Joined;

    fn next(&mut self) -> Option<Joined> {
        loop {
            if let Some(row) = self.buffer.pop_front() {
                return Some(row);
            }
            // The previous partition is fully consumed: stop its clock.
            if let Some(done) = self.pending.take() {
                done.complete().expect("partition tokens complete exactly once");
            }
            let (left, right) = self.parts.pop_front()?;
            let (method, token) =
                self.tuner.choose().expect("join method set is never empty");
            let method = *method;
            self.buffer = method.run(&left, &right).into();
            self.pending =
                Some(self.tuner.defer(token).expect("fresh tokens can always defer"));
            self.picks.push(method);
            // Loop: an empty partition yields no rows but still completes.
        }
    }
}

/// Runs the adaptive join to completion and returns all joined rows.
pub fn adaptive_join(left: &[Row], right: &[Row], partitions: usize, seed: u64) -> Result<(Vec<Joined>, Vec<JoinMethod>)> {
    let mut join = AdaptiveJoin::new(left, right, partitions, seed)?;
    let mut rows = Vec::new();
    for row in &mut join {
        rows.push(row);
    }
    Ok((rows, join.picks))
}
