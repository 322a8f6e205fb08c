//! Multi-worker tuning: per-worker local/non-local state pairs, a central
//! model store, and periodic asynchronous push/pull rounds.
//!
//! Every worker owns its tuners' local states outright; nothing blocks on
//! the network. On each communication round a worker pushes its local states
//! to the store (which replaces — never merges — its copy per worker) and
//! pulls back, per tuner, the merged aggregate of all *other* workers'
//! states, installing it as the tuner's non-local state. Decisions always
//! run on merge(local, non-local), so fresh observations are usable
//! immediately and remote ones arrive within a round. A partitioned worker
//! simply skips rounds and degrades to local-only tuning.
//!
//! All exchanges travel through the byte-level wire format in
//! [`crate::wire`], in real-threads mode and in simulated schedules alike,
//! so there is a single serialization path to trust.
//!
//! Epoch-mode tuners push both ledger states (aggregate-old and current) and
//! pull a similarity-filtered aggregate: the store tests every other agent's
//! two states against the requester's current state and merges only what
//! passes, per arm.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crate::dynamic::{similarity_mask, SimilarityTestConfig};
use crate::error::{Error, Result};
use crate::state::TunerState;
use crate::tuner::{TunerHandle, TunerId};
use crate::wire::{self, MessageKind, Payload, StateMessage};

pub const DEFAULT_COMMUNICATION_INTERVAL: Duration = Duration::from_millis(500);

/// One worker process: a registry of tuner handles plus its communication
/// schedule and partition flag.
pub struct Worker {
    id: u32,
    interval: Duration,
    registry: Mutex<BTreeMap<TunerId, TunerHandle>>,
    partitioned: AtomicBool,
}

impl Worker {
    pub fn new(id: u32) -> Self {
        Self {
            id,
            interval: DEFAULT_COMMUNICATION_INTERVAL,
            registry: Mutex::new(BTreeMap::new()),
            partitioned: AtomicBool::new(false),
        }
    }

    pub fn with_interval(mut self, interval: Duration) -> Self {
        self.interval = interval;
        self
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    /// Attaches a tuner to this worker's communication rounds.
    pub fn register(&self, handle: TunerHandle) {
        self.registry.lock().unwrap().insert(handle.id(), handle);
    }

    /// Simulates losing / restoring connectivity to the store.
    pub fn set_partitioned(&self, partitioned: bool) {
        self.partitioned.store(partitioned, Ordering::SeqCst);
    }

    pub fn is_partitioned(&self) -> bool {
        self.partitioned.load(Ordering::SeqCst)
    }

    /// Push message carrying every registered tuner's local state.
    pub fn build_push(&self) -> StateMessage {
        let registry = self.registry.lock().unwrap();
        StateMessage {
            kind: MessageKind::Push,
            worker_id: self.id,
            entries: registry
                .iter()
                .map(|(id, h)| (*id, h.push_payload()))
                .collect(),
        }
    }

    /// Pull request for every registered tuner.
    pub fn build_pull_request(&self) -> StateMessage {
        let registry = self.registry.lock().unwrap();
        StateMessage {
            kind: MessageKind::PullRequest,
            worker_id: self.id,
            entries: registry
                .iter()
                .map(|(id, h)| (*id, h.pull_payload()))
                .collect(),
        }
    }

    /// Installs the aggregates from a pull reply as non-local states.
    /// Tuners the reply has nothing for are left untouched.
    pub fn apply_pull_reply(&self, msg: &StateMessage) -> Result<()> {
        if msg.kind != MessageKind::PullReply {
            return Err(Error::MalformedMessage(format!(
                "expected pull reply, got {:?}",
                msg.kind
            )));
        }
        let registry = self.registry.lock().unwrap();
        for (tuner, payload) in &msg.entries {
            let Some(handle) = registry.get(tuner) else {
                return Err(Error::UnknownTuner(*tuner));
            };
            match payload {
                Payload::State(state) => handle.set_nonlocal(state.clone())?,
                Payload::None => {}
                other => {
                    return Err(Error::MalformedMessage(format!(
                        "unexpected payload in pull reply: {other:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Sends this worker's push message through the wire to the store.
    pub fn push_to(&self, store: &ModelStore) -> Result<()> {
        if self.is_partitioned() {
            return Ok(());
        }
        store.handle(&wire::encode_message(&self.build_push()))?;
        Ok(())
    }

    /// Requests and installs aggregates from the store.
    pub fn pull_from(&self, store: &ModelStore) -> Result<()> {
        if self.is_partitioned() {
            return Ok(());
        }
        let request = wire::encode_message(&self.build_pull_request());
        if let Some(reply) = store.handle(&request)? {
            self.apply_pull_reply(&wire::decode_message(&reply)?)?;
        }
        Ok(())
    }

    /// One full communication round: push then pull. A no-op (without
    /// error) while partitioned — tuning continues on local state.
    pub fn communicate(&self, store: &ModelStore) -> Result<()> {
        self.push_to(store)?;
        self.pull_from(store)
    }

    /// Starts a background thread that runs a communication round every
    /// `interval`. The returned guard stops the thread when dropped.
    pub fn spawn_communicator(self: &Arc<Self>, store: Arc<ModelStore>) -> CommunicatorGuard {
        let stop = Arc::new(AtomicBool::new(false));
        let worker = Arc::clone(self);
        let flag = Arc::clone(&stop);
        let interval = self.interval;
        let handle = thread::spawn(move || {
            while !flag.load(Ordering::SeqCst) {
                // Communication failures must never take down the worker;
                // a partition just means this round is skipped.
                let _ = worker.communicate(&store);
                thread::sleep(interval);
            }
        });
        CommunicatorGuard {
            stop,
            handle: Some(handle),
        }
    }
}

/// Stops the communicator thread on drop.
pub struct CommunicatorGuard {
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl CommunicatorGuard {
    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for CommunicatorGuard {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Latest pushed ledger states for one agent.
#[derive(Debug, Clone)]
struct AgentStates {
    old: TunerState,
    current: TunerState,
}

#[derive(Default)]
struct StoreInner {
    /// tuner → worker → latest pushed local state.
    plain: HashMap<TunerId, BTreeMap<u32, TunerState>>,
    /// tuner → (worker, agent) → latest pushed ledger pair.
    agents: HashMap<TunerId, BTreeMap<(u32, u32), AgentStates>>,
    /// Store-side similarity test per tuner (epoch mode), registered
    /// out-of-band at setup.
    similarity: HashMap<TunerId, SimilarityTestConfig>,
}

/// Central registry of every worker's latest local states. Replaces on
/// push (idempotent), aggregates-of-others on pull.
#[derive(Default)]
pub struct ModelStore {
    inner: Mutex<StoreInner>,
}

impl ModelStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers the similarity test the store applies when filtering
    /// non-local agent states for this tuner.
    pub fn configure_similarity(&self, tuner: TunerId, cfg: SimilarityTestConfig) {
        self.inner.lock().unwrap().similarity.insert(tuner, cfg);
    }

    /// Processes one encoded message; pull requests produce an encoded
    /// reply.
    pub fn handle(&self, bytes: &[u8]) -> Result<Option<Vec<u8>>> {
        let msg = wire::decode_message(bytes)?;
        match msg.kind {
            MessageKind::Push => {
                self.apply_push(&msg)?;
                Ok(None)
            }
            MessageKind::PullRequest => {
                let reply = self.build_reply(&msg)?;
                Ok(Some(wire::encode_message(&reply)))
            }
            MessageKind::PullReply => Err(Error::MalformedMessage(
                "store does not accept pull replies".into(),
            )),
        }
    }

    fn apply_push(&self, msg: &StateMessage) -> Result<()> {
        let mut inner = self.inner.lock().unwrap();
        for (tuner, payload) in &msg.entries {
            match payload {
                Payload::State(state) => {
                    inner
                        .plain
                        .entry(*tuner)
                        .or_default()
                        .insert(msg.worker_id, state.clone());
                }
                Payload::AgentPair {
                    agent,
                    old,
                    current,
                } => {
                    inner.agents.entry(*tuner).or_default().insert(
                        (msg.worker_id, *agent),
                        AgentStates {
                            old: old.clone(),
                            current: current.clone(),
                        },
                    );
                }
                other => {
                    return Err(Error::MalformedMessage(format!(
                        "unexpected payload in push: {other:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    fn build_reply(&self, msg: &StateMessage) -> Result<StateMessage> {
        let inner = self.inner.lock().unwrap();
        let mut entries = Vec::with_capacity(msg.entries.len());
        for (tuner, payload) in &msg.entries {
            let reply = match payload {
                Payload::None => inner
                    .aggregate_for(*tuner, msg.worker_id)
                    .map_or(Payload::None, Payload::State),
                Payload::AgentRequest { agent } => inner
                    .filtered_aggregate_for(*tuner, msg.worker_id, *agent)
                    .map_or(Payload::None, Payload::State),
                other => {
                    return Err(Error::MalformedMessage(format!(
                        "unexpected payload in pull request: {other:?}"
                    )))
                }
            };
            entries.push((*tuner, reply));
        }
        Ok(StateMessage {
            kind: MessageKind::PullReply,
            worker_id: msg.worker_id,
            entries,
        })
    }

    /// Merged aggregate of all workers' states except the requester's;
    /// `None` for a tuner the store has never seen.
    pub fn aggregate_for(&self, tuner: TunerId, requester: u32) -> Option<TunerState> {
        self.inner.lock().unwrap().aggregate_for(tuner, requester)
    }

    /// Similarity-filtered aggregate of other agents' states, tested
    /// against the requester's pushed current state.
    pub fn filtered_aggregate_for(
        &self,
        tuner: TunerId,
        worker: u32,
        agent: u32,
    ) -> Option<TunerState> {
        self.inner
            .lock()
            .unwrap()
            .filtered_aggregate_for(tuner, worker, agent)
    }
}

impl StoreInner {
    fn aggregate_for(&self, tuner: TunerId, requester: u32) -> Option<TunerState> {
        let workers = self.plain.get(&tuner)?;
        let shape = workers.values().next()?.empty_like();
        let mut agg = shape;
        for (worker, state) in workers {
            if *worker == requester {
                continue;
            }
            // Shapes are homogeneous per tuner; a mismatch is a bug worth
            // surfacing loudly rather than silently skipping.
            agg.merge(state).expect("stored states share a shape");
        }
        Some(agg)
    }

    fn filtered_aggregate_for(
        &self,
        tuner: TunerId,
        worker: u32,
        agent: u32,
    ) -> Option<TunerState> {
        let agents = self.agents.get(&tuner)?;
        let requester = agents.get(&(worker, agent))?;
        let cfg = self
            .similarity
            .get(&tuner)
            .copied()
            .unwrap_or_default();
        let mut agg = requester.current.empty_like();
        for (key, states) in agents {
            if *key == (worker, agent) {
                continue;
            }
            // Both of the agent's states are candidates independently.
            for candidate in [&states.old, &states.current] {
                let mask = similarity_mask(candidate, &requester.current, &cfg)
                    .expect("stored states share a shape");
                agg.merge_masked(candidate, Some(&mask))
                    .expect("stored states share a shape");
            }
        }
        Some(agg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicyKind;
    use crate::stats::RunningStat;
    use crate::tuner::{PolicySpec, Tuner, TunerConfig};
    use crate::dynamic::EpochConfig;
    use rand::prelude::*;
    use rand::rngs::StdRng;

    fn make_tuner(seed: u64, id: TunerId) -> Tuner<usize> {
        Tuner::new(
            TunerConfig::new(vec![0usize, 1, 2], PolicySpec::ContextFree(PolicyKind::Thompson))
                .with_seed(seed)
                .with_id(id),
        )
        .unwrap()
    }

    fn observe_rounds(t: &Tuner<usize>, rewards: &[f64]) {
        for r in rewards {
            let (_, tok) = t.choose().unwrap();
            t.observe(&tok, *r).unwrap();
        }
    }

    #[test]
    fn full_round_merges_both_workers_views() {
        let store = ModelStore::new();
        let id = TunerId(1);
        let (w1, w2) = (Worker::new(1), Worker::new(2));
        let (t1, t2) = (make_tuner(1, id), make_tuner(2, id));
        w1.register(t1.handle());
        w2.register(t2.handle());

        let mut rng = StdRng::seed_from_u64(3);
        let r1: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..0.0)).collect();
        let r2: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..0.0)).collect();
        observe_rounds(&t1, &r1);
        observe_rounds(&t2, &r2);

        // All pushes land before any pull in a quiescent full round.
        w1.push_to(&store).unwrap();
        w2.push_to(&store).unwrap();
        w1.pull_from(&store).unwrap();
        w2.pull_from(&store).unwrap();

        assert_eq!(t1.handle().decision_snapshot().unwrap().total_n(), 100);
        assert_eq!(t2.handle().decision_snapshot().unwrap().total_n(), 100);
    }

    #[test]
    fn pulled_nonlocal_excludes_own_observations() {
        let store = ModelStore::new();
        let id = TunerId(7);
        let workers: Vec<Worker> = (1..=3).map(Worker::new).collect();
        let tuners: Vec<Tuner<usize>> = (0..3).map(|i| make_tuner(i as u64, id)).collect();
        for (w, t) in workers.iter().zip(&tuners) {
            w.register(t.handle());
        }
        for (i, t) in tuners.iter().enumerate() {
            observe_rounds(t, &vec![-0.5; 10 * (i + 1)]);
        }
        for w in &workers {
            w.push_to(&store).unwrap();
        }
        workers[0].pull_from(&store).unwrap();
        let nonlocal = tuners[0].handle().nonlocal_snapshot();
        assert_eq!(nonlocal.total_n(), 20 + 30, "workers 2 and 3 only");
    }

    #[test]
    fn observe_does_not_leak_across_workers_between_rounds() {
        let store = ModelStore::new();
        let id = TunerId(2);
        let (w1, w2) = (Worker::new(1), Worker::new(2));
        let (t1, t2) = (make_tuner(4, id), make_tuner(5, id));
        w1.register(t1.handle());
        w2.register(t2.handle());
        w1.communicate(&store).unwrap();
        w2.communicate(&store).unwrap();

        let before_local = t2.handle().local_snapshot();
        let before_nonlocal = t2.handle().nonlocal_snapshot();
        observe_rounds(&t1, &[-0.1; 25]);
        assert_eq!(t2.handle().local_snapshot(), before_local);
        assert_eq!(t2.handle().nonlocal_snapshot(), before_nonlocal);

        // And observing locally never touches the nonlocal side.
        observe_rounds(&t2, &[-0.2; 5]);
        assert_eq!(t2.handle().nonlocal_snapshot(), before_nonlocal);
    }

    #[test]
    fn aggregate_order_is_immaterial() {
        let mut a = TunerState::new_context_free(2);
        let mut b = TunerState::new_context_free(2);
        let mut rng = StdRng::seed_from_u64(6);
        for _ in 0..40 {
            a.observe(rng.random_range(0..2), None, rng.random_range(-1.0..1.0))
                .unwrap();
            b.observe(rng.random_range(0..2), None, rng.random_range(-1.0..1.0))
                .unwrap();
        }
        let ab = a.merged_with(&b).unwrap();
        let ba = b.merged_with(&a).unwrap();
        let (sa, sb) = (ab.as_context_free().unwrap(), ba.as_context_free().unwrap());
        for (x, y) in sa.iter().zip(sb) {
            assert_eq!(x.n, y.n);
            assert!((x.mean - y.mean).abs() <= 1e-12 * (1.0 + x.mean.abs()));
            assert!((x.m2 - y.m2).abs() <= 1e-12 * (1.0 + x.m2.abs()));
        }
    }

    #[test]
    fn aggregate_matches_union_stream_oracle() {
        let store = ModelStore::new();
        let id = TunerId(3);
        let mut rng = StdRng::seed_from_u64(7);
        let mut oracle = vec![RunningStat::new(); 3];
        for wid in 1..=3u32 {
            let w = Worker::new(wid);
            let t = make_tuner(wid as u64 + 10, id);
            w.register(t.handle());
            for _ in 0..60 {
                let (_, tok) = t.choose().unwrap();
                let r = rng.random_range(-2.0..0.0);
                t.observe(&tok, r).unwrap();
                if wid != 1 {
                    oracle[tok.arm()].update(r).unwrap();
                }
            }
            w.push_to(&store).unwrap();
        }
        let agg = store.aggregate_for(id, 1).unwrap();
        let arms = agg.as_context_free().unwrap();
        for (got, want) in arms.iter().zip(&oracle) {
            assert_eq!(got.n, want.n);
            assert!((got.mean - want.mean).abs() <= 1e-9 * (1.0 + want.mean.abs()));
            assert!((got.m2 - want.m2).abs() <= 1e-9 * (1.0 + want.m2.abs()));
        }
    }

    #[test]
    fn single_worker_aggregate_is_empty() {
        let store = ModelStore::new();
        let id = TunerId(4);
        let w = Worker::new(1);
        let t = make_tuner(8, id);
        w.register(t.handle());
        observe_rounds(&t, &[-1.0; 10]);
        w.push_to(&store).unwrap();
        let agg = store.aggregate_for(id, 1).unwrap();
        assert_eq!(agg.total_n(), 0);
        assert!(store.aggregate_for(TunerId(999), 1).is_none());
    }

    #[test]
    fn push_replaces_previous_state_from_same_worker() {
        let store = ModelStore::new();
        let id = TunerId(5);
        let w = Worker::new(1);
        let t = make_tuner(9, id);
        w.register(t.handle());
        observe_rounds(&t, &[-1.0; 10]);
        w.push_to(&store).unwrap();
        observe_rounds(&t, &[-1.0; 5]);
        w.push_to(&store).unwrap();
        // Seen from another worker: the latest push (n=15), not 10+15.
        let agg = store.aggregate_for(id, 2).unwrap();
        assert_eq!(agg.total_n(), 15);
    }

    #[test]
    fn partitioned_worker_skips_rounds_and_keeps_tuning() {
        let store = ModelStore::new();
        let id = TunerId(6);
        let (w1, w2) = (Worker::new(1), Worker::new(2));
        let (t1, t2) = (make_tuner(20, id), make_tuner(21, id));
        w1.register(t1.handle());
        w2.register(t2.handle());
        observe_rounds(&t2, &[-0.5; 30]);
        w2.push_to(&store).unwrap();

        w1.set_partitioned(true);
        w1.communicate(&store).unwrap(); // silent no-op
        assert_eq!(t1.handle().nonlocal_snapshot().total_n(), 0);
        observe_rounds(&t1, &[-0.25; 10]); // choose/observe unaffected
        assert_eq!(t1.handle().local_snapshot().total_n(), 10);

        w1.set_partitioned(false);
        w1.communicate(&store).unwrap();
        assert_eq!(t1.handle().nonlocal_snapshot().total_n(), 30);
    }

    #[test]
    fn background_communicator_converges_views() {
        let store = Arc::new(ModelStore::new());
        let id = TunerId(8);
        let w1 = Arc::new(Worker::new(1).with_interval(Duration::from_millis(5)));
        let w2 = Arc::new(Worker::new(2).with_interval(Duration::from_millis(5)));
        let (t1, t2) = (make_tuner(30, id), make_tuner(31, id));
        w1.register(t1.handle());
        w2.register(t2.handle());
        observe_rounds(&t1, &[-0.1; 40]);
        observe_rounds(&t2, &[-0.2; 25]);
        let g1 = w1.spawn_communicator(Arc::clone(&store));
        let g2 = w2.spawn_communicator(Arc::clone(&store));
        std::thread::sleep(Duration::from_millis(60));
        g1.stop();
        g2.stop();
        assert_eq!(t1.handle().nonlocal_snapshot().total_n(), 25);
        assert_eq!(t2.handle().nonlocal_snapshot().total_n(), 40);
    }

    /// Per-arm i.i.d. state: `means[arm] + uniform(-1,1)` observed `n` times
    /// per arm. Crafted directly so the filter tests see unbiased streams
    /// rather than adaptively sampled (and hence stopping-biased) ones.
    fn iid_state(means: &[f64], n: usize, rng: &mut StdRng) -> TunerState {
        let mut st = TunerState::new_context_free(means.len());
        for (arm, mean) in means.iter().enumerate() {
            for _ in 0..n {
                st.observe(arm, None, mean + rng.random_range(-1.0..1.0))
                    .unwrap();
            }
        }
        st
    }

    fn push_agent_state(store: &ModelStore, id: TunerId, agent: u32, current: TunerState) {
        let msg = StateMessage {
            kind: MessageKind::Push,
            worker_id: agent,
            entries: vec![(
                id,
                Payload::AgentPair {
                    agent,
                    old: current.empty_like(),
                    current,
                },
            )],
        };
        store.handle(&wire::encode_message(&msg)).unwrap();
    }

    #[test]
    fn identical_regimes_pass_the_store_filter() {
        let store = ModelStore::new();
        let id = TunerId(40);
        let mut rng = StdRng::seed_from_u64(41);
        let mut unfiltered = 0;
        for agent in 0..4u32 {
            push_agent_state(&store, id, agent, iid_state(&[-1.0, -1.0], 100, &mut rng));
            if agent != 0 {
                unfiltered += 200;
            }
        }
        let filtered = store.filtered_aggregate_for(id, 0, 0).unwrap().total_n();
        assert!(
            (filtered as f64 - unfiltered as f64).abs() <= 0.1 * unfiltered as f64,
            "filtered {filtered} vs unfiltered {unfiltered}"
        );
    }

    #[test]
    fn unique_regime_is_filtered_out() {
        let store = ModelStore::new();
        let id = TunerId(42);
        let mut rng = StdRng::seed_from_u64(43);
        let mut unfiltered = 0;
        for agent in 0..4u32 {
            // Agent 0's rewards sit dozens of sigma away from everyone
            // else's.
            let mean = if agent == 0 { -40.0 } else { -1.0 };
            push_agent_state(&store, id, agent, iid_state(&[mean, mean], 100, &mut rng));
            if agent != 0 {
                unfiltered += 200;
            }
        }
        let filtered = store.filtered_aggregate_for(id, 0, 0).unwrap().total_n();
        assert!(
            filtered as f64 <= 0.05 * unfiltered as f64,
            "filtered {filtered} vs unfiltered {unfiltered}"
        );
    }

    #[test]
    fn requester_below_n_min_gets_empty_aggregate() {
        let store = ModelStore::new();
        let id = TunerId(44);
        let mut rng = StdRng::seed_from_u64(45);
        for agent in 0..3u32 {
            let n = if agent == 0 { 3 } else { 100 };
            push_agent_state(&store, id, agent, iid_state(&[-1.0, -1.0], n, &mut rng));
        }
        let filtered = store.filtered_aggregate_for(id, 0, 0).unwrap();
        assert_eq!(filtered.total_n(), 0);
    }

    #[test]
    fn dynamic_pull_installs_filtered_aggregate() {
        let store = ModelStore::new();
        let id = TunerId(46);
        let workers: Vec<Worker> = (0..3).map(Worker::new).collect();
        let tuners: Vec<Tuner<usize>> = (0..3)
            .map(|a| {
                Tuner::new(
                    TunerConfig::new(
                        vec![0usize, 1],
                        PolicySpec::ContextFree(PolicyKind::Thompson),
                    )
                    .with_seed(300 + a as u64)
                    .with_id(id)
                    .with_agent(a as u32)
                    .with_epochs(EpochConfig::Rounds(1_000_000)),
                )
                .unwrap()
            })
            .collect();
        for (w, t) in workers.iter().zip(&tuners) {
            w.register(t.handle());
        }
        // Constant rewards: every agent's arm means coincide exactly, so
        // arms with enough observations always pass the filter.
        for t in &tuners {
            for _ in 0..150 {
                let (_, tok) = t.choose().unwrap();
                t.observe(&tok, -2.0).unwrap();
            }
        }
        for w in &workers {
            w.push_to(&store).unwrap();
        }
        workers[0].pull_from(&store).unwrap();
        let nonlocal = tuners[0].handle().nonlocal_snapshot().total_n();
        assert!(nonlocal >= 250, "expected most of 300, got {nonlocal}");
    }
}
