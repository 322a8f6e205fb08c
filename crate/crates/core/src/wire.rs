//! Flat, length-prefixed byte layout for tuner states and worker↔store
//! messages.
//!
//! Both execution modes of the distributed layer (real threads and the
//! discrete-event harness) exchange the same bytes, so serialization bugs
//! cannot hide in the simulator. All integers are little-endian; floats are
//! IEEE-754 bit patterns.
//!
//! State layout: kind (1 byte: 0 context-free, 1 contextual), arm count
//! (u32). Context-free arms are `n:u64, mean:f64, m2:f64`. Contextual states
//! add the feature dimension (u32) and per arm `n:u64, mu_x:[f64; F],
//! c_xx:[f64; F·F] row-major, mu_r:f64, m2_r:f64, c_xr:[f64; F]`.
//!
//! Message layout: kind (1 byte), worker-id (u32), entry count (u32), then
//! per entry a tuner-id (u32) and a tagged payload: 0 plain pull request,
//! 1 length-prefixed state, 2 agent pair (agent-id plus two length-prefixed
//! states: aggregate-old then current), 3 agent pull request (agent-id).

use crate::contextual::CoMomentState;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::stats::RunningStat;
use crate::state::TunerState;
use crate::tuner::TunerId;

const KIND_CONTEXT_FREE: u8 = 0;
const KIND_CONTEXTUAL: u8 = 1;

/// Message direction/purpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Push,
    PullRequest,
    PullReply,
}

impl MessageKind {
    fn to_byte(self) -> u8 {
        match self {
            MessageKind::Push => 0,
            MessageKind::PullRequest => 1,
            MessageKind::PullReply => 2,
        }
    }

    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(MessageKind::Push),
            1 => Ok(MessageKind::PullRequest),
            2 => Ok(MessageKind::PullReply),
            other => Err(Error::MalformedMessage(format!(
                "unknown message kind {other}"
            ))),
        }
    }
}

/// Per-tuner payload inside a message.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Pull request for a plain tuner, or an empty reply.
    None,
    /// One state: a plain push or a pull reply (possibly an aggregate).
    State(TunerState),
    /// Epoch-mode push: both of an agent's states.
    AgentPair {
        agent: u32,
        old: TunerState,
        current: TunerState,
    },
    /// Epoch-mode pull request identifying the asking agent.
    AgentRequest { agent: u32 },
}

/// One worker↔store exchange, possibly batching several tuners.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMessage {
    pub kind: MessageKind,
    pub worker_id: u32,
    pub entries: Vec<(TunerId, Payload)>,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Bounded little-endian reader over a byte slice.
struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::MalformedMessage(format!(
                "truncated input: wanted {n} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

/// Serializes a state to the flat layout.
pub fn encode_state(state: &TunerState) -> Vec<u8> {
    let mut out = Vec::new();
    match state {
        TunerState::ContextFree(arms) => {
            out.push(KIND_CONTEXT_FREE);
            put_u32(&mut out, arms.len() as u32);
            for a in arms {
                put_u64(&mut out, a.n);
                put_f64(&mut out, a.mean);
                put_f64(&mut out, a.m2);
            }
        }
        TunerState::Contextual(arms) => {
            out.push(KIND_CONTEXTUAL);
            put_u32(&mut out, arms.len() as u32);
            let dim = arms.first().map_or(0, |a| a.dim());
            put_u32(&mut out, dim as u32);
            for a in arms {
                put_u64(&mut out, a.n);
                for v in &a.mu_x {
                    put_f64(&mut out, *v);
                }
                for v in &a.c_xx.data {
                    put_f64(&mut out, *v);
                }
                put_f64(&mut out, a.mu_r);
                put_f64(&mut out, a.m2_r);
                for v in &a.c_xr {
                    put_f64(&mut out, *v);
                }
            }
        }
    }
    out
}

fn decode_state_from(c: &mut Cursor) -> Result<TunerState> {
    match c.u8()? {
        KIND_CONTEXT_FREE => {
            let count = c.u32()? as usize;
            let mut arms = Vec::with_capacity(count);
            for _ in 0..count {
                let n = c.u64()?;
                let mean = c.f64()?;
                let m2 = c.f64()?;
                arms.push(RunningStat::from_parts(n, mean, m2));
            }
            Ok(TunerState::ContextFree(arms))
        }
        KIND_CONTEXTUAL => {
            let count = c.u32()? as usize;
            let dim = c.u32()? as usize;
            let mut arms = Vec::with_capacity(count);
            for _ in 0..count {
                let n = c.u64()?;
                let mut mu_x = vec![0.0; dim];
                for v in mu_x.iter_mut() {
                    *v = c.f64()?;
                }
                let mut c_xx = Mat::zeros(dim);
                for v in c_xx.data.iter_mut() {
                    *v = c.f64()?;
                }
                let mu_r = c.f64()?;
                let m2_r = c.f64()?;
                let mut c_xr = vec![0.0; dim];
                for v in c_xr.iter_mut() {
                    *v = c.f64()?;
                }
                arms.push(CoMomentState {
                    n,
                    mu_x,
                    c_xx,
                    mu_r,
                    m2_r,
                    c_xr,
                });
            }
            Ok(TunerState::Contextual(arms))
        }
        other => Err(Error::MalformedMessage(format!(
            "unknown state kind {other}"
        ))),
    }
}

/// Parses a state and requires the input to be fully consumed.
pub fn decode_state(bytes: &[u8]) -> Result<TunerState> {
    let mut c = Cursor::new(bytes);
    let st = decode_state_from(&mut c)?;
    if !c.done() {
        return Err(Error::MalformedMessage(format!(
            "{} trailing bytes after state",
            bytes.len() - c.pos
        )));
    }
    Ok(st)
}

fn put_state_prefixed(out: &mut Vec<u8>, state: &TunerState) {
    let bytes = encode_state(state);
    put_u32(out, bytes.len() as u32);
    out.extend_from_slice(&bytes);
}

fn take_state_prefixed(c: &mut Cursor) -> Result<TunerState> {
    let len = c.u32()? as usize;
    decode_state(c.take(len)?)
}

/// Serializes a full message.
pub fn encode_message(msg: &StateMessage) -> Vec<u8> {
    let mut out = Vec::new();
    out.push(msg.kind.to_byte());
    put_u32(&mut out, msg.worker_id);
    put_u32(&mut out, msg.entries.len() as u32);
    for (tuner, payload) in &msg.entries {
        put_u32(&mut out, tuner.0);
        match payload {
            Payload::None => out.push(0),
            Payload::State(state) => {
                out.push(1);
                put_state_prefixed(&mut out, state);
            }
            Payload::AgentPair {
                agent,
                old,
                current,
            } => {
                out.push(2);
                put_u32(&mut out, *agent);
                put_state_prefixed(&mut out, old);
                put_state_prefixed(&mut out, current);
            }
            Payload::AgentRequest { agent } => {
                out.push(3);
                put_u32(&mut out, *agent);
            }
        }
    }
    out
}

/// Parses a full message, rejecting trailing garbage.
pub fn decode_message(bytes: &[u8]) -> Result<StateMessage> {
    let mut c = Cursor::new(bytes);
    let kind = MessageKind::from_byte(c.u8()?)?;
    let worker_id = c.u32()?;
    let count = c.u32()? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let tuner = TunerId(c.u32()?);
        let payload = match c.u8()? {
            0 => Payload::None,
            1 => Payload::State(take_state_prefixed(&mut c)?),
            2 => {
                let agent = c.u32()?;
                let old = take_state_prefixed(&mut c)?;
                let current = take_state_prefixed(&mut c)?;
                Payload::AgentPair {
                    agent,
                    old,
                    current,
                }
            }
            3 => Payload::AgentRequest { agent: c.u32()? },
            other => {
                return Err(Error::MalformedMessage(format!(
                    "unknown payload tag {other}"
                )))
            }
        };
        entries.push((tuner, payload));
    }
    if !c.done() {
        return Err(Error::MalformedMessage(format!(
            "{} trailing bytes after message",
            bytes.len() - c.pos
        )));
    }
    Ok(StateMessage {
        kind,
        worker_id,
        entries,
    })
}
