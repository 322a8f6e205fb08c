//! One-pass running moments for a single bandit arm.
//!
//! `RunningStat` tracks count, mean, and the centered second moment `m2`
//! (sum of squared deviations) using Welford's update. Two stats built from
//! disjoint observation streams merge into exactly the stat of the
//! concatenated stream (up to float rounding), which is the property every
//! distribution layer above this leans on.

use crate::error::{Error, Result};

/// Count, mean, and sum of squared deviations of an observation stream.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningStat {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl RunningStat {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a stat from raw fields. No validation beyond finiteness; used
    /// by deserialization and tests.
    pub fn from_parts(n: u64, mean: f64, m2: f64) -> Self {
        Self { n, mean, m2 }
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Welford single-observation update.
    pub fn update(&mut self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFiniteReward(x));
        }
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        // Second factor uses the *updated* mean; this is what keeps m2 >= 0.
        self.m2 += delta * (x - self.mean);
        Ok(())
    }

    /// Chan/parallel merge: `self` absorbs `other` as if other's stream had
    /// been observed here. Merging with an empty stat is an exact identity.
    pub fn merge(&mut self, other: &RunningStat) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let na = self.n as f64;
        let nb = other.n as f64;
        let n = na + nb;
        let delta = other.mean - self.mean;
        self.mean += delta * nb / n;
        self.m2 += other.m2 + delta * delta * na * nb / n;
        // Cancellation can push m2 a hair below zero; clamp so variance()
        // never goes negative downstream.
        if self.m2 < 0.0 {
            self.m2 = 0.0;
        }
        self.n += other.n;
    }

    /// Unbiased sample variance; `None` until two observations exist.
    pub fn variance(&self) -> Option<f64> {
        if self.n < 2 {
            None
        } else {
            Some(self.m2 / (self.n - 1) as f64)
        }
    }
}

/// `merge` as a pure function; convenient for fold-style aggregation.
pub fn merged(a: &RunningStat, b: &RunningStat) -> RunningStat {
    let mut out = *a;
    out.merge(b);
    out
}
