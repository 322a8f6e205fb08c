//! Synthetic variant workloads with geometrically spaced mean runtimes.
//!
//! A workload of `n` variants spaces mean runtimes between 1.0 and `m`
//! geometrically, with per-variant noise proportional to the mean. Runtimes
//! are priced from a single shared standard-normal draw per round, which
//! keeps each variant's marginal distribution Normal(mu, sigma) while
//! guaranteeing that the fastest-mean variant is fastest in every round.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest runtime the generator will report; draws below it are clamped.
pub const MIN_RUNTIME: f64 = 1e-6;

/// One synthetic variant: runtimes are Normal(mu, sigma), clamped positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub mu: f64,
    pub sigma: f64,
}

/// Parameters of a synthetic tuning run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Number of variants (arms).
    pub n: usize,
    /// Ratio of slowest to fastest mean runtime.
    pub m: f64,
    /// Noise scale: sigma_i = k * mu_i.
    pub k: f64,
    /// Rounds per trial.
    pub rounds: u64,
    /// Independent trials to average over.
    pub trials: usize,
    /// Master seed; every trial derives its own stream from it.
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { n: 5, m: 5.7, k: 0.25, rounds: 20_000, trials: 200, seed: 1 }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        build_variants(self.n, self.m, self.k).map(|_| ())
    }
}

/// Builds `n` variants with mu_i = m^(i/(n-1)) and sigma_i = k * mu_i.
///
/// Variant 0 always has mean 1.0 and is the fastest; variant n-1 has mean `m`.
pub fn build_variants(n: usize, m: f64, k: f64) -> Result<Vec<VariantSpec>> {
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 variants, got {n}")));
    }
    if !m.is_finite() || m < 1.0 {
        return Err(Error::Config(format!("mean ratio m must be >= 1, got {m}")));
    }
    if !k.is_finite() || k < 0.0 {
        return Err(Error::Config(format!("noise scale k must be >= 0, got {k}")));
    }
    let span = (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            let mu = m.powf(i as f64 / span);
            VariantSpec { mu, sigma: k * mu }
        })
        .collect())
}

/// Draws one runtime for a variant, independent of all other variants.
pub fn sample_runtime<R: Rng + ?Sized>(v: VariantSpec, rng: &mut R) -> f64 {
    let normal = Normal::new(v.mu, v.sigma).expect("sigma is finite and non-negative");
    normal.sample(rng).max(MIN_RUNTIME)
}

/// Prices every variant's runtime for one round from a shared normal draw.
///
/// `runtime_i = max(mu_i + sigma_i * z, MIN_RUNTIME)` with one `z` per round.
/// Marginals match [`sample_runtime`]; in addition the coupling preserves the
/// mean-runtime ordering within every round, so a policy can never beat the
/// always-fastest oracle on the same draw sequence.
#[derive(Debug, Clone)]
pub struct RoundPricer {
    variants: Vec<VariantSpec>,
}

impl RoundPricer {
    pub fn new(variants: Vec<VariantSpec>) -> Self {
        Self { variants }
    }

    pub fn variants(&self) -> &[VariantSpec] {
        &self.variants
    }

    pub fn arm_count(&self) -> usize {
        self.variants.len()
    }

    /// Runtime of `arm` given the round's shared draw `z`.
    pub fn runtime(&self, arm: usize, z: f64) -> f64 {
        let v = self.variants[arm];
        (v.mu + v.sigma * z).max(MIN_RUNTIME)
    }

    /// Draws the round's shared quantile.
    pub fn draw_z<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.sample(StandardNormal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_grid_is_geometric() {
        let v = build_variants(5, 5.7, 0.25).unwrap();
        let expect = [1.0, 1.545_2, 2.387_5, 3.689_2, 5.7];
        for (spec, want) in v.iter().zip(expect) {
            assert!((spec.mu - want).abs() < 5e-4, "mu {} vs {}", spec.mu, want);
            assert!((spec.sigma - 0.25 * spec.mu).abs() < 1e-12);
        }
        // Exact endpoints and exact geometric law.
        assert_eq!(v[0].mu, 1.0);
        assert!((v[4].mu - 5.7).abs() < 1e-12);
        for i in 1..4 {
            let ratio = v[i + 1].mu / v[i].mu;
            assert!((ratio - v[1].mu / v[0].mu).abs() < 1e-12);
        }
    }

    #[test]
    fn two_variants_hit_both_endpoints() {
        let v = build_variants(2, 8.0, 0.0).unwrap();
        assert_eq!(v[0].mu, 1.0);
        assert_eq!(v[1].mu, 8.0);
        assert_eq!(v[0].sigma, 0.0);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(build_variants(1, 2.0, 0.1).is_err());
        assert!(build_variants(5, 0.5, 0.1).is_err());
        assert!(build_variants(5, 2.0, -0.1).is_err());
        assert!(build_variants(5, f64::NAN, 0.1).is_err());
    }

    #[test]
    fn sample_runtime_matches_normal_moments() {
        let v = VariantSpec { mu: 1.0, sigma: 0.25 };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws: Vec<f64> = (0..200_000).map(|_| sample_runtime(v, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        assert!((mean - 1.0).abs() < 0.005, "mean {mean}");
        assert!((var.sqrt() - 0.25).abs() < 0.005, "std {}", var.sqrt());
    }

    #[test]
    fn runtimes_are_clamped_positive() {
        let v = VariantSpec { mu: 0.001, sigma: 10.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            assert!(sample_runtime(v, &mut rng) >= MIN_RUNTIME);
        }
        let pricer = RoundPricer::new(vec![v]);
        assert_eq!(pricer.runtime(0, -100.0), MIN_RUNTIME);
    }

    #[test]
    fn shared_draw_preserves_mean_ordering_every_round() {
        let pricer = RoundPricer::new(build_variants(5, 5.7, 0.25).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let z = pricer.draw_z(&mut rng);
            for arm in 1..5 {
                assert!(pricer.runtime(0, z) <= pricer.runtime(arm, z));
            }
        }
    }

    #[test]
    fn shared_draw_marginals_match_per_variant_normals() {
        let pricer = RoundPricer::new(build_variants(3, 4.0, 0.25).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sums = [0.0f64; 3];
        let mut sqs = [0.0f64; 3];
        let rounds = 200_000;
        for _ in 0..rounds {
            let z = pricer.draw_z(&mut rng);
            for arm in 0..3 {
                let rt = pricer.runtime(arm, z);
                sums[arm] += rt;
                sqs[arm] += rt * rt;
            }
        }
        for arm in 0..3 {
            let mu = pricer.variants()[arm].mu;
            let sigma = pricer.variants()[arm].sigma;
            let mean = sums[arm] / rounds as f64;
            let var = sqs[arm] / rounds as f64 - mean * mean;
            assert!((mean - mu).abs() < 0.01 * mu, "arm {arm} mean {mean} vs {mu}");
            assert!((var.sqrt() - sigma).abs() < 0.01 * mu, "arm {arm} std");
        }
    }
}
