//! Context-free arm-selection policies.
//!
//! The default policy draws from each arm's posterior over its mean reward
//! and picks the argmax (Thompson sampling). With a noninformative prior the
//! posterior over the mean of a Gaussian arm is a scaled, shifted
//! Student-t with n−1 degrees of freedom; with fewer than two observations
//! it is improper (uniform over all reals), which we operationalize as a
//! uniform random pick among all under-observed arms — every arm therefore
//! gets observed twice before any comparison happens.

use rand::prelude::*;
use rand_distr::{ChiSquared, StandardNormal};

use crate::error::{Error, Result};
use crate::stats::RunningStat;

/// Which context-free decision rule a tuner runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    Thompson,
    EpsilonGreedy { epsilon: f64 },
    Ucb1 { c: f64 },
}

impl PolicyKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PolicyKind::Thompson => Ok(()),
            PolicyKind::EpsilonGreedy { epsilon } => {
                if (0.0..=1.0).contains(&epsilon) {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "epsilon must be in [0,1], got {epsilon}"
                    )))
                }
            }
            PolicyKind::Ucb1 { c } => {
                if c > 0.0 && c.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "ucb1 exploration constant must be > 0, got {c}"
                    )))
                }
            }
        }
    }
}

/// A draw from an arm's posterior over its mean reward.
///
/// `Explore` stands in for the improper (n < 2) posterior and compares
/// greater than every finite value, so an argmax over samples always prefers
/// an under-observed arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PosteriorSample {
    Explore,
    Value(f64),
}

impl PosteriorSample {
    /// `true` if `self` beats `other` in the argmax (strictly greater).
    pub fn beats(&self, other: &PosteriorSample) -> bool {
        match (self, other) {
            (PosteriorSample::Explore, PosteriorSample::Explore) => false,
            (PosteriorSample::Explore, PosteriorSample::Value(_)) => true,
            (PosteriorSample::Value(_), PosteriorSample::Explore) => false,
            (PosteriorSample::Value(a), PosteriorSample::Value(b)) => a > b,
        }
    }
}

/// Draws from the posterior over the arm's mean reward.
///
/// For n ≥ 2 this is `mean + T·sqrt(var/n)` where `T` is Student-t with
/// n−1 degrees of freedom, generated as standard-normal over
/// sqrt(chi-squared/df) so the degrees of freedom can be any positive count.
pub fn sample_posterior_mean<R: Rng + ?Sized>(s: &RunningStat, rng: &mut R) -> PosteriorSample {
    let Some(var) = s.variance() else {
        return PosteriorSample::Explore;
    };
    let df = (s.n - 1) as f64;
    let z: f64 = rng.sample(StandardNormal);
    // ChiSquared(df) with df >= 1 always constructs; unwrap is safe.
    let w: f64 = rng.sample(ChiSquared::new(df).unwrap());
    let t = z / (w / df).sqrt();
    PosteriorSample::Value(s.mean + t * (var / s.n as f64).sqrt())
}

fn check_nonempty(arms: &[RunningStat]) -> Result<()> {
    if arms.is_empty() {
        Err(Error::EmptyChoices)
    } else {
        Ok(())
    }
}

/// Thompson-sampling choice: sample every arm's posterior, return the argmax
/// (ties to the lowest index). Arms with n < 2 are drawn uniformly among
/// themselves before any finite-sample arm is considered.
pub fn ts_choose<R: Rng + ?Sized>(arms: &[RunningStat], rng: &mut R) -> Result<usize> {
    check_nonempty(arms)?;
    let under: Vec<usize> = (0..arms.len()).filter(|&i| arms[i].n < 2).collect();
    if !under.is_empty() {
        return Ok(under[rng.random_range(0..under.len())]);
    }
    let mut best = 0usize;
    let mut best_sample = sample_posterior_mean(&arms[0], rng);
    for (i, arm) in arms.iter().enumerate().skip(1) {
        let sample = sample_posterior_mean(arm, rng);
        if sample.beats(&best_sample) {
            best = i;
            best_sample = sample;
        }
    }
    Ok(best)
}

/// ε-greedy choice: with probability ε a uniform arm, otherwise the arm with
/// the best sample mean (unobserved arms first, lowest index on ties).
pub fn eps_greedy_choose<R: Rng + ?Sized>(
    arms: &[RunningStat],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    check_nonempty(arms)?;
    if rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..arms.len()));
    }
    if let Some(i) = arms.iter().position(|a| a.n == 0) {
        return Ok(i);
    }
    let mut best = 0usize;
    for i in 1..arms.len() {
        if arms[i].mean > arms[best].mean {
            best = i;
        }
    }
    Ok(best)
}

/// UCB1 choice: unobserved arms first, otherwise argmax of
/// `mean + c·sqrt(2·ln t / n)` where `t` is the caller's total round count.
pub fn ucb1_choose(arms: &[RunningStat], c: f64, t: u64) -> Result<usize> {
    check_nonempty(arms)?;
    if let Some(i) = arms.iter().position(|a| a.n == 0) {
        return Ok(i);
    }
    let ln_t = (t.max(1) as f64).ln();
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for (i, arm) in arms.iter().enumerate() {
        let score = arm.mean + c * (2.0 * ln_t / arm.n as f64).sqrt();
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    fn stat(n: u64, mean: f64, m2: f64) -> RunningStat {
        RunningStat::from_parts(n, mean, m2)
    }

    #[test]
    fn explore_sentinel_beats_any_finite() {
        assert!(PosteriorSample::Explore.beats(&PosteriorSample::Value(f64::MAX)));
        assert!(!PosteriorSample::Value(f64::MAX).beats(&PosteriorSample::Explore));
        assert!(!PosteriorSample::Explore.beats(&PosteriorSample::Explore));
    }

    #[test]
    fn zero_variance_collapses_posterior() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = stat(5, 3.0, 0.0);
        for _ in 0..100 {
            assert_eq!(
                sample_posterior_mean(&s, &mut rng),
                PosteriorSample::Value(3.0)
            );
        }
    }

    #[test]
    fn under_observed_arm_yields_sentinel() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(
            sample_posterior_mean(&stat(1, 9.9, 0.0), &mut rng),
            PosteriorSample::Explore
        );
        assert_eq!(
            sample_posterior_mean(&stat(0, 0.0, 0.0), &mut rng),
            PosteriorSample::Explore
        );
    }

    #[test]
    fn posterior_moments_match_t_distribution() {
        // n=100, var=1: draws are mean + T_99 * 0.1, so the Monte Carlo std
        // should sit near 0.1*sqrt(99/97) ~= 0.101.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = stat(100, 0.0, 99.0);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| match sample_posterior_mean(&s, &mut rng) {
                PosteriorSample::Value(v) => v,
                PosteriorSample::Explore => panic!("n=100 must sample"),
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
            / (draws.len() - 1) as f64;
        assert!((-0.02..=0.02).contains(&mean), "mean {mean}");
        let std = var.sqrt();
        assert!((0.095..=0.107).contains(&std), "std {std}");
    }

    #[test]
    fn posterior_spread_shrinks_as_inverse_sqrt_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spread = |n: u64, rng: &mut ChaCha8Rng| {
            let s = stat(n, 0.0, (n - 1) as f64); // var = 1 at any n
            let draws: Vec<f64> = (0..40_000)
                .map(|_| match sample_posterior_mean(&s, rng) {
                    PosteriorSample::Value(v) => v,
                    PosteriorSample::Explore => unreachable!(),
                })
                .collect();
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            (draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
                / (draws.len() - 1) as f64)
                .sqrt()
        };
        let ratio = spread(100, &mut rng) / spread(10_000, &mut rng);
        assert!((8.0..=12.5).contains(&ratio), "spread ratio {ratio}");
    }

    #[test]
    fn unexplored_arms_drawn_uniformly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let arms = vec![RunningStat::new(); 4];
        let mut counts = [0usize; 4];
        let trials = 100_000;
        for _ in 0..trials {
            counts[ts_choose(&arms, &mut rng).unwrap()] += 1;
        }
        for &c in &counts {
            let f = c as f64 / trials as f64;
            assert!((f - 0.25).abs() <= 0.02, "frequency {f}");
        }
    }

    #[test]
    fn separated_arms_resolve_decisively() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let arms = vec![stat(100, -1.0, 0.99), stat(100, -10.0, 0.99)];
        let trials = 10_000;
        let wins = (0..trials)
            .filter(|_| ts_choose(&arms, &mut rng).unwrap() == 0)
            .count();
        assert!(wins as f64 / trials as f64 > 0.999, "wins {wins}/{trials}");
    }

    #[test]
    fn identical_arms_split_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let arms = vec![stat(50, 2.0, 49.0), stat(50, 2.0, 49.0)];
        let trials = 100_000;
        let wins = (0..trials)
            .filter(|_| ts_choose(&arms, &mut rng).unwrap() == 0)
            .count();
        let f = wins as f64 / trials as f64;
        assert!((0.47..=0.53).contains(&f), "frequency {f}");
    }

    #[test]
    fn choice_frequencies_invariant_to_reward_shift() {
        let freq = |shift: f64, seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let arms = vec![
                stat(30, 1.0 + shift, 29.0),
                stat(30, 1.3 + shift, 29.0),
                stat(30, 0.7 + shift, 29.0),
            ];
            let trials = 100_000;
            let mut counts = [0usize; 3];
            for _ in 0..trials {
                counts[ts_choose(&arms, &mut rng).unwrap()] += 1;
            }
            counts.map(|c| c as f64 / trials as f64)
        };
        let base = freq(0.0, 8);
        let shifted = freq(100.0, 9);
        for (b, s) in base.iter().zip(&shifted) {
            assert!((b - s).abs() <= 0.02, "{b} vs {s}");
        }
    }

    #[test]
    fn epsilon_one_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let arms = vec![stat(10, 0.0, 1.0), stat(10, 5.0, 1.0), stat(10, 1.0, 1.0)];
        let trials = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..trials {
            counts[eps_greedy_choose(&arms, 1.0, &mut rng).unwrap()] += 1;
        }
        for &c in &counts {
            let f = c as f64 / trials as f64;
            assert!((f - 1.0 / 3.0).abs() <= 0.02, "frequency {f}");
        }
    }

    #[test]
    fn epsilon_zero_is_pure_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let arms = vec![stat(3, 1.0, 0.1), stat(3, 5.0, 0.1), stat(3, 3.0, 0.1)];
        for _ in 0..1000 {
            assert_eq!(eps_greedy_choose(&arms, 0.0, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn epsilon_splits_exploit_and_explore() {
        // eps=0.2 on two arms: best arm gets 0.8 + 0.2/2 = 0.9.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let arms = vec![stat(1000, 0.0, 10.0), stat(1000, 1.0, 10.0)];
        let trials = 100_000;
        let wins = (0..trials)
            .filter(|_| eps_greedy_choose(&arms, 0.2, &mut rng).unwrap() == 1)
            .count();
        let f = wins as f64 / trials as f64;
        assert!((f - 0.9).abs() <= 0.02, "frequency {f}");
    }

    #[test]
    fn ucb_initializes_unobserved_arms() {
        let arms = vec![stat(5, 1.0, 1.0), RunningStat::new(), stat(2, 0.0, 0.0)];
        assert_eq!(ucb1_choose(&arms, 1.0, 8).unwrap(), 1);
    }

    #[test]
    fn ucb_bonus_prefers_rarely_pulled_arm() {
        let arms = vec![stat(100, 0.0, 0.0), stat(1, 0.0, 0.0)];
        assert_eq!(ucb1_choose(&arms, 1.0, 101).unwrap(), 1);
    }

    #[test]
    fn ucb_with_zero_bonus_is_greedy() {
        let arms = vec![stat(10, 1.0, 0.0), stat(10, 0.9, 0.0)];
        assert_eq!(ucb1_choose(&arms, 0.0, 20).unwrap(), 0);
    }

    #[test]
    fn empty_arms_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        assert!(ts_choose(&[], &mut rng).is_err());
        assert!(eps_greedy_choose(&[], 0.5, &mut rng).is_err());
        assert!(ucb1_choose(&[], 1.0, 1).is_err());
    }

    #[test]
    fn policy_parameter_validation() {
        assert!(PolicyKind::EpsilonGreedy { epsilon: 0.5 }.validate().is_ok());
        assert!(PolicyKind::EpsilonGreedy { epsilon: 1.5 }.validate().is_err());
        assert!(PolicyKind::Ucb1 { c: 1.0 }.validate().is_ok());
        assert!(PolicyKind::Ucb1 { c: 0.0 }.validate().is_err());
    }
}
