//! Contextual linear Thompson sampling with built-in standardization.
//!
//! Each arm keeps single-pass co-moments of its context vectors and rewards
//! (`CoMomentState`). At decision time the arm's observations are viewed in
//! standardized space — features and rewards centered and scaled to unit
//! variance — where ridge regression reduces to correlation matrices that
//! fall straight out of the co-moments. A model-parameter draw from
//! `Normal(w, P/n)` scores the standardized query context, and the predicted
//! reward is mapped back to raw units. Standardization is what keeps the
//! approach hyperparameter-free in practice: no per-problem feature scaling
//! and no bias feature (centering absorbs the intercept).

use rand::prelude::*;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::policy::PosteriorSample;

/// Jitter ladder for Cholesky on nearly-singular matrices: start at 1e-10·I
/// and escalate tenfold up to 1e-6 before giving up.
fn cholesky_jittered(m: &Mat) -> Result<Mat> {
    if let Ok(l) = m.cholesky() {
        return Ok(l);
    }
    let mut jitter = 1e-10;
    while jitter <= 1e-6 {
        let mut j = m.clone();
        j.add_diag(jitter);
        if let Ok(l) = j.cholesky() {
            return Ok(l);
        }
        jitter *= 10.0;
    }
    Err(Error::NotPositiveDefinite)
}

/// Single-pass co-moments of (context, reward) observations for one arm.
///
/// `c_xx` and `c_xr` hold sums of cross-deviations (co-moments), not
/// normalized covariances; divide by n−1 for the sample covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CoMomentState {
    pub n: u64,
    pub mu_x: Vec<f64>,
    pub c_xx: Mat,
    pub mu_r: f64,
    pub m2_r: f64,
    pub c_xr: Vec<f64>,
}

/// Ridge model in standardized space plus its parameter covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub p: Mat,
    pub lambda: f64,
}

impl CoMomentState {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mu_x: vec![0.0; dim],
            c_xx: Mat::zeros(dim),
            mu_r: 0.0,
            m2_r: 0.0,
            c_xr: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mu_x.len()
    }

    /// Observations required before the linear model is trusted: enough for
    /// a solvable system plus defined variance estimates.
    pub fn n_min(&self) -> u64 {
        self.dim() as u64 + 2
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// One-pass update of every mean and co-moment.
    ///
    /// All cross-deviation terms use deviations from the *old* means with
    /// the n/n′ correction factor; for the scalar reward this is identical
    /// to Welford's update.
    pub fn update(&mut self, x: &[f64], r: f64) -> Result<()> {
        self.check_dim(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        if !r.is_finite() {
            return Err(Error::NonFiniteReward(r));
        }
        let n_old = self.n as f64;
        self.n += 1;
        let n_new = self.n as f64;
        let scale = n_old / n_new;

        let dx: Vec<f64> = x.iter().zip(&self.mu_x).map(|(xi, mi)| xi - mi).collect();
        let dr = r - self.mu_r;

        let d = self.dim();
        for a in 0..d {
            for b in a..d {
                let v = dx[a] * dx[b] * scale;
                *self.c_xx.at_mut(a, b) += v;
                if a != b {
                    *self.c_xx.at_mut(b, a) += v;
                }
            }
            self.c_xr[a] += dx[a] * dr * scale;
        }
        self.m2_r += dr * dr * scale;

        for (mi, dxi) in self.mu_x.iter_mut().zip(&dx) {
            *mi += dxi / n_new;
        }
        self.mu_r += dr / n_new;
        self.clamp_diagonals();
        Ok(())
    }

    /// Parallel merge; exact identity when either side is empty.
    pub fn merge(&mut self, other: &CoMomentState) -> Result<()> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        if other.n == 0 {
            return Ok(());
        }
        if self.n == 0 {
            *self = other.clone();
            return Ok(());
        }
        let na = self.n as f64;
        let nb = other.n as f64;
        let n = na + nb;
        let w = na * nb / n;

        let dx: Vec<f64> = other
            .mu_x
            .iter()
            .zip(&self.mu_x)
            .map(|(b, a)| b - a)
            .collect();
        let dr = other.mu_r - self.mu_r;

        let d = self.dim();
        for a in 0..d {
            for b in 0..d {
                *self.c_xx.at_mut(a, b) += other.c_xx.at(a, b) + dx[a] * dx[b] * w;
            }
            self.c_xr[a] += other.c_xr[a] + dx[a] * dr * w;
            self.mu_x[a] += dx[a] * nb / n;
        }
        self.m2_r += other.m2_r + dr * dr * w;
        self.mu_r += dr * nb / n;
        self.n += other.n;
        self.clamp_diagonals();
        Ok(())
    }

    /// Floating-point cancellation can push squared-deviation sums slightly
    /// negative; clamp so downstream square roots stay defined.
    fn clamp_diagonals(&mut self) {
        for i in 0..self.dim() {
            let v = self.c_xx.at(i, i);
            if v < 0.0 {
                *self.c_xx.at_mut(i, i) = 0.0;
            }
        }
        if self.m2_r < 0.0 {
            self.m2_r = 0.0;
        }
    }

    /// Per-feature sample standard deviations (0 for constant columns).
    fn feature_sds(&self) -> Vec<f64> {
        let denom = (self.n - 1) as f64;
        (0..self.dim())
            .map(|i| (self.c_xx.at(i, i) / denom).sqrt())
            .collect()
    }

    /// Reward sample standard deviation.
    pub fn reward_sd(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2_r / (self.n - 1) as f64).sqrt()
        }
    }

    /// Centers and scales `x` by this state's feature moments. Components
    /// with zero variance standardize to 0 — a constant feature carries no
    /// signal and must not blow up the division.
    pub fn standardize(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        if self.n < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: self.n,
            });
        }
        let sds = self.feature_sds();
        Ok(x.iter()
            .zip(&self.mu_x)
            .zip(&sds)
            .map(|((xi, mi), sd)| if *sd > 0.0 { (xi - mi) / sd } else { 0.0 })
            .collect())
    }

    /// Correlation matrix of the features, with zero-variance features
    /// contributing zero off-diagonal correlation and unit diagonal.
    fn correlation_matrix(&self) -> Mat {
        let d = self.dim();
        let mut r = Mat::identity(d);
        for a in 0..d {
            for b in 0..d {
                if a == b {
                    continue;
                }
                let denom = (self.c_xx.at(a, a) * self.c_xx.at(b, b)).sqrt();
                let v = if denom > 0.0 {
                    (self.c_xx.at(a, b) / denom).clamp(-1.0, 1.0)
                } else {
                    0.0
                };
                *r.at_mut(a, b) = v;
            }
        }
        r
    }

    /// Feature-reward correlation vector (zero where either side is flat).
    fn reward_correlations(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let denom = (self.c_xx.at(i, i) * self.m2_r).sqrt();
                if denom > 0.0 {
                    (self.c_xr[i] / denom).clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Ridge fit in standardized space.
    ///
    /// The standardized Gram matrix is n·R_xx and the moment vector n·r_xr,
    /// so `w = (n·R_xx + λI)⁻¹ · n·r_xr`. The parameter covariance is kept
    /// as `P = (R_xx + (λ/n)I)⁻¹`, so that P/n equals `(n·R_xx + λI)⁻¹` —
    /// the form the sampler divides by n.
    pub fn fit_model(&self, lambda: f64) -> Result<LinearModel> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and > 0, got {lambda}"
            )));
        }
        if self.n < self.n_min() {
            return Err(Error::InsufficientData {
                needed: self.n_min(),
                got: self.n,
            });
        }
        let n = self.n as f64;
        let r_xx = self.correlation_matrix();
        let r_xr = self.reward_correlations();

        let mut gram = r_xx.clone();
        for v in gram.data.iter_mut() {
            *v *= n;
        }
        gram.add_diag(lambda);
        let moment: Vec<f64> = r_xr.iter().map(|v| v * n).collect();
        let l = cholesky_jittered(&gram).map_err(|_| Error::SingularSystem)?;
        let w = l.solve_with_factor(&moment);

        let mut prec = r_xx;
        prec.add_diag(lambda / n);
        let p = {
            let l = cholesky_jittered(&prec).map_err(|_| Error::SingularSystem)?;
            // Invert via the factor column by column.
            let d = self.dim();
            let mut inv = Mat::zeros(d);
            let mut e = vec![0.0; d];
            for c in 0..d {
                e[c] = 1.0;
                let col = l.solve_with_factor(&e);
                e[c] = 0.0;
                for r in 0..d {
                    *inv.at_mut(r, c) = col[r];
                }
            }
            for r in 0..d {
                for c in 0..r {
                    let v = 0.5 * (inv.at(r, c) + inv.at(c, r));
                    *inv.at_mut(r, c) = v;
                    *inv.at_mut(c, r) = v;
                }
            }
            inv
        };

        Ok(LinearModel { w, p, lambda })
    }

    /// Thompson draw of the expected reward at context `x`.
    ///
    /// Draws model parameters from Normal(w, P/n), scores the standardized
    /// context, and maps the prediction back to raw reward units.
    pub fn sample_expected_reward<R: Rng + ?Sized>(
        &self,
        model: &LinearModel,
        x: &[f64],
        rng: &mut R,
    ) -> Result<PosteriorSample> {
        self.check_dim(x)?;
        if self.n < self.n_min() {
            return Ok(PosteriorSample::Explore);
        }
        let d = self.dim();
        let mut cov = model.p.clone();
        for v in cov.data.iter_mut() {
            *v /= self.n as f64;
        }
        let l = cholesky_jittered(&cov)?;
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        // w̃ = w + L·z
        let mut w_tilde = model.w.clone();
        for r in 0..d {
            for c in 0..=r {
                w_tilde[r] += l.at(r, c) * z[c];
            }
        }
        let x_std = self.standardize(x)?;
        let y_std: f64 = w_tilde.iter().zip(&x_std).map(|(w, x)| w * x).sum();
        Ok(PosteriorSample::Value(y_std * self.reward_sd() + self.mu_r))
    }
}

/// Merge as a pure function.
pub fn merged(a: &CoMomentState, b: &CoMomentState) -> Result<CoMomentState> {
    let mut out = a.clone();
    out.merge(b)?;
    Ok(out)
}

/// Contextual arm choice: under-observed arms drawn uniformly first,
/// otherwise argmax of sampled expected rewards (lowest index on ties).
pub fn ctx_choose<R: Rng + ?Sized>(
    arms: &[CoMomentState],
    x: &[f64],
    lambda: f64,
    rng: &mut R,
) -> Result<usize> {
    if arms.is_empty() {
        return Err(Error::EmptyChoices);
    }
    for arm in arms {
        arm.check_dim(x)?;
    }
    let under: Vec<usize> = (0..arms.len())
        .filter(|&i| arms[i].n < arms[i].n_min())
        .collect();
    if !under.is_empty() {
        return Ok(under[rng.random_range(0..under.len())]);
    }
    let mut best = 0usize;
    let mut best_sample = {
        let model = arms[0].fit_model(lambda)?;
        arms[0].sample_expected_reward(&model, x, rng)?
    };
    for (i, arm) in arms.iter().enumerate().skip(1) {
        let model = arm.fit_model(lambda)?;
        let sample = arm.sample_expected_reward(&model, x, rng)?;
        if sample.beats(&best_sample) {
            best = i;
            best_sample = sample;
        }
    }
    Ok(best)
}
