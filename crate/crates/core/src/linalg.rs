//! Minimal dense linear algebra for small symmetric systems.
//!
//! Feature dimensions here are single digits, so a hand-rolled Cholesky on a
//! row-major `Vec<f64>` beats pulling in a full linear-algebra stack. Only
//! what the contextual model needs: factor, solve, and SPD inverse.

use crate::error::{Error, Result};

/// Square row-major matrix of fixed small dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.dim + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.dim + c]
    }

    /// Adds `v` to every diagonal entry.
    pub fn add_diag(&mut self, v: f64) {
        for i in 0..self.dim {
            self.data[i * self.dim + i] += v;
        }
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for r in 0..self.dim {
            let row = &self.data[r * self.dim..(r + 1) * self.dim];
            y[r] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        y
    }

    /// Lower-triangular Cholesky factor L with A = L·Lᵀ. Fails on a
    /// non-positive pivot; caller decides whether to jitter and retry.
    pub fn cholesky(&self) -> Result<Mat> {
        let d = self.dim;
        let mut l = Mat::zeros(d);
        for i in 0..d {
            for j in 0..=i {
                let mut s = self.at(i, j);
                for k in 0..j {
                    s -= l.at(i, k) * l.at(j, k);
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite);
                    }
                    *l.at_mut(i, j) = s.sqrt();
                } else {
                    *l.at_mut(i, j) = s / l.at(j, j);
                }
            }
        }
        Ok(l)
    }

    /// Solves A·x = b for symmetric positive-definite A via Cholesky.
    pub fn solve_spd(&self, b: &[f64]) -> Result<Vec<f64>> {
        let l = self.cholesky()?;
        Ok(l.solve_with_factor(b))
    }

    /// Forward/back substitution given `self` is the lower Cholesky factor.
    pub fn solve_with_factor(&self, b: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut s = b[i];
            for k in 0..i {
                s -= self.at(i, k) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in i + 1..d {
                s -= self.at(k, i) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
        x
    }

    /// Inverse of a symmetric positive-definite matrix, column by column.
    pub fn inverse_spd(&self) -> Result<Mat> {
        let d = self.dim;
        let l = self.cholesky()?;
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
        // Symmetrize to wash out substitution round-off.
        for r in 0..d {
            for c in 0..r {
                let v = 0.5 * (inv.at(r, c) + inv.at(c, r));
                *inv.at_mut(r, c) = v;
                *inv.at_mut(c, r) = v;
            }
        }
        Ok(inv)
    }
}
