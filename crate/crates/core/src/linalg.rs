//! Incrementally updatable symmetric positive-definite matrices.
//!
//! Every per-arm design matrix has the form `A = I + sum x x^T`, so it stays
//! SPD with eigenvalues >= 1. We keep the lower Cholesky factor `L` and apply
//! rank-1 updates in O(d^2), which also gives `log det A = 2 sum log L_ii`
//! for free. The accumulated dense `A` is kept alongside the factor and used
//! to refactorize periodically, bounding drift on long runs.

use crate::error::{Error, Result};

/// Rank-1 updates between full refactorizations of the Cholesky factor.
const REFACTOR_INTERVAL: u32 = 1000;

/// SPD matrix state: accumulated `A`, its lower Cholesky factor, and a cached
/// log-determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdState {
    dim: usize,
    /// Dense accumulated A, row-major d x d.
    a: Vec<f64>,
    /// Lower-triangular Cholesky factor of A, row-major d x d (upper part zero).
    chol: Vec<f64>,
    logdet: f64,
    updates_since_refactor: u32,
}

impl SpdState {
    /// The d x d identity. `log det = 0`.
    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension);
        }
        let mut a = vec![0.0; dim * dim];
        let mut chol = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = 1.0;
            chol[i * dim + i] = 1.0;
        }
        Ok(Self {
            dim,
            a,
            chol,
            logdet: 0.0,
            updates_since_refactor: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `log det A`, cached. Nonnegative for any `I + sum x x^T`.
    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// `A <- A + x x^T`, updating the factor in O(d^2).
    #[allow(clippy::needless_range_loop)] // indexed form mirrors the factor update recurrence
    pub fn rank1_update(&mut self, x: &[f64]) -> Result<()> {
        self.check_len(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "rank-1 update vector",
            });
        }
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                self.a[i * d + j] += x[i] * x[j];
            }
        }

        // In-place rank-1 Cholesky update (update-only variant; A + x x^T
        // stays SPD so no downdate branch is needed).
        let mut w = x.to_vec();
        let mut b = 1.0;
        for j in 0..d {
            let ljj = self.chol[j * d + j];
            let ljj2 = ljj * ljj;
            let wj = w[j];
            let wj2 = wj * wj;
            let nljj = (ljj2 + wj2 / b).sqrt();
            let gamma = ljj2 * b + wj2;
            for k in j + 1..d {
                let lkj = self.chol[k * d + j];
                let wk = w[k] - wj * lkj / ljj;
                self.chol[k * d + j] = nljj * (lkj / ljj + wj * wk / gamma);
                w[k] = wk;
            }
            b += wj2 / ljj2;
            self.chol[j * d + j] = nljj;
        }

        self.updates_since_refactor += 1;
        if self.updates_since_refactor >= REFACTOR_INTERVAL {
            self.refactorize()?;
        } else {
            self.refresh_logdet();
        }
        Ok(())
    }

    /// Solve `A z = v` via forward/backward substitution.
    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let y = self.forward_sub(v);
        Ok(self.backward_sub(&y))
    }

    /// `x^T A^{-1} x`, computed as `||L^{-1} x||^2` (one forward solve).
    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        let y = self.forward_sub(x);
        Ok(y.iter().map(|v| v * v).sum())
    }

    /// Reconstruct the dense matrix `L L^T` (test/diagnostic use).
    pub fn to_dense(&self) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..=i.min(j) {
                    s += self.chol[i * d + k] * self.chol[j * d + k];
                }
                out[i * d + j] = s;
            }
        }
        out
    }

    /// The exactly accumulated `A` (row-major).
    pub fn accumulated(&self) -> &[f64] {
        &self.a
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    fn forward_sub(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut y = vec![0.0; d];
        for i in 0..d {
            let row = &self.chol[i * d..i * d + i];
            let mut s = v[i];
            for (j, lij) in row.iter().enumerate() {
                s -= lij * y[j];
            }
            y[i] = s / self.chol[i * d + i];
        }
        y
    }

    fn backward_sub(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut z = vec![0.0; d];
        for i in (0..d).rev() {
            let mut s = y[i];
            for (j, zj) in z.iter().enumerate().skip(i + 1) {
                s -= self.chol[j * d + i] * zj;
            }
            z[i] = s / self.chol[i * d + i];
        }
        z
    }

    fn refresh_logdet(&mut self) {
        let d = self.dim;
        self.logdet = 2.0 * (0..d).map(|i| self.chol[i * d + i].ln()).sum::<f64>();
    }

    fn refactorize(&mut self) -> Result<()> {
        self.chol = cholesky_decompose(&self.a, self.dim)?;
        self.updates_since_refactor = 0;
        self.refresh_logdet();
        Ok(())
    }
}

/// Dense Cholesky factorization of a row-major SPD matrix. O(d^3).
fn cholesky_decompose(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::NotPositiveDefinite);
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Ok(l)
}
