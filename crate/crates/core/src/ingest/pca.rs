//! Top-2 principal components of the context matrix, for the variance
//! diagnostic and visualization export.
//!
//! The covariance matrix is never materialized: orthogonal iteration runs
//! against `C v = X_c^T (X_c v) / (T - 1)` as two passes over the data, so
//! memory stays O(T d) even for the widest datasets. Eigenvalues are the
//! Rayleigh quotients of the converged Ritz vectors, which makes the
//! reported pair identical (up to rounding) to the variance of the emitted
//! 2D projection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::environment::BanditDataset;
use crate::error::{Error, Result};

/// Fixed seed for the iteration's starting block; results are deterministic.
const START_SEED: u64 = 0x5ca1_ab1e;
const MAX_ITERS: usize = 500;
const REL_TOL: f64 = 1e-12;

/// Result of the 2-component PCA.
#[derive(Debug, Clone)]
pub struct Pca2 {
    /// (lambda1 + lambda2) / total variance, in [0, 1].
    pub explained_fraction: f64,
    /// Variances along the first and second principal directions.
    pub eigenvalues: [f64; 2],
    /// T x 2 projection of the centered contexts.
    pub coords: Vec<[f64; 2]>,
}

/// Center the contexts, compute the top-2 principal components, and return
/// the explained-variance fraction plus the 2D projection.
///
/// Sign convention: each component's first nonzero loading is positive.
/// Zero-variance data is reported as fraction 1.0.
pub fn pca2_variance(ds: &BanditDataset) -> Result<Pca2> {
    let t = ds.rows();
    let d = ds.dim();
    if t < 3 {
        return Err(Error::InvalidConfig(format!(
            "pca needs at least 3 rows, got {}",
            t
        )));
    }

    let mut mean = vec![0.0; d];
    for i in 0..t {
        for (m, &v) in mean.iter_mut().zip(ds.context(i).iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= t as f64;
    }

    let denom = (t - 1) as f64;
    let mut total_var = 0.0;
    let mut raw_sq = 0.0;
    for i in 0..t {
        for (&v, &m) in ds.context(i).iter().zip(mean.iter()) {
            total_var += (v - m) * (v - m);
            raw_sq += v * v;
        }
    }
    total_var /= denom;

    if total_var <= 1e-24 * (1.0 + raw_sq) {
        log::warn!("{}: zero-variance contexts; pca fraction defined as 1.0", ds.name());
        return Ok(Pca2 {
            explained_fraction: 1.0,
            eigenvalues: [0.0, 0.0],
            coords: vec![[0.0, 0.0]; t],
        });
    }

    let ncomp = d.min(2);
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut q: Vec<Vec<f64>> = (0..ncomp)
        .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    orthonormalize(&mut q, &mut rng);

    let mut prev = vec![f64::INFINITY; ncomp];
    for _ in 0..MAX_ITERS {
        let z: Vec<Vec<f64>> = q.iter().map(|v| apply_cov(ds, &mean, v, denom)).collect();
        let mut ritz: Vec<f64> = (0..ncomp).map(|i| dot(&q[i], &z[i])).collect();
        ritz.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let converged = ritz
            .iter()
            .zip(prev.iter())
            .all(|(cur, old)| (cur - old).abs() <= REL_TOL * ritz[0].abs().max(1e-300));
        q = z;
        orthonormalize(&mut q, &mut rng);
        if converged {
            break;
        }
        prev = ritz;
    }

    // Rayleigh-Ritz on the converged block: rotate Q by the eigenvectors of
    // the projected 2x2 matrix to get the principal directions.
    let z: Vec<Vec<f64>> = q.iter().map(|v| apply_cov(ds, &mean, v, denom)).collect();
    let (mut components, mut eigenvalues) = if ncomp == 2 {
        let a = dot(&q[0], &z[0]);
        let b = 0.5 * (dot(&q[0], &z[1]) + dot(&q[1], &z[0]));
        let c = dot(&q[1], &z[1]);
        let (l1, l2, v1, v2) = sym22_eig(a, b, c);
        let comp1: Vec<f64> = (0..d).map(|i| v1.0 * q[0][i] + v1.1 * q[1][i]).collect();
        let comp2: Vec<f64> = (0..d).map(|i| v2.0 * q[0][i] + v2.1 * q[1][i]).collect();
        (vec![comp1, comp2], [l1, l2])
    } else {
        let l1 = dot(&q[0], &z[0]);
        (vec![q[0].clone()], [l1, 0.0])
    };

    for comp in &mut components {
        if let Some(first) = comp.iter().find(|v| **v != 0.0) {
            if *first < 0.0 {
                comp.iter_mut().for_each(|v| *v = -*v);
            }
        }
    }

    for l in &mut eigenvalues {
        *l = l.max(0.0);
    }

    let coords: Vec<[f64; 2]> = (0..t)
        .map(|i| {
            let x = ds.context(i);
            let p1: f64 = x
                .iter()
                .zip(mean.iter())
                .zip(components[0].iter())
                .map(|((&v, &m), &c)| (v - m) * c)
                .sum();
            let p2: f64 = if components.len() == 2 {
                x.iter()
                    .zip(mean.iter())
                    .zip(components[1].iter())
                    .map(|((&v, &m), &c)| (v - m) * c)
                    .sum()
            } else {
                0.0
            };
            [p1, p2]
        })
        .collect();

    let explained = ((eigenvalues[0] + eigenvalues[1]) / total_var).clamp(0.0, 1.0);
    Ok(Pca2 {
        explained_fraction: explained,
        eigenvalues,
        coords,
    })
}

/// `X_c^T (X_c v) / denom` in two passes over the flat context matrix.
fn apply_cov(ds: &BanditDataset, mean: &[f64], v: &[f64], denom: f64) -> Vec<f64> {
    let t = ds.rows();
    let d = ds.dim();
    let mv = dot(mean, v);
    let mut u = vec![0.0; t];
    for (i, ui) in u.iter_mut().enumerate() {
        *ui = dot(ds.context(i), v) - mv;
    }
    let usum: f64 = u.iter().sum();
    let mut w = vec![0.0; d];
    for (i, &ui) in u.iter().enumerate() {
        for (wj, &xj) in w.iter_mut().zip(ds.context(i).iter()) {
            *wj += xj * ui;
        }
    }
    for (wj, &mj) in w.iter_mut().zip(mean.iter()) {
        *wj = (*wj - mj * usum) / denom;
    }
    w
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Modified Gram-Schmidt; a collapsing column is replaced with a fresh
/// random direction (happens when the data is exactly low-rank).
fn orthonormalize(q: &mut [Vec<f64>], rng: &mut ChaCha8Rng) {
    let n = q.len();
    for i in 0..n {
        loop {
            let (head, tail) = q.split_at_mut(i);
            let qi = &mut tail[0];
            for prev in head.iter() {
                let proj = dot(prev, qi);
                for (a, &b) in qi.iter_mut().zip(prev.iter()) {
                    *a -= proj * b;
                }
            }
            let norm = dot(qi, qi).sqrt();
            if norm > 1e-14 {
                qi.iter_mut().for_each(|v| *v /= norm);
                break;
            }
            for v in qi.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
        }
    }
}

/// Eigen-decomposition of `[[a, b], [b, c]]`: returns (l1 >= l2, v1, v2)
/// with unit eigenvectors.
fn sym22_eig(a: f64, b: f64, c: f64) -> (f64, f64, (f64, f64), (f64, f64)) {
    let tr_half = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let l1 = tr_half + disc;
    let l2 = tr_half - disc;
    // eigenvector for l1
    let v1 = if b.abs() > 1e-300 {
        normalize2((l1 - c, b))
    } else if a >= c {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let v2 = (-v1.1, v1.0); // perpendicular
    (l1, l2, v1, v2)
}

fn normalize2((x, y): (f64, f64)) -> (f64, f64) {
    let n = (x * x + y * y).sqrt();
    if n > 0.0 {
        (x / n, y / n)
    } else {
        (1.0, 0.0)
    }
}
