//! Shared helpers for the integration suites: a dense linear-algebra oracle
//! that stays independent of the library's Cholesky path, and dataset
//! discovery for the data-gated benchmark criteria.

#![allow(dead_code)]

use std::path::PathBuf;

use mlinucb::{load_csv, BanditDataset, DatasetSpec};

/// Solve `a x = b` (row-major d x d) by Gaussian elimination with partial
/// pivoting. Independent oracle for the Cholesky-based solver.
pub fn dense_solve(a: &[f64], d: usize, b: &[f64]) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..d {
        let pivot_row = (col..d)
            .max_by(|&r, &s| {
                m[r * d + col]
                    .abs()
                    .partial_cmp(&m[s * d + col].abs())
                    .unwrap()
            })
            .unwrap();
        if pivot_row != col {
            for j in 0..d {
                m.swap(col * d + j, pivot_row * d + j);
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = m[col * d + col];
        for row in col + 1..d {
            let factor = m[row * d + col] / pivot;
            for j in col..d {
                m[row * d + j] -= factor * m[col * d + j];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; d];
    for row in (0..d).rev() {
        let mut s = rhs[row];
        for j in row + 1..d {
            s -= m[row * d + j] * x[j];
        }
        x[row] = s / m[row * d + row];
    }
    x
}

/// log det of a positive-definite matrix via the pivots of an LU
/// elimination (partial pivoting; sign tracked and asserted positive).
pub fn dense_logdet(a: &[f64], d: usize) -> f64 {
    let mut m = a.to_vec();
    let mut sign = 1.0f64;
    let mut logdet = 0.0;
    for col in 0..d {
        let pivot_row = (col..d)
            .max_by(|&r, &s| {
                m[r * d + col]
                    .abs()
                    .partial_cmp(&m[s * d + col].abs())
                    .unwrap()
            })
            .unwrap();
        if pivot_row != col {
            for j in 0..d {
                m.swap(col * d + j, pivot_row * d + j);
            }
            sign = -sign;
        }
        let pivot = m[col * d + col];
        sign *= pivot.signum();
        logdet += pivot.abs().ln();
        for row in col + 1..d {
            let factor = m[row * d + col] / pivot;
            for j in col..d {
                m[row * d + j] -= factor * m[col * d + j];
            }
        }
    }
    assert!(sign > 0.0, "oracle determinant must be positive for SPD input");
    logdet
}

pub fn dense_quad_form(a: &[f64], d: usize, x: &[f64]) -> f64 {
    dense_solve(a, d, x)
        .iter()
        .zip(x.iter())
        .map(|(u, v)| u * v)
        .sum()
}

/// Data directory: `$MLINUCB_DATA_DIR` or `<workspace>/data`.
pub fn data_dir() -> PathBuf {
    if let Ok(dir) = std::env::var("MLINUCB_DATA_DIR") {
        return PathBuf::from(dir);
    }
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join("data")
}

/// Load a benchmark dataset if its file is present; `None` (with a notice)
/// otherwise so the criterion can report itself as skipped.
pub fn dataset_if_present(name: &str) -> Option<BanditDataset> {
    let spec = DatasetSpec::preset(name, &data_dir()).expect("known preset");
    if !spec.path.exists() {
        return None;
    }
    Some(load_csv(&spec).expect("present dataset must parse"))
}

pub fn skip_line(criterion: &str, dataset: &str) {
    println!(
        "acceptance {criterion}: SKIPPED (dataset '{dataset}' not present under {}; see `mlinucb fetch-instructions` or scripts/fetch_data.sh)",
        data_dir().display()
    );
}
