//! Dense linear algebra, softmax, cosine similarity, seeded initialization
//! and the text matrix format shared by the rest of the crate.

mod io;
mod matrix;
mod rng;

pub use io::{format_matrix, parse_matrix, read_matrix, write_matrix};
pub use matrix::{matmul, Matrix};
pub use rng::{init_matrix, Rng};

use crate::error::{Error, Result};

/// Norms below this are treated as zero by [`cosine`].
pub const COSINE_NORM_FLOOR: f64 = 1e-12;

/// Row-wise softmax with per-row max subtraction.
///
/// Rows may contain `-inf` (masked entries), which map to exactly `0.0`.
/// A row that is entirely `-inf` is an error, as is any NaN or `+inf`.
pub fn softmax_rows(m: &Matrix) -> Result<Matrix> {
    let mut out = m.clone();
    for r in 0..m.rows() {
        let row = out.row_mut(r);
        if let Some(c) = row.iter().position(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(Error::NonFinite { row: r, col: c });
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::FullyMaskedRow { row: r });
        }
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = if *x == f64::NEG_INFINITY {
                0.0
            } else {
                (*x - max).exp()
            };
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    Ok(out)
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Cosine similarity; `0.0` when either vector has (near) zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Length {
            op: "cosine",
            left: u.len(),
            right: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu < COSINE_NORM_FLOOR || nv < COSINE_NORM_FLOOR {
        return Ok(0.0);
    }
    Ok(dot(u, v) / (nu * nv))
}
