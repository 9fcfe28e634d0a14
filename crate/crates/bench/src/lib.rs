//! Inputs shared by the benchmarks.

use nibr_core::{DMatrix, DVector, Dataset};

/// Polynomial design `[1, x, x², …]` of `k` columns on `n` points in
/// `[0, 1]`, with a deterministic wiggle as noise.
pub fn synthetic(n: usize, k: usize) -> Dataset {
    let x = |i: usize| i as f64 / (n - 1).max(1) as f64;
    let design = DMatrix::from_fn(n, k, |i, j| x(i).powi(j as i32));
    let response = DVector::from_fn(n, |i, _| 0.3 + 2.0 * x(i) + 0.1 * (7.3 * i as f64).sin());
    Dataset::new(design, response).expect("valid synthetic dataset")
}
