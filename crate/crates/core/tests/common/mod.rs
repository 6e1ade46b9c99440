#![allow(dead_code)]

use nalgebra::DMatrix;
use sysid_core::lti::markov_parameters;
use sysid_core::StateSpaceModel;

pub fn assert_close(actual: f64, expected: f64, tol: f64) {
    assert!(
        (actual - expected).abs() <= tol,
        "{actual} differs from {expected} by more than {tol}"
    );
}

pub fn rel_err(actual: f64, expected: f64) -> f64 {
    (actual - expected).abs() / expected.abs().max(f64::MIN_POSITIVE)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `I + ε E` for a matrix `E` of entries in `[-1, 1]`, with `ε` small enough
/// that the result stays well conditioned.
pub fn near_identity(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let scale = 0.5 / n as f64;
    DMatrix::from_fn(n, n, |i, j| {
        let e = entries[(i * n + j) % entries.len()];
        if i == j {
            1.0 + scale * e
        } else {
            scale * e
        }
    })
}

/// Rotation by `theta` in the `(i, j)` plane.
pub fn givens(n: usize, i: usize, j: usize, theta: f64) -> DMatrix<f64> {
    let mut q = DMatrix::identity(n, n);
    let (s, c) = theta.sin_cos();
    q[(i, i)] = c;
    q[(j, j)] = c;
    q[(i, j)] = -s;
    q[(j, i)] = s;
    q
}

/// Largest deviation among the first `count` Markov parameters.
pub fn markov_gap(a: &StateSpaceModel, b: &StateSpaceModel, count: usize) -> f64 {
    markov_parameters(a, count)
        .iter()
        .zip(markov_parameters(b, count))
        .map(|(x, y)| max_abs(&(x - y)))
        .fold(0.0, f64::max)
}
