//! Transfer-function evaluation and the H∞ norm.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Hessenberg};
use num_complex::Complex64;

use super::StateSpaceModel;
use crate::error::{Result, SysIdError};

/// Default number of frequency samples on `[0, 2π)` for H∞ evaluation.
pub const DEFAULT_HINF_GRID: usize = 4096;

const MIN_HINF_GRID: usize = 64;
const GOLDEN_TOL: f64 = 1e-12;

fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `G(z) = C (zI − A)⁻¹ B`, by an LU solve of `(zI − A) X = B`.
pub fn transfer_function(model: &StateSpaceModel, z: Complex64) -> Result<DMatrix<Complex64>> {
    let n = model.n();
    let mut lhs = -complexify(model.a());
    for i in 0..n {
        lhs[(i, i)] += z;
    }
    let scale = lhs.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    let lu = lhs.lu();
    let u = lu.u();
    let min_pivot = (0..n).map(|i| u[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-13 * scale {
        return Err(SysIdError::Pole(z));
    }
    let x = lu
        .solve(&complexify(model.b()))
        .ok_or(SysIdError::Pole(z))?;
    Ok(complexify(model.c()) * x)
}

/// Repeated evaluation of `G(e^{jω})` in `O(n² m)` per frequency, using the
/// orthogonal Hessenberg form `A = Q H Qᵀ` computed once.
#[derive(Debug, Clone)]
pub struct FrequencyResponse {
    h: DMatrix<Complex64>,
    c: DMatrix<Complex64>,
    b: DMatrix<Complex64>,
}

impl FrequencyResponse {
    pub fn new(model: &StateSpaceModel) -> Self {
        let hess = Hessenberg::new(model.a().clone());
        let q = hess.q();
        let h = hess.h();
        Self {
            h: complexify(&h),
            c: complexify(&(model.c() * &q)),
            b: complexify(&(q.transpose() * model.b())),
        }
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// `G(z)`; fails when `z` is (numerically) a pole.
    pub fn eval(&self, z: Complex64) -> Result<DMatrix<Complex64>> {
        let n = self.h.nrows();
        let mut mat = -self.h.clone();
        for i in 0..n {
            mat[(i, i)] += z;
        }
        let mut rhs = self.b.clone();
        let scale = mat.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
        let tiny = 1e-13 * scale;

        // Gaussian elimination on an upper Hessenberg matrix: only the
        // sub-diagonal entry needs eliminating in each column.
        for k in 0..n.saturating_sub(1) {
            if mat[(k + 1, k)].norm() > mat[(k, k)].norm() {
                mat.swap_rows(k, k + 1);
                rhs.swap_rows(k, k + 1);
            }
            let pivot = mat[(k, k)];
            if pivot.norm() <= tiny {
                return Err(SysIdError::Pole(z));
            }
            let factor = mat[(k + 1, k)] / pivot;
            if factor != Complex64::new(0.0, 0.0) {
                for j in k..n {
                    let v = mat[(k, j)];
                    mat[(k + 1, j)] -= factor * v;
                }
                for j in 0..rhs.ncols() {
                    let v = rhs[(k, j)];
                    rhs[(k + 1, j)] -= factor * v;
                }
            }
        }
        for i in (0..n).rev() {
            let pivot = mat[(i, i)];
            if pivot.norm() <= tiny {
                return Err(SysIdError::Pole(z));
            }
            for j in 0..rhs.ncols() {
                let mut acc = rhs[(i, j)];
                for l in i + 1..n {
                    acc -= mat[(i, l)] * rhs[(l, j)];
                }
                rhs[(i, j)] = acc / pivot;
            }
        }
        Ok(&self.c * rhs)
    }

    /// `G(e^{jω})`.
    pub fn at_frequency(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        self.eval(Complex64::from_polar(1.0, omega))
    }
}

/// Largest singular value of a complex matrix.
pub fn complex_sigma_max(g: &DMatrix<Complex64>) -> f64 {
    if g.nrows() == 1 && g.ncols() == 1 {
        return g[(0, 0)].norm();
    }
    g.singular_values().max()
}

/// Maximizes a frequency gain over a uniform grid on `[0, 2π)` and then
/// refines around the best grid point by golden-section search.
///
/// Real systems satisfy `G(e^{−jω}) = conj G(e^{jω})`, so only grid points in
/// `[0, π]` are evaluated.
pub fn maximize_gain<F>(grid_points: usize, gain: F) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    if grid_points < MIN_HINF_GRID {
        return Err(SysIdError::InvalidArgument(format!(
            "frequency grid needs at least {MIN_HINF_GRID} points, got {grid_points}"
        )));
    }
    let step = 2.0 * PI / grid_points as f64;
    let half = grid_points / 2;
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..=half {
        let omega = step * i as f64;
        let g = gain(omega)?;
        if g > best.1 {
            best = (omega, g);
        }
    }

    let (mut lo, mut hi) = (best.0 - step, best.0 + step);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = gain(x1)?;
    let mut f2 = gain(x2)?;
    while hi - lo > GOLDEN_TOL {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = gain(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = gain(x1)?;
        }
    }
    for (omega, g) in [(x1, f1), (x2, f2)] {
        if g > best.1 {
            best = (omega, g);
        }
    }
    Ok(best)
}

/// H∞ norm `sup_ω σ_max(G(e^{jω}))`, evaluated from below on a grid of
/// `grid_points` frequencies with local refinement.
pub fn hinf_norm(model: &StateSpaceModel, grid_points: usize) -> Result<f64> {
    model.ensure_stable()?;
    let fr = FrequencyResponse::new(model);
    let (_, value) = maximize_gain(grid_points, |w| Ok(complex_sigma_max(&fr.at_frequency(w)?)))?;
    Ok(value)
}

/// `sup_ω σ_max(G_a(e^{jω}) − G_b(e^{jω}))` for two stable models of equal
/// input/output dimensions (state dimensions may differ).
pub fn hinf_distance(a: &StateSpaceModel, b: &StateSpaceModel, grid_points: usize) -> Result<f64> {
    if a.p() != b.p() || a.m() != b.m() {
        return Err(SysIdError::Dimension(format!(
            "transfer functions of size {}x{} and {}x{} cannot be compared",
            a.p(),
            a.m(),
            b.p(),
            b.m()
        )));
    }
    a.ensure_stable()?;
    b.ensure_stable()?;
    let fa = FrequencyResponse::new(a);
    let fb = FrequencyResponse::new(b);
    let (_, value) = maximize_gain(grid_points, |w| {
        let diff = fa.at_frequency(w)? - fb.at_frequency(w)?;
        Ok(complex_sigma_max(&diff))
    })?;
    Ok(value)
}
