//! Singular-value gaps, Toeplitz operator norms and truncation horizons.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::blocks::{markov_parameters, noise_markov_parameters};
use super::StateSpaceModel;
use crate::error::{Result, SysIdError};

/// Default tail tolerance for truncating infinite Hankel/Toeplitz operators.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

/// Lower limit on the Toeplitz section size used for operator norms. Finite
/// sections of a Toeplitz operator approach its norm only as `O(1/D²)`, far
/// slower than the Markov tail decays.
pub const MIN_TOEPLITZ_HORIZON: usize = 768;

const MAX_HORIZON: usize = 1 << 20;
const EQUAL_REL_TOL: f64 = 1e-9;

/// Normalized singular-value gap `Δ₊ = min (1 − σᵢ₊₁/σᵢ)` over neighbours with
/// `σᵢ ≠ σᵢ₊₁`, taking `σₙ₊₁ = 0`. Values below `floor` count as zero.
pub fn delta_plus(sigmas: &[f64], floor: f64) -> Result<f64> {
    if sigmas.is_empty() {
        return Err(SysIdError::InvalidArgument(
            "delta_plus needs at least one singular value".into(),
        ));
    }
    let floored: Vec<f64> = sigmas
        .iter()
        .map(|&s| if s < floor { 0.0 } else { s })
        .collect();
    let mut best: f64 = 1.0;
    for i in 0..floored.len() {
        let s = floored[i];
        let next = floored.get(i + 1).copied().unwrap_or(0.0);
        if s <= 0.0 || (s - next).abs() <= EQUAL_REL_TOL * s {
            continue;
        }
        best = best.min(1.0 - next / s);
    }
    Ok(best.clamp(0.0, 1.0))
}

/// Horizon `D` at which the Markov tail bound `M̃ ρ̃^D / (1 − ρ̃)` drops below
/// `tol`, with `ρ̃ = ρ + (1 − ρ)/4` and `M̃ = sup_j ‖K_j‖ / ρ̃^j` estimated over
/// both the input and the noise kernels.
pub fn tail_horizon(model: &StateSpaceModel, tol: f64) -> Result<usize> {
    let rho = model.ensure_stable()?;
    let rt = rho + (1.0 - rho) / 4.0;
    let ln_rt = rt.ln();
    let ln_tail = |ln_m: f64, d: usize| ln_m + d as f64 * ln_rt - (1.0 - rt).ln();
    let ln_tol = tol.ln();

    let b = model.b();
    let mut ca = model.c().clone();
    let mut ln_m = f64::NEG_INFINITY;
    for d in 0..MAX_HORIZON {
        let k_in = crate::linalg::spectral_norm(&(&ca * b));
        let k_noise = crate::linalg::spectral_norm(&ca);
        let k = k_in.max(k_noise);
        if k > 0.0 {
            ln_m = ln_m.max(k.ln() - d as f64 * ln_rt);
        }
        if d >= model.n() && (ln_m == f64::NEG_INFINITY || ln_tail(ln_m, d + 1) <= ln_tol) {
            return Ok(d + 1);
        }
        ca = &ca * model.a();
    }
    Err(SysIdError::Numerical(format!(
        "tail bound did not reach {tol:e} within {MAX_HORIZON} lags"
    )))
}

/// Section size for [`noise_to_signal`]: the tail horizon, but never below
/// [`MIN_TOEPLITZ_HORIZON`].
pub fn toeplitz_horizon(model: &StateSpaceModel) -> Result<usize> {
    Ok(tail_horizon(model, DEFAULT_TAIL_TOL)?.max(MIN_TOEPLITZ_HORIZON))
}

/// Norms of the input and process-noise Toeplitz operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseToSignal {
    /// `‖T_{0,D}‖₂`, which approaches `‖M‖∞`.
    pub beta: f64,
    /// `‖TO_{0,D}‖₂`.
    pub noise_gain: f64,
    /// `noise_gain / beta`.
    pub r: f64,
}

/// Spectral norm of the block lower-triangular Toeplitz section with blocks
/// `kernel[i − j − 1]`, via the eigenvalues of its row Gram matrix
/// `G_{i+1,j+1} = G_{ij} + K_i K_jᵀ`.
fn toeplitz_section_norm(kernel: &[DMatrix<f64>], horizon: usize) -> f64 {
    let p = kernel[0].nrows();
    let size = p * horizon;
    let mut gram = DMatrix::<f64>::zeros(size, size);
    for i in 0..horizon.saturating_sub(1) {
        for j in 0..=i {
            let prod = &kernel[i] * kernel[j].transpose();
            for bi in 0..p {
                for bj in 0..p {
                    let v = gram[(i * p + bi, j * p + bj)] + prod[(bi, bj)];
                    gram[((i + 1) * p + bi, (j + 1) * p + bj)] = v;
                }
            }
        }
    }
    for c in 0..size {
        for r in 0..c {
            gram[(r, c)] = gram[(c, r)];
        }
    }
    gram.symmetric_eigenvalues().max().max(0.0).sqrt()
}

/// `β = ‖T_{0,D}‖₂` and `R = ‖TO_{0,D}‖₂ / ‖T_{0,D}‖₂` on a `D = horizon`
/// block section.
pub fn noise_to_signal(model: &StateSpaceModel, horizon: usize) -> Result<NoiseToSignal> {
    model.ensure_stable()?;
    if horizon == 0 {
        return Err(SysIdError::InvalidArgument("horizon must be positive".into()));
    }
    let beta = toeplitz_section_norm(&markov_parameters(model, horizon), horizon);
    let noise_gain = toeplitz_section_norm(&noise_markov_parameters(model, horizon), horizon);
    if beta <= 0.0 {
        return Err(SysIdError::Numerical(
            "input-output map is identically zero".into(),
        ));
    }
    Ok(NoiseToSignal {
        beta,
        noise_gain,
        r: noise_gain / beta,
    })
}
