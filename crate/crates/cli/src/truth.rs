//! System-theoretic summary of a known model.

use anyhow::Result;
use serde::{Deserialize, Serialize};
use sysid_core::lti::{balanced_truncate, delta_plus, hankel_singular_values, hinf_distance, hinf_norm, MINIMALITY_TOL};
use sysid_core::pipeline::oracle_constants;
use sysid_core::StateSpaceModel;

/// Error of the order-`r` balanced truncation and its `2 Σ_{i>r} σᵢ` bound,
/// for `r` below the rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub r: usize,
    pub hinf_err: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthReport {
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub spectral_radius: f64,
    pub hankel_singular_values: Vec<f64>,
    /// Number of singular values above the minimality tolerance.
    pub rank: usize,
    pub delta_plus: f64,
    /// H∞ norm.
    pub beta: f64,
    pub r: f64,
    /// `β` and `R` as used for selection: Toeplitz-section values floored at 1.
    pub oracle_beta: f64,
    pub oracle_r: f64,
    pub oracle_horizon: usize,
    pub truncation: Vec<TruncationRow>,
}

pub fn truth_report(model: &StateSpaceModel, grid: usize) -> Result<TruthReport> {
    let spectral_radius = model.ensure_stable()?;
    let sigmas = hankel_singular_values(model)?;
    let floor = MINIMALITY_TOL * sigmas.first().copied().unwrap_or(0.0);
    let rank = sigmas.iter().filter(|&&s| s > floor).count();
    let oracle = oracle_constants(model)?;
    let mut truncation = Vec::new();
    for r in 1..rank {
        let reduced = balanced_truncate(model, r)?;
        truncation.push(TruncationRow {
            r,
            hinf_err: hinf_distance(model, &reduced, grid)?,
            bound: 2.0 * sigmas[r..].iter().sum::<f64>(),
        });
    }
    Ok(TruthReport {
        n: model.n(),
        p: model.p(),
        m: model.m(),
        spectral_radius,
        delta_plus: if rank > 0 { delta_plus(&sigmas, floor)? } else { 0.0 },
        beta: hinf_norm(model, grid)?,
        r: oracle.raw.r,
        oracle_beta: oracle.beta,
        oracle_r: oracle.r,
        oracle_horizon: oracle.horizon,
        hankel_singular_values: sigmas,
        rank,
        truncation,
    })
}
