//! Least-squares estimation of the `d × d` block Hankel matrix from one
//! trajectory.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysIdError};
use crate::linalg::{singular_values_desc, symmetric_extreme_eigenvalues};
use crate::lti::BlockMatrix;
use crate::simulate::Trajectory;

/// Covariance spread tolerated before the normal equations are abandoned for
/// a QR solve.
const CHOLESKY_MAX_RATIO: f64 = 3.0;

/// Stacked regression `Ỹ⁺ ≈ H Ũ⁻`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionBundle {
    /// `pd × T`; column `l` is `(y[l+d], …, y[l+2d−1])`.
    pub y_plus: DMatrix<f64>,
    /// `md × T`; column `l` is `(u[l+d−1], …, u[l])`.
    pub u_minus: DMatrix<f64>,
    /// `Ũ⁻ Ũ⁻ᵀ`.
    pub v_t: DMatrix<f64>,
    pub d: usize,
}

impl RegressionBundle {
    /// Number of regression columns.
    pub fn t(&self) -> usize {
        self.u_minus.ncols()
    }
}

/// Builds the regression for window `d` using `T = len − 2d` columns
/// (zero-based sample indices).
pub fn build_regression(traj: &Trajectory, d: usize) -> Result<RegressionBundle> {
    if d == 0 {
        return Err(SysIdError::InvalidArgument("window d must be positive".into()));
    }
    let need = 2 * d + 1;
    if traj.len() < need {
        return Err(SysIdError::TrajectoryTooShort {
            len: traj.len(),
            d,
            need,
        });
    }
    let (m, p) = (traj.m(), traj.p());
    let t = traj.len() - 2 * d;
    let u = traj.inputs();
    let y = traj.outputs();
    let u_minus = DMatrix::from_fn(m * d, t, |r, l| {
        let (block, ch) = (r / m, r % m);
        u[(ch, l + d - 1 - block)]
    });
    let y_plus = DMatrix::from_fn(p * d, t, |r, l| {
        let (block, ch) = (r / p, r % p);
        y[(ch, l + d + block)]
    });
    let v_t = &u_minus * u_minus.transpose();
    Ok(RegressionBundle {
        y_plus,
        u_minus,
        v_t,
        d,
    })
}

/// How the normal equations were solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Cholesky,
    Qr,
    PseudoInverse,
}

/// `Ĥ_{0,d,d}` with regression diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HankelEstimate {
    #[serde(with = "crate::serde_rows")]
    pub h_hat: DMatrix<f64>,
    pub d: usize,
    /// Regression columns used.
    pub t: usize,
    pub p: usize,
    pub m: usize,
    /// Singular values of `Ĥ`, descending.
    pub sigmas: Vec<f64>,
    pub vt_min_eig: f64,
    pub vt_max_eig: f64,
    pub ridge: f64,
    pub method: SolveMethod,
    /// Set when `V_T` was numerically singular and a pseudo-inverse was used.
    pub rank_deficient: bool,
}

impl HankelEstimate {
    pub fn as_block(&self) -> BlockMatrix {
        BlockMatrix::new(self.h_hat.clone(), self.d, self.d, self.p, self.m)
            .expect("estimate has block-consistent dimensions")
    }

    /// Upper bound on the order a realization from this estimate can have.
    pub fn rank_budget(&self) -> usize {
        (self.p * self.d).min(self.m * self.d)
    }
}

/// Solves `min_H Σ_l ‖Ỹ⁺_l − H Ũ⁻_l‖² + ridge ‖H‖_F²`.
pub fn estimate_hankel(traj: &Trajectory, d: usize, ridge: f64) -> Result<HankelEstimate> {
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(SysIdError::InvalidArgument(format!(
            "ridge must be finite and nonnegative, got {ridge}"
        )));
    }
    let bundle = build_regression(traj, d)?;
    estimate_from_regression(&bundle, traj.p(), traj.m(), ridge)
}

pub fn estimate_from_regression(
    bundle: &RegressionBundle,
    p: usize,
    m: usize,
    ridge: f64,
) -> Result<HankelEstimate> {
    let md = bundle.u_minus.nrows();
    let (vt_min_eig, vt_max_eig) = symmetric_extreme_eigenvalues(&bundle.v_t);
    let cross_t = &bundle.u_minus * bundle.y_plus.transpose();

    let reg_min = vt_min_eig + ridge;
    let reg_max = vt_max_eig + ridge;
    let singular = reg_max <= 0.0 || reg_min <= reg_max * md as f64 * f64::EPSILON * 1e3;

    let (h_t, method) = if singular {
        let mut v = bundle.v_t.clone();
        for i in 0..md {
            v[(i, i)] += ridge;
        }
        let tol = reg_max.max(f64::MIN_POSITIVE) * md as f64 * f64::EPSILON * 1e3;
        let pinv = v
            .pseudo_inverse(tol)
            .map_err(|e| SysIdError::Numerical(e.to_string()))?;
        (pinv * cross_t, SolveMethod::PseudoInverse)
    } else if reg_max / reg_min <= CHOLESKY_MAX_RATIO {
        let mut v = bundle.v_t.clone();
        for i in 0..md {
            v[(i, i)] += ridge;
        }
        let chol = v
            .cholesky()
            .ok_or_else(|| SysIdError::Numerical("V_T is not positive definite".into()))?;
        (chol.solve(&cross_t), SolveMethod::Cholesky)
    } else {
        (qr_solve(bundle, ridge)?, SolveMethod::Qr)
    };

    let h_hat = h_t.transpose();
    let sigmas = singular_values_desc(&h_hat);
    Ok(HankelEstimate {
        h_hat,
        d: bundle.d,
        t: bundle.t(),
        p,
        m,
        sigmas,
        vt_min_eig,
        vt_max_eig,
        ridge,
        method,
        rank_deficient: singular && ridge == 0.0,
    })
}

/// Least squares `Ũ⁻ᵀ Hᵀ ≈ Ỹ⁺ᵀ` by QR, with `√ridge·I` rows appended.
fn qr_solve(bundle: &RegressionBundle, ridge: f64) -> Result<DMatrix<f64>> {
    let md = bundle.u_minus.nrows();
    let t = bundle.t();
    let pd = bundle.y_plus.nrows();
    let extra = if ridge > 0.0 { md } else { 0 };
    let mut lhs = DMatrix::zeros(t + extra, md);
    lhs.rows_mut(0, t).copy_from(&bundle.u_minus.transpose());
    let mut rhs = DMatrix::zeros(t + extra, pd);
    rhs.rows_mut(0, t).copy_from(&bundle.y_plus.transpose());
    for i in 0..extra {
        lhs[(t + i, i)] = ridge.sqrt();
    }
    let qr = lhs.qr();
    let qt_rhs = qr.q().transpose() * rhs;
    qr.r()
        .solve_upper_triangular(&qt_rhs)
        .ok_or_else(|| SysIdError::Numerical("triangular factor is singular".into()))
}

/// Whether `½ T I ⪯ V_T ⪯ 3/2 T I` holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub ok: bool,
    /// `λ_min(V_T) / T`.
    pub low: f64,
    /// `λ_max(V_T) / T`.
    pub high: f64,
}

pub fn covariance_condition(est: &HankelEstimate) -> CovarianceReport {
    let t = est.t as f64;
    CovarianceReport {
        ok: est.vt_min_eig >= 0.5 * t && est.vt_max_eig <= 1.5 * t,
        low: est.vt_min_eig / t,
        high: est.vt_max_eig / t,
    }
}
