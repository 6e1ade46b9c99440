//! Gramians, Hankel singular values and balanced truncation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::model::spectral_radius;
use super::StateSpaceModel;
use crate::error::{Result, SysIdError};
use crate::linalg::{psd_factor, relative_residual, symmetrize};

/// Hankel singular values below this fraction of `σ₁` are treated as zero.
pub const MINIMALITY_TOL: f64 = 1e-10;

const LYAP_UPDATE_TOL: f64 = 1e-14;
const LYAP_RESIDUAL_TOL: f64 = 1e-10;
const LYAP_MAX_DOUBLINGS: usize = 200;

/// Solves `X = A X Aᵀ + Q` for Schur-stable `A` by the doubling iteration
/// `X ← X + Aₖ X Aₖᵀ`, `Aₖ ← Aₖ²`.
pub fn solve_discrete_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(SysIdError::Dimension(format!(
            "Lyapunov equation needs square A and Q of equal size, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let rho = spectral_radius(a);
    if rho >= 1.0 {
        return Err(SysIdError::Unstable(rho));
    }

    let mut x = symmetrize(q);
    let mut ak = a.clone();
    let mut converged = false;
    for _ in 0..LYAP_MAX_DOUBLINGS {
        let update = &ak * &x * ak.transpose();
        let update_norm = update.norm();
        x += update;
        if update_norm <= LYAP_UPDATE_TOL * x.norm().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        ak = &ak * &ak;
    }
    let x = symmetrize(&x);
    let rhs = a * &x * a.transpose() + q;
    let residual = relative_residual(&x, &rhs);
    if !converged || residual > LYAP_RESIDUAL_TOL {
        return Err(SysIdError::Numerical(format!(
            "Lyapunov doubling did not converge (relative residual {residual:e})"
        )));
    }
    Ok(x)
}

/// Controllability (`P`) and observability (`Q`) gramians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramianPair {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

impl GramianPair {
    pub fn of(model: &StateSpaceModel) -> Result<Self> {
        let a = model.a();
        let p = solve_discrete_lyapunov(a, &(model.b() * model.b().transpose()))?;
        let q = solve_discrete_lyapunov(&a.transpose(), &(model.c().transpose() * model.c()))?;
        Ok(Self { p, q })
    }
}

/// Square-root balancing data: factors `P = Lc Lcᵀ`, `Q = Lo Loᵀ` and the
/// SVD `Loᵀ Lc = U Σ Vᵀ`.
struct SquareRoot {
    lc: DMatrix<f64>,
    lo: DMatrix<f64>,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    sigmas: Vec<f64>,
}

impl SquareRoot {
    fn of(model: &StateSpaceModel) -> Result<Self> {
        let g = GramianPair::of(model)?;
        let lc = psd_factor(&g.p);
        let lo = psd_factor(&g.q);
        let svd = (lo.transpose() * &lc).svd(true, true);
        let u = svd.u.ok_or_else(|| SysIdError::Numerical("SVD failed".into()))?;
        let v_t = svd
            .v_t
            .ok_or_else(|| SysIdError::Numerical("SVD failed".into()))?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let n = order.len();
        let u = DMatrix::from_fn(u.nrows(), n, |r, c| u[(r, order[c])]);
        let v = DMatrix::from_fn(v_t.ncols(), n, |r, c| v_t[(order[c], r)]);
        let sigmas = order.iter().map(|&i| svd.singular_values[i]).collect();
        Ok(Self {
            lc,
            lo,
            u,
            v,
            sigmas,
        })
    }

    fn numerical_rank(&self) -> usize {
        let s1 = self.sigmas.first().copied().unwrap_or(0.0);
        self.sigmas
            .iter()
            .take_while(|&&s| s > MINIMALITY_TOL * s1 && s > 0.0)
            .count()
    }

    fn project(&self, model: &StateSpaceModel, r: usize) -> Result<StateSpaceModel> {
        let scale = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            r,
            self.sigmas[..r].iter().map(|s| 1.0 / s.sqrt()),
        ));
        let t = &self.lc * self.v.columns(0, r) * &scale;
        let w = &self.lo * self.u.columns(0, r) * &scale;
        StateSpaceModel::new(
            model.c() * &t,
            w.transpose() * model.a() * &t,
            w.transpose() * model.b(),
        )
    }
}

/// Hankel singular values in descending order (length `n`), the square roots
/// of the eigenvalues of `P Q`.
pub fn hankel_singular_values(model: &StateSpaceModel) -> Result<Vec<f64>> {
    let g = GramianPair::of(model)?;
    let l = psd_factor(&g.p);
    let m = symmetrize(&(l.transpose() * &g.q * &l));
    let mut s: Vec<f64> = m
        .symmetric_eigenvalues()
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// A balanced realization: both gramians equal `diag(σ₁, …, σₙ)`.
pub fn balanced_realization(model: &StateSpaceModel) -> Result<StateSpaceModel> {
    let sr = SquareRoot::of(model)?;
    let rank = sr.numerical_rank();
    if rank < model.n() {
        return Err(SysIdError::NonMinimal {
            rank,
            order: model.n(),
        });
    }
    sr.project(model, rank)
}

/// Balanced truncation to order `min(r, rank)`, where `rank` is the number of
/// Hankel singular values above the minimality tolerance. A model with no
/// nonzero Hankel singular value truncates to the one-state zero system.
pub fn balanced_truncate(model: &StateSpaceModel, r: usize) -> Result<StateSpaceModel> {
    if r == 0 {
        return Err(SysIdError::InvalidArgument(
            "truncation order must be positive".into(),
        ));
    }
    let sr = SquareRoot::of(model)?;
    let keep = r.min(sr.numerical_rank());
    if keep == 0 {
        return StateSpaceModel::new(
            DMatrix::zeros(model.p(), 1),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, model.m()),
        );
    }
    sr.project(model, keep)
}
