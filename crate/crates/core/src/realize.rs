//! State-space realization from a Hankel estimate, and model comparison.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysIdError};
use crate::linalg::spectral_norm;
use crate::lti::{
    balanced_truncate, hankel_from_markov, hankel_singular_values, hinf_distance,
    markov_parameters, observability, StateSpaceModel,
};
use crate::ols::HankelEstimate;

/// Singular values below this fraction of `σ₁` cannot be used for a realization.
pub const VANISHING_SIGMA_TOL: f64 = 1e-12;

/// Relative tolerance for treating two singular values as equal when aligning.
pub const EQUAL_SIGMA_TOL: f64 = 1e-6;

/// A realization of order `k` with the singular values that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedModel {
    #[serde(flatten)]
    pub model: StateSpaceModel,
    pub sigmas_used: Vec<f64>,
    pub k: usize,
    /// Window of the Hankel estimate, absent for ground-truth models.
    pub source_d: Option<usize>,
}

impl RealizedModel {
    /// Balanced truncation of `model` to order `k`, tagged with its leading
    /// Hankel singular values.
    pub fn from_truth(model: &StateSpaceModel, k: usize) -> Result<Self> {
        let reduced = balanced_truncate(model, k)?;
        let sigmas = hankel_singular_values(model)?;
        let k = reduced.n();
        Ok(Self {
            model: reduced,
            sigmas_used: sigmas[..k].to_vec(),
            k,
            source_d: None,
        })
    }
}

/// SVD with columns sorted by descending singular value and each left vector
/// signed so that its largest-magnitude entry is positive.
pub(crate) fn normalized_svd(h: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let svd = h.clone().svd(true, true);
    let u = svd.u.ok_or_else(|| SysIdError::Numerical("SVD failed".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| SysIdError::Numerical("SVD failed".into()))?;
    let s = &svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let mut u_sorted = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let mut v_sorted = DMatrix::from_fn(v_t.ncols(), order.len(), |r, c| v_t[(order[c], r)]);
    for c in 0..order.len() {
        let col = u_sorted.column(c);
        let pivot = col.iter().copied().fold(0.0_f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            u_sorted.column_mut(c).neg_mut();
            v_sorted.column_mut(c).neg_mut();
        }
    }
    let sigmas = order.iter().map(|&i| s[i]).collect();
    Ok((u_sorted, sigmas, v_sorted))
}

/// Order-`k` realization `(Ĉ, Â, B̂)` from the top `k` singular triplets of `Ĥ`.
///
/// With `O = U_k Σ_k^{1/2}`: `Ĉ` is the first `p` rows of `O`, `B̂` the first
/// `m` columns of `Σ_k^{1/2} V_kᵀ`, and `Â = (Z₀ᵀZ₀)⁻¹ Z₀ᵀ Z₁` with `Z₀ = O`
/// and `Z₁` the block-shifted `O` padded with one zero block row.
pub fn hankel2sys(est: &HankelEstimate, k: usize) -> Result<RealizedModel> {
    let budget = est.rank_budget();
    if k == 0 || k > budget {
        return Err(SysIdError::RankBudget { k, budget });
    }
    let (p, m) = (est.p, est.m);
    let (u, sigmas, v) = normalized_svd(&est.h_hat)?;
    let s1 = sigmas[0];
    let sk = sigmas[k - 1];
    if !(sk > VANISHING_SIGMA_TOL * s1) || sk <= 0.0 {
        return Err(SysIdError::VanishingSingularValue { k, value: sk });
    }
    let roots = DVector::from_iterator(k, sigmas[..k].iter().map(|s| s.sqrt()));
    let mut obs = u.columns(0, k).into_owned();
    let mut ctr_t = v.columns(0, k).into_owned();
    for (j, r) in roots.iter().enumerate() {
        obs.column_mut(j).scale_mut(*r);
        ctr_t.column_mut(j).scale_mut(*r);
    }
    let rows = obs.nrows();
    let c = obs.rows(0, p).into_owned();
    let b = ctr_t.rows(0, m).transpose();

    let mut z1 = DMatrix::zeros(rows, k);
    z1.rows_mut(0, rows - p).copy_from(&obs.rows(p, rows - p));
    let gram = obs.transpose() * &obs;
    let a = gram
        .cholesky()
        .ok_or_else(|| SysIdError::Numerical("Z0ᵀZ0 is not positive definite".into()))?
        .solve(&(obs.transpose() * z1));

    Ok(RealizedModel {
        model: StateSpaceModel::new(c, a, b)?,
        sigmas_used: sigmas[..k].to_vec(),
        k,
        source_d: Some(est.d),
    })
}

/// Distances between two models with the same input and output dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelDistance {
    /// `‖H_{0,D,D}(a) − H_{0,D,D}(b)‖₂`.
    pub hankel_err: f64,
    /// Grid H∞ norm of `G_a − G_b`; infinite if either model is unstable.
    pub hinf_err: f64,
    /// Largest spectral-norm deviation among the first `D` Markov parameters.
    pub impulse_err: f64,
}

pub fn compare_models(
    a: &StateSpaceModel,
    b: &StateSpaceModel,
    horizon: usize,
    grid: usize,
) -> Result<ModelDistance> {
    if a.p() != b.p() || a.m() != b.m() {
        return Err(SysIdError::Dimension(format!(
            "cannot compare a {}x{} model with a {}x{} model",
            a.p(),
            a.m(),
            b.p(),
            b.m()
        )));
    }
    if horizon == 0 {
        return Err(SysIdError::InvalidArgument("horizon must be positive".into()));
    }
    let ga = markov_parameters(a, 2 * horizon - 1);
    let gb = markov_parameters(b, 2 * horizon - 1);
    let diff: Vec<DMatrix<f64>> = ga.iter().zip(&gb).map(|(x, y)| x - y).collect();
    let impulse_err = diff[..horizon]
        .iter()
        .map(spectral_norm)
        .fold(0.0, f64::max);
    let hankel_err = spectral_norm(&hankel_from_markov(&diff, 0, horizon, horizon).data);
    let hinf_err = if a.is_schur_stable() && b.is_schur_stable() {
        hinf_distance(a, b, grid)?
    } else {
        f64::INFINITY
    };
    Ok(ModelDistance {
        hankel_err,
        hinf_err,
        impulse_err,
    })
}

/// Orthogonal `Q` (block diagonal over groups of equal truth singular
/// values) minimizing `‖O_est Q − O_truth‖_F` over `k + 1` observability blocks.
pub fn alignment(truth: &RealizedModel, est: &RealizedModel) -> Result<DMatrix<f64>> {
    let k = truth.model.n();
    if est.model.n() != k {
        return Err(SysIdError::Dimension(format!(
            "cannot align an order-{} estimate to an order-{k} model",
            est.model.n()
        )));
    }
    if truth.model.p() != est.model.p() || truth.model.m() != est.model.m() {
        return Err(SysIdError::Dimension(
            "models have different input or output dimensions".into(),
        ));
    }
    if truth.sigmas_used.len() != k {
        return Err(SysIdError::Dimension(format!(
            "truth carries {} singular values for order {k}",
            truth.sigmas_used.len()
        )));
    }
    let o_t = observability(&truth.model, k + 1);
    let o_e = observability(&est.model, k + 1);

    let mut q = DMatrix::zeros(k, k);
    let mut start = 0;
    while start < k {
        let s = truth.sigmas_used[start];
        let mut end = start + 1;
        while end < k && (truth.sigmas_used[end] - s).abs() <= EQUAL_SIGMA_TOL * s.abs() {
            end += 1;
        }
        let g = end - start;
        let cross = o_e.columns(start, g).transpose() * o_t.columns(start, g);
        let svd = cross.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(SysIdError::Numerical("SVD failed".into())),
        };
        q.view_mut((start, start), (g, g)).copy_from(&(u * v_t));
        start = end;
    }
    Ok(q)
}

/// `‖C − ĈQ‖₂ + ‖A − QᵀÂQ‖₂ + ‖B − QᵀB̂‖₂` with `Q` from [`alignment`].
pub fn aligned_param_error(truth: &RealizedModel, est: &RealizedModel) -> Result<f64> {
    let q = alignment(truth, est)?;
    let (t, e) = (&truth.model, &est.model);
    Ok(spectral_norm(&(t.c() - e.c() * &q))
        + spectral_norm(&(t.a() - q.transpose() * e.a() * &q))
        + spectral_norm(&(t.b() - q.transpose() * e.b())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::build_hankel;
    use crate::ols::SolveMethod;

    fn exact_estimate(model: &StateSpaceModel, d: usize) -> HankelEstimate {
        let h = build_hankel(model, 0, d, d).unwrap();
        HankelEstimate {
            sigmas: crate::linalg::singular_values_desc(&h.data),
            h_hat: h.data,
            d,
            t: 0,
            p: model.p(),
            m: model.m(),
            vt_min_eig: 0.0,
            vt_max_eig: 0.0,
            ridge: 0.0,
            method: SolveMethod::Cholesky,
            rank_deficient: false,
        }
    }

    #[test]
    fn padding_shrinks_scalar_pole() {
        let est = exact_estimate(&StateSpaceModel::scalar(1.0, 0.5, 1.0), 3);
        let r = hankel2sys(&est, 1).unwrap();
        let cb = r.model.c()[(0, 0)] * r.model.b()[(0, 0)];
        assert!((cb - 1.0).abs() < 1e-14);
        assert!((r.model.a()[(0, 0)] - 0.625 / 1.3125).abs() < 1e-14);
        assert!(r.model.c()[(0, 0)] > 0.0);
    }

    #[test]
    fn long_window_removes_padding_bias() {
        let est = exact_estimate(&StateSpaceModel::scalar(1.0, 0.5, 1.0), 30);
        let r = hankel2sys(&est, 1).unwrap();
        assert!((r.model.a()[(0, 0)] - 0.5).abs() <= 1e-7);
    }

    #[test]
    fn rank_budget_and_vanishing_values() {
        let est = exact_estimate(&StateSpaceModel::scalar(1.0, 0.5, 1.0), 3);
        assert!(matches!(
            hankel2sys(&est, 4),
            Err(SysIdError::RankBudget { k: 4, budget: 3 })
        ));
        assert!(matches!(hankel2sys(&est, 0), Err(SysIdError::RankBudget { .. })));
        assert!(matches!(
            hankel2sys(&est, 2),
            Err(SysIdError::VanishingSingularValue { k: 2, .. })
        ));
    }

    #[test]
    fn self_distance_is_zero() {
        let m = StateSpaceModel::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 0.3]),
            DMatrix::from_row_slice(2, 2, &[0.4, 0.2, -0.3, 0.5]),
            DMatrix::from_row_slice(2, 1, &[1.0, 2.0]),
        )
        .unwrap();
        let d = compare_models(&m, &m, 50, 256).unwrap();
        assert_eq!(d.hankel_err, 0.0);
        assert_eq!(d.hinf_err, 0.0);
        assert_eq!(d.impulse_err, 0.0);
    }

    #[test]
    fn unstable_estimate_has_infinite_hinf_error() {
        let a = StateSpaceModel::scalar(1.0, 0.5, 1.0);
        let b = StateSpaceModel::scalar(1.0, 1.1, 1.0);
        let d = compare_models(&a, &b, 10, 128).unwrap();
        assert!(d.hinf_err.is_infinite());
        assert!(d.impulse_err.is_finite());
    }

    #[test]
    fn aligned_error_recovers_rotation_within_equal_group() {
        let model = StateSpaceModel::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2) * 0.5,
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let truth = RealizedModel::from_truth(&model, 2).unwrap();
        assert!((truth.sigmas_used[0] - truth.sigmas_used[1]).abs() < 1e-12);
        let th: f64 = 0.7;
        let rot = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let est = RealizedModel {
            model: truth.model.similarity(&rot).unwrap(),
            ..truth.clone()
        };
        assert!(aligned_param_error(&truth, &est).unwrap() < 1e-8);
        assert!(aligned_param_error(&truth, &truth).unwrap() < 1e-14);
    }

    #[test]
    fn json_carries_sigmas() {
        let est = exact_estimate(&StateSpaceModel::scalar(1.0, 0.5, 1.0), 3);
        let r = hankel2sys(&est, 1).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"sigmas_used\""));
        assert!(s.contains("\"A\""));
        let back: RealizedModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}
