//! Data-driven choice of the Hankel window `d̂` and the learnable order `k`.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysIdError};
use crate::lti::{delta_plus, padded_diff_norm};
use crate::ols::{estimate_hankel, HankelEstimate};
use crate::simulate::Trajectory;

/// Tuning constants for window and order selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    /// Confidence level `δ ∈ (0, 1)`.
    pub delta: f64,
    /// Threshold multiplier `κ`; the guarantees need `κ ≥ 20`.
    pub kappa: f64,
    /// Universal constant `𝒞`. Defaults to `Δ₊/κ` when a gap is given, else 1.
    pub c_univ: Option<f64>,
    /// Upper bound on the H∞ norm.
    pub beta: f64,
    /// Noise-to-signal bound `R`.
    pub r: f64,
    /// Known lower bound on the normalized singular-value gap.
    pub delta_plus: Option<f64>,
    pub p: usize,
    pub m: usize,
    /// Largest window considered, whatever the candidate bounds allow.
    pub max_window: Option<usize>,
    /// Tikhonov parameter passed to the least-squares fits.
    pub ridge: f64,
}

/// Default cap on the candidate windows.
pub const DEFAULT_MAX_WINDOW: usize = 64;

impl SelectionConfig {
    /// Defaults `δ = 0.05`, `κ = 20`, no gap, window cap [`DEFAULT_MAX_WINDOW`].
    pub fn new(p: usize, m: usize, beta: f64, r: f64) -> Self {
        Self {
            delta: 0.05,
            kappa: 20.0,
            c_univ: None,
            beta,
            r,
            delta_plus: None,
            p,
            m,
            max_window: Some(DEFAULT_MAX_WINDOW),
            ridge: 0.0,
        }
    }

    /// The constant `𝒞` in effect.
    pub fn universal_constant(&self) -> f64 {
        match (self.c_univ, self.delta_plus) {
            (Some(c), _) => c,
            (None, Some(dp)) => dp / self.kappa,
            (None, None) => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SysIdError::InvalidArgument(msg));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return bad(format!("R must be positive, got {}", self.r));
        }
        if let Some(dp) = self.delta_plus {
            if !(dp > 0.0 && dp <= 1.0) {
                return bad(format!("delta_plus must lie in (0, 1], got {dp}"));
            }
        }
        if let Some(c) = self.c_univ {
            if !(c.is_finite() && c > 0.0) {
                return bad(format!("c_univ must be positive, got {c}"));
            }
        }
        if self.p == 0 || self.m == 0 {
            return bad("p and m must be positive".into());
        }
        if self.max_window == Some(0) {
            return bad("max_window must be positive".into());
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return bad(format!("ridge must be nonnegative, got {}", self.ridge));
        }
        if self.kappa < 20.0 {
            warn!("kappa = {} is below 20; selection guarantees do not apply", self.kappa);
        }
        if self.r < 1.0 {
            warn!("R = {} is below 1", self.r);
        }
        Ok(())
    }
}

/// `α(h) = √h · √((h p + ln(T/δ)) / T)`.
pub fn alpha(h: usize, cfg: &SelectionConfig, t: usize) -> f64 {
    let t = t as f64;
    let h = h as f64;
    h.sqrt() * ((h * cfg.p as f64 + (t / cfg.delta).ln()) / t).sqrt()
}

/// Largest window allowed by `d ≤ T/(4𝒞 m ln(T/δ)) ∧ √(T/(4𝒞 ln(2/δ)))` and
/// the configured cap; zero when none is.
pub fn max_candidate(cfg: &SelectionConfig, t: usize) -> usize {
    let c = cfg.universal_constant();
    let tf = t as f64;
    let log_t = (tf / cfg.delta).ln();
    let b1 = tf / (4.0 * c * cfg.m as f64 * log_t);
    let b2 = (tf / (4.0 * c * (2.0 / cfg.delta).ln())).sqrt();
    let bound = b1.min(b2).floor();
    let bound = if bound.is_finite() && bound > 0.0 {
        bound.min(usize::MAX as f64) as usize
    } else {
        0
    };
    match cfg.max_window {
        Some(cap) => bound.min(cap),
        None => bound,
    }
}

/// Candidate windows `𝒟(T)`, ascending.
pub fn candidate_set(cfg: &SelectionConfig, t: usize) -> Result<Vec<usize>> {
    let top = max_candidate(cfg, t);
    if top == 0 {
        return Err(SysIdError::EmptyCandidateSet(t));
    }
    Ok((1..=top).collect())
}

/// Trajectory length needed to fit every candidate window with `T` columns.
pub fn required_length(cfg: &SelectionConfig, t: usize) -> usize {
    t + 2 * max_candidate(cfg, t)
}

/// Largest `T` whose candidate windows all fit in `len` samples.
pub fn effective_samples(cfg: &SelectionConfig, len: usize) -> Result<usize> {
    let (mut lo, mut hi) = (0usize, len);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if required_length(cfg, mid) <= len {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    if lo == 0 || max_candidate(cfg, lo) == 0 {
        return Err(SysIdError::EmptyCandidateSet(lo));
    }
    Ok(lo)
}

/// `⌈ln(T/δ)⌉`.
pub fn log_floor(cfg: &SelectionConfig, t: usize) -> usize {
    (t as f64 / cfg.delta).ln().ceil().max(1.0) as usize
}

/// One comparison in the window rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairGap {
    pub l: usize,
    pub h: usize,
    /// `‖Ĥ_{0,l,l} − Ĥ_{0,h,h}‖₂` with zero padding.
    pub gap: f64,
    /// `𝒞 β R (α(h) + 2α(l))`.
    pub threshold: f64,
}

/// Which branch of the order rule was used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapBranch {
    Known,
    Unknown,
}

/// Audit record of both selection rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    /// Regression columns per window fit.
    pub t: usize,
    pub universal_constant: f64,
    pub candidate_ds: Vec<usize>,
    pub pairwise_gaps: Vec<PairGap>,
    pub d0: usize,
    pub log_floor: usize,
    pub d_hat: usize,
    /// Set when no window passed every comparison.
    pub no_consistent_l: bool,
    pub k: Option<usize>,
    pub k_branch: Option<GapBranch>,
    /// Per-index thresholds on `σ_l` used by the order rule.
    pub thresholds: Vec<f64>,
}

/// Result of the window rule together with the fit at `d̂`.
#[derive(Debug, Clone)]
pub struct WindowChoice {
    pub d_hat: usize,
    pub trace: SelectionTrace,
    pub estimate: HankelEstimate,
}

/// Picks `d̂ = max(d₀, ⌈ln(T/δ)⌉)`, capped at the largest candidate, where
/// `d₀` is the smallest window whose estimate stays within
/// `𝒞 β R (α(h) + 2α(l))` of every larger candidate's estimate.
///
/// Each window `l` is fitted on the first `T + 2l` samples so that all fits
/// use `T` regression columns.
pub fn choose_d(traj: &Trajectory, cfg: &SelectionConfig) -> Result<WindowChoice> {
    cfg.validate()?;
    if traj.p() != cfg.p || traj.m() != cfg.m {
        return Err(SysIdError::Dimension(format!(
            "configuration is for {}x{} systems, trajectory is {}x{}",
            cfg.p,
            cfg.m,
            traj.p(),
            traj.m()
        )));
    }
    let t = effective_samples(cfg, traj.len())?;
    let candidates = candidate_set(cfg, t)?;
    let estimates: Vec<HankelEstimate> = candidates
        .par_iter()
        .map(|&l| estimate_hankel(&traj.prefix(t + 2 * l)?, l, cfg.ridge))
        .collect::<Result<_>>()?;

    let c = cfg.universal_constant();
    let scale = c * cfg.beta * cfg.r;
    let alphas: Vec<f64> = candidates.iter().map(|&l| alpha(l, cfg, t)).collect();
    let n = candidates.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let pairwise_gaps: Vec<PairGap> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let gap = padded_diff_norm(&estimates[i].as_block(), &estimates[j].as_block())?;
            Ok(PairGap {
                l: candidates[i],
                h: candidates[j],
                gap,
                threshold: scale * (alphas[j] + 2.0 * alphas[i]),
            })
        })
        .collect::<Result<_>>()?;

    let passes = |i: usize| {
        pairwise_gaps
            .iter()
            .filter(|g| g.l == candidates[i])
            .all(|g| g.gap <= g.threshold)
    };
    let (d0, no_consistent_l) = match (0..n).find(|&i| passes(i)) {
        Some(i) => (candidates[i], false),
        None => (candidates[n - 1], true),
    };
    let floor = log_floor(cfg, t);
    let d_hat = d0.max(floor).min(candidates[n - 1]);
    let estimate = estimates[d_hat - 1].clone();

    Ok(WindowChoice {
        d_hat,
        trace: SelectionTrace {
            t,
            universal_constant: c,
            candidate_ds: candidates,
            pairwise_gaps,
            d0,
            log_floor: floor,
            d_hat,
            no_consistent_l,
            k: None,
            k_branch: None,
            thresholds: Vec::new(),
        },
        estimate,
    })
}

/// `τ(Δ) = κ 𝒞 R √d̂ / Δ · √((p d̂ + ln(T/δ)) / T)`.
pub fn tau(gap: f64, d_hat: usize, cfg: &SelectionConfig, t: usize) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(SysIdError::InvalidArgument(format!(
            "tau needs a positive gap, got {gap}"
        )));
    }
    let d = d_hat as f64;
    let tf = t as f64;
    Ok(cfg.kappa * cfg.universal_constant() * cfg.r * d.sqrt() / gap
        * ((cfg.p as f64 * d + (tf / cfg.delta).ln()) / tf).sqrt())
}

/// Known-gap detection level on `σ_l`: `4 β τ(Δ₊)`.
pub fn known_gap_threshold(gap: f64, d_hat: usize, cfg: &SelectionConfig, t: usize) -> Result<f64> {
    Ok(4.0 * cfg.beta * tau(gap, d_hat, cfg, t)?)
}

/// Unknown-gap detection level on `σ_l` evaluated at a given `σ`:
/// `4 β √τ(√(β / (σ l)))`. Infinite when `σ = 0`.
pub fn unknown_gap_threshold(
    sigma: f64,
    l: usize,
    d_hat: usize,
    cfg: &SelectionConfig,
    t: usize,
) -> Result<f64> {
    if l == 0 {
        return Err(SysIdError::InvalidArgument("index l starts at 1".into()));
    }
    if !(sigma > 0.0) {
        return Ok(f64::INFINITY);
    }
    let gap = (cfg.beta / (sigma * l as f64)).sqrt();
    Ok(4.0 * cfg.beta * tau(gap, d_hat, cfg, t)?.sqrt())
}

/// Result of the order rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderChoice {
    /// Zero when no singular value clears its threshold.
    pub k: usize,
    pub branch: GapBranch,
    /// Threshold on `σ_l` for `l = 1, 2, …`.
    pub thresholds: Vec<f64>,
}

/// Largest `l` with `σ_l ≥` its threshold (known-gap rule when
/// `cfg.delta_plus` is set, unknown-gap rule otherwise).
pub fn choose_k(
    sigmas: &[f64],
    d_hat: usize,
    cfg: &SelectionConfig,
    t: usize,
) -> Result<OrderChoice> {
    let (branch, thresholds) = match cfg.delta_plus {
        Some(dp) => {
            let thr = known_gap_threshold(dp, d_hat, cfg, t)?;
            (GapBranch::Known, vec![thr; sigmas.len()])
        }
        None => (
            GapBranch::Unknown,
            sigmas
                .iter()
                .enumerate()
                .map(|(i, &s)| unknown_gap_threshold(s, i + 1, d_hat, cfg, t))
                .collect::<Result<_>>()?,
        ),
    };
    let k = sigmas
        .iter()
        .zip(&thresholds)
        .rposition(|(s, thr)| s >= thr)
        .map_or(0, |i| i + 1);
    Ok(OrderChoice {
        k,
        branch,
        thresholds,
    })
}

/// Default noise floor for [`estimate_delta_plus`], relative to `σ₁`:
/// `4 τ(1) β / σ₁`.
pub fn default_noise_floor(
    sigma1: f64,
    d_hat: usize,
    cfg: &SelectionConfig,
    t: usize,
) -> Result<f64> {
    if !(sigma1 > 0.0) {
        return Ok(1.0);
    }
    Ok(4.0 * tau(1.0, d_hat, cfg, t)? * cfg.beta / sigma1)
}

/// `Δ₊` of estimated singular values, ignoring those below
/// `noise_floor · σ₁`.
pub fn estimate_delta_plus(sigmas: &[f64], noise_floor: f64) -> Result<f64> {
    let s1 = sigmas.first().copied().ok_or_else(|| {
        SysIdError::InvalidArgument("estimate_delta_plus needs at least one value".into())
    })?;
    delta_plus(sigmas, noise_floor * s1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(delta: f64, c: f64) -> SelectionConfig {
        SelectionConfig {
            delta,
            kappa: 20.0,
            c_univ: Some(c),
            beta: 1.0,
            r: 1.0,
            delta_plus: None,
            p: 1,
            m: 1,
            max_window: None,
            ridge: 0.0,
        }
    }

    #[test]
    fn alpha_example() {
        let a = alpha(4, &cfg(0.1, 1.0), 10_000);
        let expected = 2.0 * ((4.0 + 1e5f64.ln()) / 1e4).sqrt();
        assert!((a - expected).abs() < 1e-15);
        assert!((a - 0.0788).abs() < 5e-5);
    }

    #[test]
    fn alpha_superlinear() {
        let c = cfg(0.1, 1.0);
        for h in 1..20 {
            assert!(alpha(4 * h, &c, 5000) >= 2.0 * alpha(h, &c, 5000));
        }
    }

    #[test]
    fn candidate_example() {
        let set = candidate_set(&cfg(0.1, 1.0), 10_000).unwrap();
        assert_eq!(set.len(), 28);
        assert_eq!(*set.last().unwrap(), 28);
        assert!(matches!(
            candidate_set(&cfg(0.1, 1.0), 10),
            Err(SysIdError::EmptyCandidateSet(10))
        ));
    }

    #[test]
    fn candidate_cap() {
        let mut c = cfg(0.1, 1.0);
        c.max_window = Some(5);
        assert_eq!(max_candidate(&c, 10_000), 5);
    }

    #[test]
    fn effective_samples_is_tight() {
        let c = cfg(0.1, 1.0);
        let t = effective_samples(&c, 10_000).unwrap();
        assert!(required_length(&c, t) <= 10_000);
        assert!(required_length(&c, t + 1) > 10_000);
    }

    #[test]
    fn default_constant_follows_gap() {
        let mut c = cfg(0.1, 1.0);
        c.c_univ = None;
        assert_eq!(c.universal_constant(), 1.0);
        c.delta_plus = Some(0.01);
        assert!((c.universal_constant() - 5e-4).abs() < 1e-18);
    }

    #[test]
    fn tau_example_and_scaling() {
        let mut c = cfg(0.1, 1.0);
        c.kappa = 1.0;
        let t1 = tau(1.0, 4, &c, 10_000).unwrap();
        let expected = 2.0 * ((4.0 + 1e5f64.ln()) / 1e4).sqrt();
        assert!((t1 - expected).abs() < 1e-15);
        let half = tau(0.5, 4, &c, 10_000).unwrap();
        assert!((half - 2.0 * t1).abs() < 1e-15);
        assert!(tau(0.0, 4, &c, 10).is_err());
    }

    #[test]
    fn known_gap_rule() {
        let mut c = cfg(0.1, 1.0);
        c.delta_plus = Some(1.0);
        c.kappa = 1.0;
        // Scale κ so that 4τ(Δ₊) = 0.05.
        c.kappa = 0.05 / (4.0 * tau(1.0, 4, &c, 10_000).unwrap());
        assert!((known_gap_threshold(1.0, 4, &c, 10_000).unwrap() - 0.05).abs() < 1e-15);
        let k = choose_k(&[1.0, 0.1, 0.001], 4, &c, 10_000).unwrap();
        assert_eq!(k.k, 2);
        assert_eq!(k.branch, GapBranch::Known);
    }

    #[test]
    fn nothing_clears_threshold() {
        let mut c = cfg(0.1, 1.0);
        c.delta_plus = Some(0.5);
        assert_eq!(choose_k(&[1e-6, 1e-7], 4, &c, 100).unwrap().k, 0);
        c.delta_plus = None;
        assert_eq!(choose_k(&[1e-6, 0.0], 4, &c, 100).unwrap().k, 0);
    }

    #[test]
    fn delta_plus_estimates() {
        assert_eq!(estimate_delta_plus(&[1.0, 1.0, 0.5], 0.0).unwrap(), 0.5);
        assert!((estimate_delta_plus(&[1.0, 0.9, 1e-9], 1e-6).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(estimate_delta_plus(&[3.0], 0.0).unwrap(), 1.0);
        assert!(estimate_delta_plus(&[], 0.0).is_err());
    }
}
