//! End-to-end identification: window choice, Hankel fit, order choice and
//! realization, plus scoring against a known model.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SysIdError};
use crate::lti::{noise_to_signal, toeplitz_horizon, NoiseToSignal, StateSpaceModel};
use crate::ols::HankelEstimate;
use crate::realize::{aligned_param_error, compare_models, hankel2sys, RealizedModel};
use crate::selection::{choose_d, choose_k, required_length, SelectionConfig, SelectionTrace};
use crate::simulate::{simulate, NoiseSpec, Trajectory};

/// Output of [`identify`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Identification {
    /// Regression columns per fit.
    pub t: usize,
    pub d_hat: usize,
    pub k: usize,
    pub trace: SelectionTrace,
    pub estimate: HankelEstimate,
    /// `None` when no order could be identified (`k = 0`).
    pub realized: Option<RealizedModel>,
}

impl Identification {
    pub fn identified(&self) -> bool {
        self.realized.is_some()
    }
}

/// Runs the window rule, the order rule and the realization on one trajectory.
pub fn identify(traj: &Trajectory, cfg: &SelectionConfig) -> Result<Identification> {
    let choice = choose_d(traj, cfg)?;
    let t = choice.trace.t;
    let order = choose_k(&choice.estimate.sigmas, choice.d_hat, cfg, t)?;
    let mut trace = choice.trace;
    trace.k = Some(order.k);
    trace.k_branch = Some(order.branch);
    trace.thresholds = order.thresholds;
    let realized = if order.k > 0 {
        Some(hankel2sys(&choice.estimate, order.k)?)
    } else {
        None
    };
    Ok(Identification {
        t,
        d_hat: choice.d_hat,
        k: order.k,
        trace,
        estimate: choice.estimate,
        realized,
    })
}

/// `β` and `R` of a known model, floored at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConstants {
    pub beta: f64,
    pub r: f64,
    pub horizon: usize,
    pub raw: NoiseToSignal,
}

pub fn oracle_constants(truth: &StateSpaceModel) -> Result<OracleConstants> {
    let horizon = toeplitz_horizon(truth)?;
    let raw = noise_to_signal(truth, horizon)?;
    Ok(OracleConstants {
        beta: raw.beta.max(1.0),
        r: raw.r.max(1.0),
        horizon,
        raw,
    })
}

/// Errors of an identified model against the balanced truncation of the
/// truth to the same order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub hankel_err: f64,
    pub hinf_err: f64,
    pub impulse_err: f64,
    /// `None` when the truth has fewer than `k` nonzero Hankel singular values.
    pub param_err: Option<f64>,
}

pub fn score(
    id: &Identification,
    truth: &StateSpaceModel,
    horizon: usize,
    grid: usize,
) -> Result<Option<Score>> {
    let Some(est) = &id.realized else {
        return Ok(None);
    };
    let reference = RealizedModel::from_truth(truth, id.k)?;
    let dist = compare_models(&est.model, &reference.model, horizon, grid)?;
    let param_err = if reference.k == est.k {
        Some(aligned_param_error(&reference, est)?)
    } else {
        None
    };
    Ok(Some(Score {
        hankel_err: dist.hankel_err,
        hinf_err: dist.hinf_err,
        impulse_err: dist.impulse_err,
        param_err,
    }))
}

/// One simulated identification run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Experiment {
    pub seed: u64,
    /// Samples simulated: `T + 2 max 𝒟(T)`.
    pub length: usize,
    pub identification: Identification,
    pub score: Option<Score>,
}

/// Simulates enough data for `T` regression columns, identifies, and scores.
pub fn run_experiment(
    truth: &StateSpaceModel,
    cfg: &SelectionConfig,
    t: usize,
    noise: NoiseSpec,
    seed: u64,
    horizon: usize,
    grid: usize,
) -> Result<Experiment> {
    if t == 0 {
        return Err(SysIdError::InvalidArgument("T must be positive".into()));
    }
    let length = required_length(cfg, t);
    let traj = simulate(truth, length, noise, seed)?;
    let identification = identify(&traj, cfg)?;
    let score = score(&identification, truth, horizon, grid)?;
    Ok(Experiment {
        seed,
        length,
        identification,
        score,
    })
}
