//! Trajectory generation and the benchmark systems used in experiments.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysIdError};
use crate::lti::StateSpaceModel;

const INPUT_STREAM: u64 = 1;
const PROCESS_STREAM: u64 = 2;
const OUTPUT_STREAM: u64 = 3;
const FIXTURE_STREAM: u64 = 4;

/// Independent reproducible generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize, std: f64) -> DMatrix<f64> {
    // Column-major fill so each time step's vector is contiguous in the stream.
    DMatrix::from_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| std * rng.sample::<f64, _>(StandardNormal)),
    )
}

/// Standard deviations of the input, process noise and output noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub eta_std: f64,
    pub w_std: f64,
    pub input_std: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            eta_std: 1.0,
            w_std: 1.0,
            input_std: 1.0,
        }
    }
}

impl NoiseSpec {
    /// Unit-variance inputs and no noise.
    pub fn noiseless() -> Self {
        Self {
            eta_std: 0.0,
            w_std: 0.0,
            input_std: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta_std", self.eta_std),
            ("w_std", self.w_std),
            ("input_std", self.input_std),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SysIdError::InvalidArgument(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Paired input/output samples; column `t` holds time step `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    inputs: DMatrix<f64>,
    outputs: DMatrix<f64>,
    /// Seed the trajectory was generated from, if simulated.
    pub seed: Option<u64>,
    /// Noise levels used, if simulated.
    pub noise: Option<NoiseSpec>,
    /// Set when the generating model was not Schur stable.
    pub unstable: bool,
}

impl Trajectory {
    /// Wraps recorded data: `inputs` is `m × L`, `outputs` is `p × L`.
    pub fn from_data(inputs: DMatrix<f64>, outputs: DMatrix<f64>) -> Result<Self> {
        if inputs.ncols() != outputs.ncols() {
            return Err(SysIdError::Dimension(format!(
                "{} input samples but {} output samples",
                inputs.ncols(),
                outputs.ncols()
            )));
        }
        if inputs.nrows() == 0 || outputs.nrows() == 0 {
            return Err(SysIdError::Dimension(
                "trajectory needs at least one input and one output channel".into(),
            ));
        }
        if inputs.iter().chain(outputs.iter()).any(|v| !v.is_finite()) {
            return Err(SysIdError::InvalidArgument(
                "trajectory contains non-finite samples".into(),
            ));
        }
        Ok(Self {
            inputs,
            outputs,
            seed: None,
            noise: None,
            unstable: false,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn m(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn p(&self) -> usize {
        self.outputs.nrows()
    }

    /// `m × L` input matrix.
    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    /// `p × L` output matrix.
    pub fn outputs(&self) -> &DMatrix<f64> {
        &self.outputs
    }

    /// Multiplies inputs and outputs by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            inputs: &self.inputs * c,
            outputs: &self.outputs * c,
            ..self.clone()
        }
    }

    /// The first `len` samples.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len > self.len() {
            return Err(SysIdError::InvalidArgument(format!(
                "prefix of length {len} requested from a trajectory of length {}",
                self.len()
            )));
        }
        Ok(Self {
            inputs: self.inputs.columns(0, len).into_owned(),
            outputs: self.outputs.columns(0, len).into_owned(),
            ..self.clone()
        })
    }
}

/// Simulates `total` steps with i.i.d. Gaussian inputs drawn from `seed`.
pub fn simulate(
    model: &StateSpaceModel,
    total: usize,
    noise: NoiseSpec,
    seed: u64,
) -> Result<Trajectory> {
    noise.validate()?;
    let mut rng = stream_rng(seed, INPUT_STREAM);
    let inputs = gaussian_matrix(&mut rng, model.m(), total, noise.input_std);
    simulate_with_input(model, inputs, noise, seed)
}

/// Simulates from `X₁ = 0` with a given `m × L` input sequence; the process and
/// output noise are drawn from `seed` (the input standard deviation is unused).
pub fn simulate_with_input(
    model: &StateSpaceModel,
    inputs: DMatrix<f64>,
    noise: NoiseSpec,
    seed: u64,
) -> Result<Trajectory> {
    noise.validate()?;
    if inputs.nrows() != model.m() {
        return Err(SysIdError::Dimension(format!(
            "model takes {} inputs, sequence has {}",
            model.m(),
            inputs.nrows()
        )));
    }
    if inputs.ncols() == 0 {
        return Err(SysIdError::InvalidArgument(
            "trajectory length must be positive".into(),
        ));
    }
    let total = inputs.ncols();
    let (n, p) = (model.n(), model.p());
    let (a, b, c) = (model.a(), model.b(), model.c());

    let mut eta_rng = stream_rng(seed, PROCESS_STREAM);
    let mut w_rng = stream_rng(seed, OUTPUT_STREAM);
    let mut outputs = DMatrix::zeros(p, total);
    let mut x = DVector::zeros(n);
    let mut next = DVector::zeros(n);
    for t in 0..total {
        let mut y = outputs.column_mut(t);
        y.gemv(1.0, c, &x, 0.0);
        if noise.w_std > 0.0 {
            for v in y.iter_mut() {
                *v += noise.w_std * w_rng.sample::<f64, _>(StandardNormal);
            }
        }
        next.gemv(1.0, a, &x, 0.0);
        next.gemv(1.0, b, &inputs.column(t), 1.0);
        if noise.eta_std > 0.0 {
            for v in next.iter_mut() {
                *v += noise.eta_std * eta_rng.sample::<f64, _>(StandardNormal);
            }
        }
        std::mem::swap(&mut x, &mut next);
    }

    Ok(Trajectory {
        inputs,
        outputs,
        seed: Some(seed),
        noise: Some(noise),
        unstable: !model.is_schur_stable(),
    })
}

/// FIR benchmark system with its dropped feedthrough coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFixture {
    pub model: StateSpaceModel,
    /// `w₀`, the constant term no feedthrough-free realization carries.
    pub feedthrough: f64,
    /// Raw weights `w₁ … w_order`.
    pub weights: Vec<f64>,
    pub rho: f64,
}

/// Shift-register realization of `Σ_{l=1}^{order} w_l ρ^l z^{-l}`.
pub fn fir_from_weights(weights: &[f64], rho: f64) -> Result<StateSpaceModel> {
    let order = weights.len();
    if order == 0 {
        return Err(SysIdError::InvalidArgument("FIR order must be positive".into()));
    }
    let a = DMatrix::from_fn(order, order, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
    let mut b = DMatrix::zeros(order, 1);
    b[(0, 0)] = 1.0;
    let mut g = rho;
    let c = DMatrix::from_iterator(
        1,
        order,
        weights.iter().map(|w| {
            let v = w * g;
            g *= rho;
            v
        }),
    );
    StateSpaceModel::new(c, a, b)
}

/// FIR system with weights `w_l ~ N(0, weight_std²)`, `l = 0 … order`.
pub fn fixture_fir(order: usize, rho: f64, weight_std: f64, seed: u64) -> Result<FirFixture> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(SysIdError::InvalidArgument(format!(
            "FIR decay rho must lie in (0, 1), got {rho}"
        )));
    }
    if !(weight_std > 0.0) {
        return Err(SysIdError::InvalidArgument(
            "FIR weight_std must be positive".into(),
        ));
    }
    let mut rng = stream_rng(seed, FIXTURE_STREAM);
    let feedthrough = weight_std * rng.sample::<f64, _>(StandardNormal);
    let weights: Vec<f64> = (0..order)
        .map(|_| weight_std * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(FirFixture {
        model: fir_from_weights(&weights, rho)?,
        feedthrough,
        weights,
        rho,
    })
}

/// The order-`n` system `M1` and its two-state approximation `M2`.
pub fn fixture_example1(n: usize, a: f64) -> Result<(StateSpaceModel, StateSpaceModel)> {
    if n <= 2 {
        return Err(SysIdError::InvalidArgument(format!(
            "example system needs n > 2, got {n}"
        )));
    }
    let mut a1 = DMatrix::from_fn(n, n, |i, j| if j == i + 1 { 1.0 } else { 0.0 });
    a1[(n - 1, 0)] = -a;
    let mut b1 = DMatrix::zeros(n, 1);
    b1[(n - 1, 0)] = 1.0;
    let c1 = b1.transpose();
    let m1 = StateSpaceModel::new(c1, a1, b1)?;

    let a2 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
    let b2 = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let c2 = b2.transpose();
    let m2 = StateSpaceModel::new(c2, a2, b2)?;
    Ok((m1, m2))
}

/// The three-state pair `(M0, M1)`: `M0` has a rank-1 Hankel operator and
/// `M1` a full-rank one whose second singular value is of order `ζβ`.
pub fn fixture_lowerbound(
    zeta: f64,
    beta: f64,
    r: f64,
) -> Result<(StateSpaceModel, StateSpaceModel)> {
    if !(zeta.abs() < 1.0) {
        return Err(SysIdError::InvalidArgument(format!(
            "|zeta| must be below 1, got {zeta}"
        )));
    }
    if !(beta > 0.0 && r > 0.0) {
        return Err(SysIdError::InvalidArgument(
            "beta and R must be positive".into(),
        ));
    }
    let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, zeta, 0.0, 0.0]);
    let s = beta.sqrt();
    let b0 = DMatrix::from_row_slice(3, 1, &[0.0, 0.0, s / r]);
    let b1 = DMatrix::from_row_slice(3, 1, &[0.0, s / r, s / r]);
    let c = DMatrix::from_row_slice(1, 3, &[0.0, 0.0, s * r]);
    Ok((
        StateSpaceModel::new(c.clone(), a.clone(), b0)?,
        StateSpaceModel::new(c, a, b1)?,
    ))
}

/// A random model with Gaussian `C`, `B` and a Gaussian `A` rescaled to
/// spectral radius `rho`.
pub fn fixture_random_stable(
    n: usize,
    p: usize,
    m: usize,
    rho: f64,
    seed: u64,
) -> Result<StateSpaceModel> {
    if n == 0 || p == 0 || m == 0 {
        return Err(SysIdError::InvalidArgument(
            "random model dimensions must be positive".into(),
        ));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(SysIdError::InvalidArgument(format!(
            "target spectral radius must lie in [0, 1), got {rho}"
        )));
    }
    let mut rng = stream_rng(seed, FIXTURE_STREAM);
    let mut a = gaussian_matrix(&mut rng, n, n, 1.0);
    let current = crate::lti::spectral_radius(&a);
    if current > 0.0 {
        a *= rho / current;
    }
    let b = gaussian_matrix(&mut rng, n, m, 1.0);
    let c = gaussian_matrix(&mut rng, p, n, 1.0);
    StateSpaceModel::new(c, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{hankel_singular_values, markov_parameters};

    #[test]
    fn impulse_response_appears_one_step_late() {
        let m = StateSpaceModel::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 0.5]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.1, 0.3]),
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
        )
        .unwrap();
        let mut u = DMatrix::zeros(1, 8);
        u[(0, 0)] = 1.0;
        let traj = simulate_with_input(&m, u, NoiseSpec::noiseless(), 0).unwrap();
        let markov = markov_parameters(&m, 7);
        assert_eq!(traj.outputs()[(0, 0)], 0.0);
        for (k, g) in markov.iter().enumerate() {
            assert!((traj.outputs()[(0, k + 1)] - g[(0, 0)]).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_input_without_noise_gives_zero_output() {
        let m = StateSpaceModel::scalar(1.0, 0.5, 1.0);
        let traj = simulate_with_input(&m, DMatrix::zeros(1, 20), NoiseSpec::noiseless(), 3).unwrap();
        assert!(traj.outputs().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let m = StateSpaceModel::scalar(1.0, 0.9, 1.0);
        let a = simulate(&m, 500, NoiseSpec::default(), 42).unwrap();
        let b = simulate(&m, 500, NoiseSpec::default(), 42).unwrap();
        let c = simulate(&m, 500, NoiseSpec::default(), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.outputs(), c.outputs());
    }

    #[test]
    fn unstable_models_are_flagged() {
        let m = StateSpaceModel::scalar(1.0, 1.01, 1.0);
        assert!(simulate(&m, 10, NoiseSpec::default(), 0).unwrap().unstable);
    }

    #[test]
    fn fir_with_unit_weights() {
        let m = fir_from_weights(&[1.0, 1.0, 1.0], 0.5).unwrap();
        let g: Vec<f64> = markov_parameters(&m, 5).iter().map(|k| k[(0, 0)]).collect();
        assert_eq!(g, vec![0.5, 0.25, 0.125, 0.0, 0.0]);
    }

    #[test]
    fn fir_shift_is_nilpotent() {
        let f = fixture_fir(150, 0.9, 5.0, 1).unwrap();
        assert_eq!(f.model.spectral_radius(), 0.0);
        assert_eq!(f.weights.len(), 150);
        let mut power = f.model.a().clone();
        for _ in 1..150 {
            power = &power * f.model.a();
        }
        assert!(power.iter().all(|&v| v == 0.0));
        assert!(f.model.c().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn example1_markov_structure() {
        let n = 21;
        let a = 1e-3;
        let (m1, m2) = fixture_example1(n, a).unwrap();
        let g1 = markov_parameters(&m1, 2 * n + 1);
        for (k, g) in g1.iter().enumerate() {
            let expected = match k {
                0 => 1.0,
                _ if k == n => -a,
                _ if k == 2 * n => a * a,
                _ => 0.0,
            };
            assert!((g[(0, 0)] - expected).abs() < 1e-18, "lag {k}");
        }
        let g2: Vec<f64> = markov_parameters(&m2, 4).iter().map(|k| k[(0, 0)]).collect();
        assert_eq!(g2, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn example1_without_coupling_matches_small_system() {
        let (m1, m2) = fixture_example1(5, 0.0).unwrap();
        let g1 = markov_parameters(&m1, 30);
        let g2 = markov_parameters(&m2, 30);
        assert_eq!(g1, g2);
    }

    #[test]
    fn lowerbound_hankel_ranks() {
        let (m0, m1) = fixture_lowerbound(0.5, 1.0, 1.0).unwrap();
        let s0 = hankel_singular_values(&m0).unwrap();
        assert_eq!(s0.iter().filter(|&&s| s > 1e-10).count(), 1);
        let s1 = hankel_singular_values(&m1).unwrap();
        let ratio = s1[0] / s1[1];
        assert!((ratio - (1.0 + 2f64.sqrt())).abs() < 1e-9, "{ratio}");
    }

    #[test]
    fn random_stable_hits_target_radius() {
        let m = fixture_random_stable(6, 2, 1, 0.8, 9).unwrap();
        assert!((m.spectral_radius() - 0.8).abs() < 1e-10);
    }
}
