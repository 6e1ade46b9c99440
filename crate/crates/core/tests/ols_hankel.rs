mod common;

use common::max_abs;
use nalgebra::DMatrix;
use proptest::prelude::*;
use sysid_core::linalg::{log_log_slope, spectral_norm};
use sysid_core::lti::{build_hankel, markov_parameters};
use sysid_core::ols::{build_regression, covariance_condition, estimate_hankel};
use sysid_core::pipeline::oracle_constants;
use sysid_core::simulate::{fir_from_weights, fixture_fir, simulate, NoiseSpec};
use sysid_core::StateSpaceModel;

fn truth_hankel(model: &StateSpaceModel, d: usize) -> DMatrix<f64> {
    build_hankel(model, 0, d, d).unwrap().data
}

/// Part of `Ỹ⁺` not explained by `H Ũ⁻` on noise-free data, assembled by
/// direct convolution `y[t] = Σ_j g_j u[t−1−j]`: the lags `j < i` (future
/// inputs) and `j ≥ i + d` (inputs older than the window).
fn unexplained_outputs(model: &StateSpaceModel, u: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let len = u.ncols();
    let t = len - 2 * d;
    let g: Vec<f64> = markov_parameters(model, len).iter().map(|m| m[(0, 0)]).collect();
    DMatrix::from_fn(d, t, |i, l| {
        let time = l + d + i;
        (0..time)
            .filter(|&j| j < i || j >= i + d)
            .map(|j| g[j] * u[(0, time - 1 - j)])
            .sum()
    })
}

#[test]
fn noise_free_error_is_the_projected_residual() {
    let model = StateSpaceModel::scalar(1.0, 0.5, 1.0);
    for (len, d, seed) in [(206, 3, 1), (1000, 5, 2), (4000, 2, 3)] {
        let traj = simulate(&model, len, NoiseSpec::noiseless(), seed).unwrap();
        let bundle = build_regression(&traj, d).unwrap();
        let est = estimate_hankel(&traj, d, 0.0).unwrap();
        let residual = unexplained_outputs(&model, traj.inputs(), d);
        let explained = truth_hankel(&model, d) * &bundle.u_minus;
        assert!(max_abs(&(&bundle.y_plus - explained - &residual)) <= 1e-12);
        let predicted = (residual * bundle.u_minus.transpose())
            * bundle.v_t.clone().try_inverse().unwrap();
        let actual = &est.h_hat - truth_hankel(&model, d);
        assert!(max_abs(&(actual - predicted)) <= 1e-10, "len {len}, d {d}");
    }
}

#[test]
fn pure_delay_system_is_recovered_exactly() {
    let model = fir_from_weights(&[0.0, 0.0, 1.0], 0.5).unwrap();
    let traj = simulate(&model, 206, NoiseSpec::noiseless(), 11).unwrap();
    let est = estimate_hankel(&traj, 3, 0.0).unwrap();
    assert!(max_abs(&(&est.h_hat - truth_hankel(&model, 3))) <= 1e-8);
}

#[test]
fn noise_free_error_shrinks_at_root_rate() {
    let model = StateSpaceModel::scalar(1.0, 0.5, 1.0);
    let d = 3;
    let lengths = [500usize, 2000, 8000, 32000];
    let errors: Vec<f64> = lengths
        .iter()
        .map(|&t| {
            let errs: Vec<f64> = (0..20)
                .map(|seed| {
                    let traj = simulate(&model, t + 2 * d, NoiseSpec::noiseless(), seed).unwrap();
                    let est = estimate_hankel(&traj, d, 0.0).unwrap();
                    spectral_norm(&(&est.h_hat - truth_hankel(&model, d)))
                })
                .collect();
            errs.iter().sum::<f64>() / errs.len() as f64
        })
        .collect();
    let xs: Vec<f64> = lengths.iter().map(|&t| t as f64).collect();
    let slope = log_log_slope(&xs, &errors);
    assert!((-0.6..=-0.4).contains(&slope), "slope {slope}");
}

#[test]
fn covariance_concentrates_for_short_windows() {
    let model = StateSpaceModel::scalar(1.0, 0.5, 1.0);
    let (d, t) = (2, 10_000);
    let ok = (0..100)
        .filter(|&seed| {
            let traj = simulate(&model, t + 2 * d, NoiseSpec::default(), seed).unwrap();
            covariance_condition(&estimate_hankel(&traj, d, 0.0).unwrap()).ok
        })
        .count();
    assert!(ok >= 99, "{ok} of 100");
}

#[test]
fn single_lag_covariance_is_sample_variance() {
    let model = StateSpaceModel::scalar(1.0, 0.5, 1.0);
    let traj = simulate(&model, 40_002, NoiseSpec::default(), 21).unwrap();
    let est = estimate_hankel(&traj, 1, 0.0).unwrap();
    let report = covariance_condition(&est);
    assert_eq!(report.low, report.high);
    assert!((report.low - 1.0).abs() <= 0.03, "ratio {}", report.low);
    let u = traj.inputs().columns(0, est.t);
    let variance = u.iter().map(|v| v * v).sum::<f64>() / est.t as f64;
    assert!((report.low - variance).abs() <= 1e-12);
}

#[test]
fn zero_inputs_fail_the_covariance_check() {
    let traj = sysid_core::Trajectory::from_data(DMatrix::zeros(1, 50), DMatrix::zeros(1, 50)).unwrap();
    let est = estimate_hankel(&traj, 2, 0.0).unwrap();
    let report = covariance_condition(&est);
    assert!(!report.ok);
    assert_eq!(report.low, 0.0);
    assert!(est.rank_deficient);
    assert_eq!(max_abs(&est.h_hat), 0.0);
}

#[test]
fn more_data_reduces_noisy_error() {
    let model = StateSpaceModel::scalar(1.0, 0.5, 1.0);
    let d = 3;
    let mean_error = |t: usize| {
        (0..20)
            .map(|seed| {
                let traj = simulate(&model, t + 2 * d, NoiseSpec::default(), 500 + seed).unwrap();
                let est = estimate_hankel(&traj, d, 0.0).unwrap();
                spectral_norm(&(&est.h_hat - truth_hankel(&model, d)))
            })
            .sum::<f64>()
            / 20.0
    };
    let coarse = mean_error(1000);
    let fine = mean_error(4000);
    assert!(fine <= 0.7 * coarse, "{fine} vs {coarse}");
}

#[test]
fn fir_error_within_rate_bound() {
    let fir = fixture_fir(30, 0.9, 5.0, 7).unwrap();
    let oracle = oracle_constants(&fir.model).unwrap();
    let (d, t, delta) = (8usize, 1usize << 14, 0.05);
    let traj = simulate(&fir.model, t + 2 * d, NoiseSpec::default(), 99).unwrap();
    let est = estimate_hankel(&traj, d, 0.0).unwrap();
    let err = spectral_norm(&(&est.h_hat - truth_hankel(&fir.model, d)));
    let tf = t as f64;
    let bound = oracle.beta * oracle.r * (d as f64).sqrt()
        * ((d as f64 + (tf / delta).ln()) / tf).sqrt();
    assert!(err <= bound, "{err} > {bound}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn joint_scaling_leaves_estimate_unchanged(c in prop_oneof![1e-3f64..1e-1, 1e1f64..1e3], seed in any::<u64>(), d in 1usize..5) {
        let model = sysid_core::simulate::fixture_random_stable(3, 2, 2, 0.7, seed).unwrap();
        let traj = simulate(&model, 300, NoiseSpec::default(), seed).unwrap();
        let base = estimate_hankel(&traj, d, 0.0).unwrap();
        let scaled = estimate_hankel(&traj.scaled(c), d, 0.0).unwrap();
        prop_assert!(max_abs(&(&scaled.h_hat - &base.h_hat)) <= 1e-10 * max_abs(&base.h_hat).max(1.0));
    }

    #[test]
    fn gram_matrix_of_past_inputs(seed in any::<u64>(), d in 1usize..6) {
        let model = sysid_core::simulate::fixture_random_stable(2, 1, 2, 0.5, seed).unwrap();
        let traj = simulate(&model, 80, NoiseSpec::default(), seed).unwrap();
        let bundle = build_regression(&traj, d).unwrap();
        prop_assert_eq!(bundle.t(), 80 - 2 * d);
        prop_assert_eq!(&bundle.v_t, &(&bundle.u_minus * bundle.u_minus.transpose()));
    }
}
