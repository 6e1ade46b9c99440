use nalgebra::DMatrix;
use proptest::prelude::*;
use sysid_core::linalg::log_log_slope;
use sysid_core::selection::{
    candidate_set, choose_d, choose_k, effective_samples, known_gap_threshold, log_floor, tau,
    unknown_gap_threshold, GapBranch,
};
use sysid_core::simulate::{fir_from_weights, fixture_random_stable, simulate, NoiseSpec};
use sysid_core::{identify, SelectionConfig, Trajectory};

fn config(beta: f64, r: f64) -> SelectionConfig {
    let mut cfg = SelectionConfig::new(1, 1, beta, r);
    cfg.c_univ = Some(1.0);
    cfg
}

#[test]
fn joint_scaling_keeps_window() {
    let model = fixture_random_stable(3, 1, 1, 0.7, 4).unwrap();
    let traj = simulate(&model, 6000, NoiseSpec::default(), 4).unwrap();
    let cfg = config(3.0, 1.0);
    let base = choose_d(&traj, &cfg).unwrap();
    for c in [1e-3, 0.5, 40.0] {
        let scaled = choose_d(&traj.scaled(c), &cfg).unwrap();
        assert_eq!(scaled.trace.d0, base.trace.d0);
        assert_eq!(scaled.d_hat, base.d_hat);
    }
}

#[test]
fn memory_one_system_needs_the_smallest_window() {
    let model = fir_from_weights(&[1.0], 1.0).unwrap();
    let cfg = config(1.0, 1.0);
    let traj = simulate(&model, 10_000, NoiseSpec::noiseless(), 2).unwrap();
    let choice = choose_d(&traj, &cfg).unwrap();
    assert_eq!(choice.trace.d0, 1);
    assert!(!choice.trace.no_consistent_l);
    assert_eq!(choice.d_hat, log_floor(&cfg, choice.trace.t));
}

#[test]
fn zero_trajectory_passes_every_comparison() {
    let traj = Trajectory::from_data(DMatrix::zeros(1, 5000), DMatrix::zeros(1, 5000)).unwrap();
    let cfg = config(1.0, 1.0);
    let choice = choose_d(&traj, &cfg).unwrap();
    assert!(choice.trace.pairwise_gaps.iter().all(|g| g.gap == 0.0));
    assert_eq!(choice.trace.d0, choice.trace.candidate_ds[0]);
}

#[test]
fn trace_is_consistent() {
    let model = fixture_random_stable(4, 1, 1, 0.8, 6).unwrap();
    let traj = simulate(&model, 8000, NoiseSpec::default(), 6).unwrap();
    let cfg = config(4.0, 1.5);
    let id = identify(&traj, &cfg).unwrap();
    let trace = &id.trace;
    let n = trace.candidate_ds.len();
    assert_eq!(trace.pairwise_gaps.len(), n * (n - 1) / 2);
    assert!(trace.d_hat >= trace.d0);
    assert!(trace.d_hat == trace.log_floor.max(trace.d0) || trace.d_hat == trace.candidate_ds[n - 1]);
    assert_eq!(trace.t, effective_samples(&cfg, traj.len()).unwrap());
    assert_eq!(trace.k, Some(id.k));
    assert_eq!(trace.k_branch, Some(GapBranch::Unknown));
    assert!(id.k <= id.estimate.rank_budget());
}

#[test]
fn known_gap_threshold_decays_at_root_rate() {
    let mut cfg = config(2.0, 1.0);
    cfg.delta_plus = Some(0.1);
    let ts: Vec<f64> = (0..6).map(|i| 1e6 * 10f64.powi(i)).collect();
    let thr: Vec<f64> = ts
        .iter()
        .map(|&t| known_gap_threshold(0.1, 4, &cfg, t as usize).unwrap())
        .collect();
    let slope = log_log_slope(&ts, &thr);
    assert!((slope + 0.5).abs() <= 0.05, "slope {slope}");
}

#[test]
fn unknown_gap_threshold_decays_at_fourth_root_rate() {
    let cfg = config(2.0, 1.0);
    let ts: Vec<f64> = (0..6).map(|i| 1e6 * 10f64.powi(i)).collect();
    let thr: Vec<f64> = ts
        .iter()
        .map(|&t| unknown_gap_threshold(0.5, 2, 4, &cfg, t as usize).unwrap())
        .collect();
    let slope = log_log_slope(&ts, &thr);
    assert!((slope + 0.25).abs() <= 0.05, "slope {slope}");
}

#[test]
fn tau_vanishes_with_data() {
    let cfg = config(1.0, 1.0);
    let mut last = f64::INFINITY;
    for e in 2..12 {
        let v = tau(1.0, 4, &cfg, 10usize.pow(e)).unwrap();
        assert!(v < last);
        last = v;
    }
    assert!(last < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn doubling_data_never_drops_candidates(t in 100usize..1_000_000, c in 1e-3f64..10.0) {
        let mut cfg = config(1.0, 1.0);
        cfg.c_univ = Some(c);
        cfg.max_window = None;
        let small = candidate_set(&cfg, t).map(|s| s.len()).unwrap_or(0);
        let big = candidate_set(&cfg, 2 * t).map(|s| s.len()).unwrap_or(0);
        prop_assert!(big >= small);
    }

    #[test]
    fn order_never_shrinks_with_more_data(
        mut sigmas in prop::collection::vec(0.0f64..10.0, 1..12),
        t in 1000usize..100_000,
        known in any::<bool>(),
    ) {
        sigmas.sort_by(|a, b| b.total_cmp(a));
        let mut cfg = config(2.0, 1.5);
        if known {
            cfg.delta_plus = Some(0.2);
        }
        let k1 = choose_k(&sigmas, 5, &cfg, t).unwrap().k;
        let k2 = choose_k(&sigmas, 5, &cfg, 2 * t).unwrap().k;
        prop_assert!(k2 >= k1);
        prop_assert!(k2 <= sigmas.len());
    }
}
