mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use shs_lab::detection::*;
use shs_lab::experiment::initial_state;
use shs_lab::linalg::DiscreteStateSpace;
use shs_lab::probing::{window_steps, Channel, ProbeSignal};

const PROBE_R: f64 = 0.65;

fn probe(r: f64) -> ProbeSignal {
    ProbeSignal { channel: Channel::Delta, magnitude: r, tau0: TAU0 }
}

fn steps() -> usize {
    window_steps(TAU0, TS).unwrap()
}

#[test]
fn self_fit_recovers_the_observable_part_of_x0() {
    let systems = m1_discrete();
    let det = Detector::new(&systems, steps(), DEFAULT_SUBSAMPLE).unwrap();
    for seed in 0..3 {
        for (i, (sys, est)) in systems.iter().zip(det.estimators()).enumerate() {
            let x0 = initial_state(sys.n(), 14.7, 100 + seed);
            let w = synth_window(sys, &x0, probe(PROBE_R), steps());
            let fit = est.estimate(&w).unwrap();
            let n = null_basis(est.observability());
            assert_eq!(n.ncols(), sys.n() - est.rank(), "scenario {i}");
            let target = &x0 - &n * (n.transpose() * &x0);
            let err = (&fit.x0_hat - &target).norm() / x0.norm();
            assert!(err <= 1e-6, "scenario {i} seed {seed}: relative error {err:e}");
            let y_norm = w.samples.iter().map(|y| y.norm_squared()).sum::<f64>().sqrt();
            assert!(fit.residual <= 1e-8 * y_norm, "scenario {i}: residual {:e}", fit.residual);
        }
    }
}

#[test]
fn fully_observable_system_recovers_x0_exactly() {
    let a = DMatrix::from_row_slice(2, 2, &[-1.0, 3.0, -3.0, -1.0]);
    let model = shs_lab::ssbuild::StateSpaceModel::from_matrices(
        a,
        DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
        DMatrix::zeros(2, 0),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::zeros(1, 0),
    )
    .unwrap();
    let sys = shs_lab::linalg::discretize_zoh(&model, 1e-2).unwrap();
    let x0 = DVector::from_vec(vec![0.3, -1.7]);
    let w = synth_window(&sys, &x0, probe(2.0), 50);
    let fit = estimate_initial_state(&sys, &w, 1).unwrap();
    assert!((&fit.x0_hat - &x0).norm() <= 1e-10 * x0.norm());
}

#[test]
fn zero_window_gives_zero_estimate() {
    let systems = m1_discrete();
    for sys in &systems {
        let w = synth_window(sys, &DVector::zeros(sys.n()), ProbeSignal::off(Channel::Delta, TAU0), 1000);
        let fit = estimate_initial_state(sys, &w, DEFAULT_SUBSAMPLE).unwrap();
        assert_eq!(fit.residual, 0.0);
        assert_eq!(fit.x0_hat.amax(), 0.0);
    }
}

#[test]
fn generating_scenario_wins_every_cross_fit() {
    let systems = m1_discrete();
    let det = Detector::new(&systems, steps(), DEFAULT_SUBSAMPLE).unwrap();
    for seed in 0..3 {
        for (i, sys) in systems.iter().enumerate() {
            let x0 = initial_state(sys.n(), 14.7, 7 + seed);
            let v = det.detect(&synth_window(sys, &x0, probe(PROBE_R), steps())).unwrap();
            assert_eq!(v.detected, i, "residuals {:?}", v.residuals);
            for (j, r) in v.residuals.iter().enumerate() {
                if j != i {
                    assert!(*r > v.residuals[i], "pair ({i},{j}): {r} vs {}", v.residuals[i]);
                }
            }
        }
    }
}

#[test]
fn identical_scenarios_tie_to_the_lowest_index() {
    let s = m1_discrete().remove(2);
    let systems = vec![s.clone(), s.clone()];
    let x0 = initial_state(s.n(), 1.0, 3);
    let v = detect(&systems, &synth_window(&s, &x0, probe(PROBE_R), 500), DEFAULT_SUBSAMPLE).unwrap();
    assert_eq!(v.residuals[0], v.residuals[1]);
    assert_eq!(v.detected, 0);
    assert_eq!(argmin(&[2.0, 1.0, 1.0]), 1);
    assert_eq!(argmin(&[0.0, 0.0]), 0);
}

#[test]
fn verdict_is_invariant_under_residual_scaling() {
    let values = [3.2, 0.7, 0.7000001, 12.0];
    for scale in [1e-12, 0.5, 1.0, 7.0, 1e9] {
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        assert_eq!(argmin(&scaled), argmin(&values));
    }
    // scaling the whole window scales every residual by the same factor
    let systems = m1_discrete();
    let x0 = initial_state(systems[0].n(), 14.7, 5);
    let w = synth_window(&systems[3], &x0, probe(PROBE_R), 1000);
    let scaled = MeasurementWindow {
        samples: w.samples.iter().map(|y| y * 4.0).collect(),
        probe: probe(PROBE_R * 4.0),
        ..w.clone()
    };
    let a = detect(&systems, &w, DEFAULT_SUBSAMPLE).unwrap();
    let b = detect(&systems, &scaled, DEFAULT_SUBSAMPLE).unwrap();
    assert_eq!(a.detected, b.detected);
    for (ra, rb) in a.residuals.iter().zip(&b.residuals) {
        assert!((rb - 4.0 * ra).abs() <= 1e-9 * rb.max(1.0));
    }
}

#[test]
fn detection_is_deterministic() {
    let systems = m1_discrete();
    let x0 = initial_state(systems[0].n(), 14.7, 11);
    let w = synth_window(&systems[1], &x0, probe(PROBE_R), 2000);
    let a = detect(&systems, &w, DEFAULT_SUBSAMPLE).unwrap();
    let b = detect(&systems, &w, DEFAULT_SUBSAMPLE).unwrap();
    assert_eq!(a, b);
}

#[test]
fn family_of_one_always_detects_normal_operation() {
    let systems = m1_discrete();
    let only = &systems[..1];
    for (i, sys) in systems.iter().enumerate() {
        let x0 = initial_state(sys.n(), 14.7, i as u64);
        let v = detect(only, &synth_window(sys, &x0, probe(PROBE_R), 500), DEFAULT_SUBSAMPLE).unwrap();
        assert_eq!(v.detected, 0);
        assert_eq!(v.residuals.len(), 1);
    }
}

#[test]
fn noise_free_probed_window_from_second_contingency_is_identified() {
    let systems = m1_discrete();
    let x0 = initial_state(systems[2].n(), 14.7, 42);
    let v = detect(&systems, &synth_window(&systems[2], &x0, probe(PROBE_R), steps()), DEFAULT_SUBSAMPLE).unwrap();
    assert_eq!(v.detected, 2);
}

/// Without a probe, a contingency whose state is at rest, or moves only
/// along directions its outputs cannot see, leaves a silent window that every
/// candidate explains; the verdict then falls back to normal operation. The
/// probe exposes the contingency in the same situation.
#[test]
fn passive_detection_misses_an_adversarial_initial_state() {
    let systems = m1_discrete();
    let truth = 1;
    let est = InitialStateEstimator::new(&systems[truth], steps(), DEFAULT_SUBSAMPLE).unwrap();
    let null = null_basis(est.observability());
    assert!(null.ncols() > 0);
    let mut misses = 0;
    for seed in 0..5 {
        // seed 0 is the resting state, the rest are random hidden directions
        let c = initial_state(null.ncols(), 1.0, seed) * if seed == 0 { 0.0 } else { 14.7 };
        let x0 = &null * c;
        let off = detect(
            &systems,
            &synth_window(&systems[truth], &x0, ProbeSignal::off(Channel::Delta, TAU0), steps()),
            DEFAULT_SUBSAMPLE,
        )
        .unwrap();
        let y_scale = 14.7 * systems[truth].c.norm();
        assert!(off.residuals.iter().all(|&r| r <= 1e-9 * y_scale), "{:?}", off.residuals);
        if off.detected != truth {
            misses += 1;
        }
        let on =
            detect(&systems, &synth_window(&systems[truth], &x0, probe(PROBE_R), steps()), DEFAULT_SUBSAMPLE).unwrap();
        assert_eq!(on.detected, truth);
    }
    assert!(misses >= 1);
}

#[test]
fn sequence_report_scores_against_truth() {
    let systems = m1_discrete();
    let det = Detector::new(&systems, 1000, DEFAULT_SUBSAMPLE).unwrap();
    let truth = [0, 3, 1, 1, 2];
    let windows: Vec<MeasurementWindow> = truth
        .iter()
        .enumerate()
        .map(|(k, &a)| synth_window(&systems[a], &initial_state(systems[a].n(), 14.7, k as u64), probe(PROBE_R), 1000))
        .collect();
    let r = det.detect_sequence(&windows, Some(&truth)).unwrap();
    assert_eq!(r.detected, truth.to_vec());
    assert_eq!(r.matches, Some(5));
    assert_eq!(r.accuracy, Some(1.0));
    let wrong = [0, 0, 1, 1, 2];
    let r = det.detect_sequence(&windows, Some(&wrong)).unwrap();
    assert_eq!(r.accuracy, Some(0.8));
    assert!(det.detect_sequence(&windows, Some(&truth[..3])).is_err());
    let empty = det.detect_sequence(&[], None).unwrap();
    assert!(empty.detected.is_empty() && empty.accuracy.is_none());
}

#[test]
fn malformed_windows_are_rejected() {
    let systems: Vec<DiscreteStateSpace> = m1_discrete();
    let est = InitialStateEstimator::new(&systems[0], 100, 1).unwrap();
    let w = synth_window(&systems[0], &DVector::zeros(systems[0].n()), probe(PROBE_R), 50);
    assert!(matches!(est.estimate(&w), Err(shs_lab::Error::Dimension(_))));
    let mut w = synth_window(&systems[0], &DVector::zeros(systems[0].n()), probe(PROBE_R), 100);
    w.ts *= 2.0;
    assert!(est.estimate(&w).is_err());
    assert!(Detector::new(&[], 10, 1).is_err());
}

#[test]
fn subsampling_keeps_the_window_end() {
    assert_eq!(subsample_indices(10, 3), vec![0, 3, 6, 9, 10]);
    assert_eq!(subsample_indices(10, 5), vec![0, 5, 10]);
    assert_eq!(subsample_indices(4, 1), vec![0, 1, 2, 3, 4]);
    assert_eq!(subsample_indices(4, 0), vec![0, 1, 2, 3, 4]);
}
