mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use shs_lab::probing::*;
use shs_lab::ssbuild::{ScenarioFamily, StateKind, StateSpaceModel};
use shs_lab::Error;

fn custom(a: DMatrix<f64>, b1: DMatrix<f64>, c: DMatrix<f64>) -> StateSpaceModel {
    let (n, p) = (a.nrows(), c.nrows());
    StateSpaceModel::from_matrices(a, b1, DMatrix::zeros(n, 0), c, DMatrix::zeros(p, 0)).unwrap()
}

/// Series RL feeding a parallel RC, driven through the second input column.
fn rlc(r: f64) -> StateSpaceModel {
    let (l, c, rl) = (1e-3, 1e-4, 5.0);
    let a = DMatrix::from_row_slice(2, 2, &[-r / l, -1.0 / l, 1.0 / c, -1.0 / (rl * c)]);
    let b = DMatrix::from_row_slice(2, 3, &[0.0, 1.0 / l, 0.0, 0.0, 0.0, 0.0]);
    custom(a, b, DMatrix::identity(2, 2))
}

fn rk4_aggregate(s: &StateSpaceModel, channel: Channel, h: f64, steps: usize) -> Vec<f64> {
    let u = ProbeSignal { channel, magnitude: 1.0, tau0: 0.0 }.input(s.n_inputs());
    let bu = &s.b1 * u;
    let f = |x: &DVector<f64>| &s.a * x + &bu;
    let mut x = DVector::zeros(s.n());
    let mut out = Vec::with_capacity(steps + 1);
    out.push((&s.c * &x).sum());
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (h / 2.0)));
        let k3 = f(&(&x + &k2 * (h / 2.0)));
        let k4 = f(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        out.push((&s.c * &x).sum());
    }
    out
}

/// Pairwise max aggregate gap from a dense fixed-step integration.
fn dense_delta(family: &ScenarioFamily, channel: Channel, tau0: f64, h: f64) -> Vec<((usize, usize), f64)> {
    let steps = (tau0 / h).round() as usize;
    let traces: Vec<Vec<f64>> = family.scenarios.iter().map(|s| rk4_aggregate(s, channel, h, steps)).collect();
    let mut out = Vec::new();
    for i in 0..traces.len() {
        for j in i + 1..traces.len() {
            let g = traces[i].iter().zip(&traces[j]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            out.push(((i, j), g));
        }
    }
    out
}

#[test]
fn mu0_is_two_percent_of_largest_current() {
    let model = custom(DMatrix::from_element(1, 1, -1.0), DMatrix::zeros(1, 3), DMatrix::identity(1, 1));
    let mu0 = compute_mu0(&model, &DVector::from_element(1, 281.5)).unwrap();
    assert!((mu0 - 5.63).abs() < 1e-12);
    let mut two = custom(-DMatrix::identity(3, 3), DMatrix::zeros(3, 3), DMatrix::identity(3, 3));
    two.state_kinds = vec![StateKind::LineCurrent, StateKind::BusVoltage, StateKind::LoadCurrent];
    let mu0 = compute_mu0(&two, &DVector::from_vec(vec![-10.0, 500.0, 4.0])).unwrap();
    assert!((mu0 - 0.2).abs() < 1e-15, "voltages must not count: {mu0}");
}

#[test]
fn zero_equilibrium_cannot_be_designed_for() {
    let model = custom(DMatrix::from_element(1, 1, -1.0), DMatrix::zeros(1, 3), DMatrix::identity(1, 1));
    let mu0 = compute_mu0(&model, &DVector::zeros(1)).unwrap();
    assert_eq!(mu0, 0.0);
    let err = ProbingDesign::from_bounds(mu0, 1.0, 10.0, DEFAULT_MARGIN, Channel::Delta, TAU0, TS).unwrap_err();
    assert!(matches!(err, Error::DegenerateProbe(_)));
    let fam = ScenarioFamily::new(1, vec![rlc(1.0), rlc(2.0)]).unwrap();
    let err = design_mami(&fam, &DVector::zeros(2), Channel::Delta, 1e-3, 1e-5, DEFAULT_MARGIN).unwrap_err();
    assert!(matches!(err, Error::DegenerateProbe(_)));
}

#[test]
fn mu1_is_the_largest_output_gain() {
    let stable = |c: DMatrix<f64>| custom(-DMatrix::identity(2, 2), DMatrix::zeros(2, 3), c);
    let f = ScenarioFamily::new(1, vec![stable(DMatrix::identity(2, 2))]).unwrap();
    assert!((compute_mu1(&f).unwrap() - 1.0).abs() < 1e-15);
    let f = ScenarioFamily::new(1, vec![stable(DMatrix::identity(2, 2) * 2.0)]).unwrap();
    assert!((compute_mu1(&f).unwrap() - 2.0).abs() < 1e-15);
    let f = ScenarioFamily::new(
        1,
        vec![
            stable(DMatrix::identity(2, 2)),
            stable(DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0])),
            stable(DMatrix::identity(2, 2) * 2.0),
        ],
    )
    .unwrap();
    assert!((compute_mu1(&f).unwrap() - 3.0).abs() < 1e-14);
    assert!((compute_mu1(&m1_family()).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn unstable_scenario_is_refused() {
    let mut bad = rlc(1.0);
    bad.a[(0, 0)] = 1e4;
    let fam = ScenarioFamily::new(1, vec![rlc(1.0), bad]).unwrap();
    match compute_mu1(&fam) {
        Err(Error::NotHurwitz { index, max_re }) => {
            assert_eq!(index, 1);
            assert!(max_re > 0.0);
        }
        other => panic!("expected NotHurwitz, got {other:?}"),
    }
}

#[test]
fn delta_min_matches_dense_integration_on_small_family() {
    let fam = ScenarioFamily::new(1, vec![rlc(1.0), rlc(2.0), rlc(4.0)]).unwrap();
    let (tau0, ts) = (1e-2, 1e-5);
    let scan = compute_delta_min(&fam, Channel::Delta, tau0, ts, false).unwrap();
    let dense = dense_delta(&fam, Channel::Delta, tau0, ts / 10.0);
    for (got, want) in scan.pairs.iter().zip(&dense) {
        assert_eq!(got.0, want.0);
        assert!(rel_err(got.1, want.1, 1e-12) < 1e-4, "{:?}: {} vs {}", got.0, got.1, want.1);
    }
    let dense_min = dense.iter().copied().fold(((0, 0), f64::INFINITY), |b, p| if p.1 < b.1 { p } else { b });
    assert!(rel_err(scan.delta_min, dense_min.1, 1e-12) < 1e-4);
    assert_eq!(scan.argmin_pair, dense_min.0);
}

#[test]
fn delta_min_matches_dense_integration_on_first_segment() {
    let fam = m1_family();
    let scan = compute_delta_min(&fam, Channel::Delta, TAU0, TS, false).unwrap();
    let dense = dense_delta(&fam, Channel::Delta, TAU0, TS / 10.0);
    for (got, want) in scan.pairs.iter().zip(&dense) {
        assert!(rel_err(got.1, want.1, 1e-9) < 1e-3, "{:?}: {} vs {}", got.0, got.1, want.1);
    }
    assert!(scan.delta_min > 0.0);
    assert_eq!(scan.pairs.len(), 6);
}

#[test]
fn identical_scenarios_are_indistinguishable() {
    let fam = ScenarioFamily::new(1, vec![rlc(1.0), rlc(2.0), rlc(1.0)]).unwrap();
    match compute_delta_min(&fam, Channel::Delta, 1e-3, 1e-5, false) {
        Err(Error::Indistinguishable(i, j)) => assert_eq!((i, j), (0, 2)),
        other => panic!("expected Indistinguishable, got {other:?}"),
    }
    let scan = scan_delta(&fam, Channel::Delta, 1e-3, 1e-5, false).unwrap();
    assert_eq!(scan.delta_min, 0.0);
    assert!(design_mami(&fam, &DVector::from_element(2, 1.0), Channel::Delta, 1e-3, 1e-5, DEFAULT_MARGIN).is_err());
}

#[test]
fn gap_is_symmetric_and_subfamilies_never_shrink_delta() {
    let fam = m1_family();
    let traces = step_responses(&fam, Channel::Delta, 1e-3, TS).unwrap();
    for i in 0..traces.len() {
        for j in 0..traces.len() {
            assert_eq!(max_gap(&traces[i], &traces[j], false), max_gap(&traces[j], &traces[i], false));
            assert_eq!(max_gap(&traces[i], &traces[j], true), max_gap(&traces[j], &traces[i], true));
        }
        assert_eq!(max_gap(&traces[i], &traces[i], false), 0.0);
    }
    let full = scan_delta(&fam, Channel::Delta, 1e-3, TS, false).unwrap().delta_min;
    for drop in 1..fam.len() {
        let mut sub = fam.scenarios.clone();
        sub.remove(drop);
        let sub = ScenarioFamily::new(1, sub).unwrap();
        let d = scan_delta(&sub, Channel::Delta, 1e-3, TS, false).unwrap().delta_min;
        assert!(d >= full, "dropping {drop}: {d} < {full}");
    }
}

#[test]
fn window_must_be_whole_number_of_samples() {
    assert_eq!(window_steps(0.01, 1e-6).unwrap(), 10_000);
    assert_eq!(window_steps(0.6, 0.01).unwrap(), 60);
    assert!(window_steps(0.01, 3e-3).is_err());
    assert!(window_steps(0.0, 1e-6).is_err());
    assert!(scan_delta(&m1_family(), Channel::Delta, 0.01, 3e-3, false).is_err());
}

#[test]
fn published_threshold_arithmetic() {
    let r0 = threshold(5.63, 1.0, 112.15);
    assert!((r0 - 0.100401).abs() < 5e-7, "{r0}");
    assert!(ProbingDesign::new(5.63, 1.0, 112.15, 0.101, Channel::Delta, TAU0, TS).is_ok());
    assert!(ProbingDesign::new(5.63, 1.0, 112.15, 0.1, Channel::Delta, TAU0, TS).is_err());
}

#[test]
fn threshold_scales_linearly() {
    let base = threshold(2.0, 3.0, 5.0);
    assert!((threshold(4.0, 3.0, 5.0) - 2.0 * base).abs() < 1e-15);
    assert!((threshold(2.0, 6.0, 5.0) - 2.0 * base).abs() < 1e-15);
    assert!((threshold(2.0, 3.0, 10.0) - 0.5 * base).abs() < 1e-15);
}

#[test]
fn design_on_first_segment_exceeds_threshold() {
    let fam = m1_family();
    let eq = fam.nominal_equilibrium();
    let d = design_mami(&fam, &eq, Channel::Delta, TAU0, TS, DEFAULT_MARGIN).unwrap();
    assert!(d.r > d.r0);
    assert!((d.r - DEFAULT_MARGIN * d.r0).abs() <= 1e-15 * d.r);
    assert!((d.r0 - 2.0 * d.mu0 * d.mu1 / d.delta_min).abs() <= 1e-15 * d.r0);
    assert_eq!(d.mu1, 1.0);
    assert!(d.argmin_pair.is_some());
    let sig = d.signal();
    assert_eq!(sig.input(3), DVector::from_vec(vec![0.0, d.r, 0.0]));
    let json = serde_json::to_value(&d).unwrap();
    assert!(json.get("R0").is_some() && json.get("R").is_some());
}

#[test]
fn channel_selects_input_column() {
    for (c, i) in [(Channel::D, 0), (Channel::Delta, 1), (Channel::MA, 2)] {
        assert_eq!(c.index(), i);
        assert_eq!(Channel::from_index(i).unwrap(), c);
        let u = ProbeSignal { channel: c, magnitude: 2.5, tau0: TAU0 }.input(3);
        assert_eq!(u[i], 2.5);
        assert_eq!(u.sum(), 2.5);
    }
    assert!(Channel::from_index(3).is_err());
    assert_eq!(ProbeSignal::off(Channel::Delta, TAU0).input(3), DVector::zeros(3));
}
