mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use shs_lab::experiment::*;
use shs_lab::linalg::zoh_matrices;
use shs_lab::probing::{Channel, ProbeSignal};
use shs_lab::ssbuild::{build_family, ContingencySpec, ScenarioFamily, StateSpaceModel};
use shs_lab::Error;

fn short_config(seed: u64, k: usize) -> ExperimentConfig {
    ExperimentConfig {
        tau: 0.02,
        tau0: 0.002,
        ts: 1e-5,
        intervals: k,
        seed,
        noise_sigma: 0.0,
        subsample: 5,
        x0_bound: None,
    }
}

fn probe(cfg: &ExperimentConfig, r: f64) -> ProbeSignal {
    ProbeSignal { channel: Channel::Delta, magnitude: r, tau0: cfg.tau0 }
}

#[test]
fn scenario_frequencies_are_uniform() {
    let mut counts = [0usize; 4];
    for seed in 0..1000 {
        let s = generate_sequence(40, 4, seed).unwrap();
        assert_eq!(s.alphas.len(), 40);
        for a in s.alphas {
            counts[a] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    for c in counts {
        let f = c as f64 / total as f64;
        assert!((f - 0.25).abs() <= 0.05, "frequency {f}");
    }
    let lib = sequence_frequencies(40, 4, 0..1000).unwrap();
    for (a, f) in lib {
        assert_eq!(f, counts[a] as f64 / total as f64);
    }
}

#[test]
fn sequences_are_deterministic_per_seed() {
    assert_eq!(generate_sequence(40, 4, 9).unwrap(), generate_sequence(40, 4, 9).unwrap());
    assert_ne!(generate_sequence(40, 4, 9).unwrap(), generate_sequence(40, 4, 10).unwrap());
    assert_eq!(generate_sequence(1, 4, 3).unwrap().alphas.len(), 1);
    assert!(generate_sequence(5, 0, 3).is_err());
    assert_eq!(initial_state(5, 2.0, 1), initial_state(5, 2.0, 1));
}

#[test]
fn state_is_carried_across_interval_boundaries() {
    let fam = m1_family();
    let cfg = short_config(3, 6);
    let seq = SwitchingSequence { alphas: vec![0, 3, 3, 1, 2, 0] };
    let pr = probe(&cfg, 0.65);
    let out = run_experiment(&fam, &pr, &cfg, &seq, 14.7).unwrap();
    assert_eq!(out.boundary_states.len(), 7);
    assert_eq!(out.boundary_states[0], initial_state(fam.n(), 14.7, 3));
    for (k, &a) in seq.alphas.iter().enumerate() {
        let s = &fam.scenarios[a];
        let x = &out.boundary_states[k];
        // the recorded window starts from the carried state
        let y0 = &s.c * x;
        assert!((&out.windows[k].samples[0] - &y0).amax() <= 1e-12 * y0.amax().max(1.0));
        // one exact step over the probed window, then unforced relaxation
        let (ad_w, bd_w) = zoh_matrices(&s.a, &s.b1, cfg.tau0).unwrap();
        let (ad_r, _) = zoh_matrices(&s.a, &DMatrix::zeros(s.n(), 0), cfg.tau - cfg.tau0).unwrap();
        let want = &ad_r * (&ad_w * x + &bd_w * pr.input(3));
        let got = &out.boundary_states[k + 1];
        assert!((got - &want).amax() <= 1e-8 * want.amax().max(1.0), "interval {k}");
        assert_eq!(out.windows[k].t_start, k as f64 * cfg.tau);
        assert_eq!(out.windows[k].samples.len(), 201);
    }
}

#[test]
fn accuracy_is_matches_over_intervals() {
    let fam = m1_family();
    let mut cfg = short_config(5, 12);
    cfg.noise_sigma = 0.5;
    let seq = generate_sequence(cfg.intervals, fam.len(), cfg.seed).unwrap();
    let out = run_experiment(&fam, &probe(&cfg, 0.0), &cfg, &seq, 14.7).unwrap();
    let matches = seq.alphas.iter().zip(&out.report.detected).filter(|(a, b)| a == b).count();
    assert_eq!(out.report.matches, Some(matches));
    assert_eq!(out.accuracy(), matches as f64 / cfg.intervals as f64);
    let again = run_experiment(&fam, &probe(&cfg, 0.0), &cfg, &seq, 14.7).unwrap();
    assert_eq!(again.report, out.report);
}

#[test]
fn single_interval_with_normal_only_family() {
    let fam = build_family(&reference_segments()[0], &[ContingencySpec::Normal]).unwrap();
    let cfg = short_config(1, 1);
    let seq = generate_sequence(1, 1, 1).unwrap();
    let out = run_experiment(&fam, &probe(&cfg, 0.65), &cfg, &seq, 14.7).unwrap();
    assert_eq!(out.report.detected, vec![0]);
    assert_eq!(out.accuracy(), 1.0);
}

#[test]
fn noise_free_probed_run_is_exact() {
    let fam = m1_family();
    let cfg = short_config(2, 10);
    let seq = generate_sequence(cfg.intervals, fam.len(), cfg.seed).unwrap();
    let out = run_experiment(&fam, &probe(&cfg, 0.65), &cfg, &seq, 14.7).unwrap();
    assert_eq!(out.accuracy(), 1.0);
}

fn scalar_family(lambda: f64) -> ScenarioFamily {
    let m = StateSpaceModel::from_matrices(
        DMatrix::from_element(1, 1, lambda),
        DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]),
        DMatrix::zeros(1, 0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::zeros(1, 0),
    )
    .unwrap();
    ScenarioFamily::new(1, vec![m]).unwrap()
}

#[test]
fn eigen_report_flags_unstable_scenarios() {
    let r = eigen_report(&m1_family()).unwrap();
    assert!(r.all_stable);
    assert_eq!(r.spectra.len(), 4);
    assert!(r.spectra.iter().all(|s| s.max_real < 0.0 && s.eigenvalues.len() == 18));
    let bad = eigen_report(&scalar_family(1.0)).unwrap();
    assert!(!bad.all_stable);
    assert_eq!(bad.spectra[0].max_real, 1.0);
    let csv = r.to_csv().unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 18);
    assert!(csv.starts_with("alpha,name,re,im"));
}

#[test]
fn runaway_scenario_aborts_with_interval_index() {
    let fam = scalar_family(1e4);
    let cfg = short_config(1, 3);
    let seq = SwitchingSequence { alphas: vec![0, 0, 0] };
    match run_experiment(&fam, &probe(&cfg, 1.0), &cfg, &seq, 1.0) {
        Err(Error::Diverged { interval }) => assert!(interval < 3),
        other => panic!("expected divergence, got {:?}", other.map(|o| o.report)),
    }
}

#[test]
fn config_validation() {
    let ok = short_config(1, 1);
    assert!(ok.validate().is_ok());
    assert!(ExperimentConfig { intervals: 0, ..ok.clone() }.validate().is_err());
    assert!(ExperimentConfig { tau0: 0.005, ..ok.clone() }.validate().is_err());
    assert!(ExperimentConfig { tau: 0.020005, ..ok.clone() }.validate().is_err());
    assert!(ExperimentConfig { noise_sigma: -1.0, ..ok.clone() }.validate().is_err());
    assert!(ExperimentConfig { subsample: 0, ..ok.clone() }.validate().is_err());
    let fam = m1_family();
    let seq = SwitchingSequence { alphas: vec![4] };
    assert!(run_experiment(&fam, &probe(&ok, 1.0), &ok, &seq, 1.0).is_err());
    let wrong_window = ProbeSignal { channel: Channel::Delta, magnitude: 1.0, tau0: 0.001 };
    let seq = SwitchingSequence { alphas: vec![0] };
    assert!(run_experiment(&fam, &wrong_window, &ok, &seq, 1.0).is_err());
}

#[test]
fn config_document_uses_capital_k() {
    let cfg: ExperimentConfig = serde_json::from_str(r#"{"tau":0.6,"tau0":0.01,"ts":1e-6,"K":40,"seed":1}"#).unwrap();
    assert_eq!(cfg.intervals, 40);
    assert_eq!(cfg.noise_sigma, 0.0);
    assert_eq!(cfg.subsample, 10);
    let v = serde_json::to_value(&cfg).unwrap();
    assert_eq!(v["K"], 40);
    let _ = DVector::<f64>::zeros(0);
}
