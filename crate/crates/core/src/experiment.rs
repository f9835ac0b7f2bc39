//! Switching experiment: a random scenario sequence, the true switched
//! system simulated with state carried across interval boundaries, a probe
//! at the start of every interval, and detection on the recorded windows.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{DetectionReport, Detector, MeasurementWindow, DEFAULT_SUBSAMPLE};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, is_hurwitz, simulate, DiscreteStateSpace, Signal};
use crate::probing::{window_steps, ProbeSignal};
use crate::ssbuild::ScenarioFamily;

const SEQUENCE_STREAM: u64 = 0;
const X0_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

fn default_subsample() -> usize {
    DEFAULT_SUBSAMPLE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Interval length, s.
    pub tau: f64,
    /// Detection window at the start of each interval, s.
    pub tau0: f64,
    /// Sample period, s.
    pub ts: f64,
    #[serde(rename = "K")]
    pub intervals: usize,
    pub seed: u64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_subsample")]
    pub subsample: usize,
    /// Half-width of the uniform box the initial deviation is drawn from.
    /// `None` uses the design's `mu0`.
    #[serde(default)]
    pub x0_bound: Option<f64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.intervals < 1 {
            return bad("K must be >= 1".into());
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad(format!("tau = {} must be > 0", self.tau));
        }
        if self.tau0 > self.tau / 10.0 {
            return bad(format!("tau0 = {} must be <= tau / 10 = {}", self.tau0, self.tau / 10.0));
        }
        window_steps(self.tau0, self.ts)?;
        window_steps(self.tau, self.ts)?;
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma = {} must be >= 0", self.noise_sigma));
        }
        if self.subsample == 0 {
            return bad("subsample must be >= 1".into());
        }
        if let Some(b) = self.x0_bound {
            if !(b.is_finite() && b >= 0.0) {
                return bad(format!("x0_bound = {b} must be >= 0"));
            }
        }
        Ok(())
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchingSequence {
    pub alphas: Vec<usize>,
}

/// `k` i.i.d. uniform draws over `0..m`.
pub fn generate_sequence(intervals: usize, scenarios: usize, seed: u64) -> Result<SwitchingSequence> {
    if scenarios == 0 {
        return Err(Error::InvalidArgument("no scenarios to draw from".into()));
    }
    let dist = Uniform::new(0, scenarios).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut r = rng(seed, SEQUENCE_STREAM);
    Ok(SwitchingSequence { alphas: (0..intervals).map(|_| dist.sample(&mut r)).collect() })
}

/// Uniform draw from `[-bound, bound]^n`.
pub fn initial_state(n: usize, bound: f64, seed: u64) -> DVector<f64> {
    if bound == 0.0 {
        return DVector::zeros(n);
    }
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let mut r = rng(seed, X0_STREAM);
    DVector::from_fn(n, |_, _| dist.sample(&mut r))
}

/// Discretized scenarios plus the exact transition over the probe-free
/// remainder of an interval.
#[derive(Clone, Debug)]
pub struct SwitchedSimulator {
    pub window: Vec<DiscreteStateSpace>,
    pub relax: Vec<DMatrix<f64>>,
    pub stable: Vec<bool>,
    pub steps: usize,
}

impl SwitchedSimulator {
    pub fn new(family: &ScenarioFamily, tau: f64, tau0: f64, ts: f64) -> Result<Self> {
        let steps = window_steps(tau0, ts)?;
        let window = family.discretize(ts)?;
        let rest = tau - tau0;
        let relax = family
            .scenarios
            .par_iter()
            .map(|s| if rest > 0.0 { (&s.a * rest).exp() } else { DMatrix::identity(s.n(), s.n()) })
            .collect();
        let stable = family.scenarios.iter().map(|s| is_hurwitz(&s.a)).collect::<Result<Vec<_>>>()?;
        Ok(SwitchedSimulator { window, relax, stable, steps })
    }
}

/// Everything recorded by one run.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub sequence: SwitchingSequence,
    pub windows: Vec<MeasurementWindow>,
    /// State at the start of every interval, plus the final state.
    pub boundary_states: Vec<DVector<f64>>,
    pub report: DetectionReport,
}

impl ExperimentOutcome {
    pub fn accuracy(&self) -> f64 {
        self.report.accuracy.unwrap_or(0.0)
    }
}

/// Simulate the switched system along `sequence` and detect every window.
pub fn run_experiment(
    family: &ScenarioFamily,
    probe: &ProbeSignal,
    config: &ExperimentConfig,
    sequence: &SwitchingSequence,
    x0_bound: f64,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    if (probe.tau0 - config.tau0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "probe window {} differs from experiment window {}",
            probe.tau0, config.tau0
        )));
    }
    if let Some(&bad) = sequence.alphas.iter().find(|&&a| a >= family.len()) {
        return Err(Error::InvalidArgument(format!("scenario {bad} not in family of {}", family.len())));
    }
    let sim = SwitchedSimulator::new(family, config.tau, config.tau0, config.ts)?;
    let n = family.n();
    let p = family.p();
    let n_dist = sim.window[0].n_disturbances();
    let u1 = Signal::Constant(probe.input(sim.window[0].n_inputs()));
    let u2_samples = vec![DVector::zeros(n_dist); sim.steps + 1];
    let u2 = Signal::Constant(DVector::zeros(n_dist));
    let noise = if config.noise_sigma > 0.0 {
        Some(Normal::new(0.0, config.noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?)
    } else {
        None
    };
    let mut noise_rng = rng(config.seed, NOISE_STREAM);

    let mut x = initial_state(n, x0_bound, config.seed);
    let mut windows = Vec::with_capacity(sequence.alphas.len());
    let mut boundary_states = Vec::with_capacity(sequence.alphas.len() + 1);
    for (k, &alpha) in sequence.alphas.iter().enumerate() {
        if !sim.stable[alpha] {
            return Err(Error::Diverged { interval: k });
        }
        boundary_states.push(x.clone());
        let trace = simulate(&sim.window[alpha], &x, &u1, &u2, sim.steps, false)?;
        let mut samples = trace.outputs;
        if let Some(dist) = &noise {
            for y in samples.iter_mut() {
                for i in 0..p {
                    y[i] += dist.sample(&mut noise_rng);
                }
            }
        }
        windows.push(MeasurementWindow {
            t_start: k as f64 * config.tau,
            ts: config.ts,
            samples,
            probe: *probe,
            u2: u2_samples.clone(),
        });
        x = &sim.relax[alpha] * trace.final_state;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { interval: k });
        }
    }
    boundary_states.push(x);

    let detector = Detector::new(&sim.window, sim.steps, config.subsample)?;
    let report = detector.detect_sequence(&windows, Some(&sequence.alphas))?;
    Ok(ExperimentOutcome { sequence: sequence.clone(), windows, boundary_states, report })
}

/// Spectrum of one scenario and its stability verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpectrum {
    pub alpha: usize,
    pub name: String,
    pub eigenvalues: Vec<(f64, f64)>,
    pub max_real: f64,
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub spectra: Vec<ScenarioSpectrum>,
    pub all_stable: bool,
    /// Scenario whose slowest non-shared mode is damped the most: index of
    /// the smallest spectral abscissa.
    pub most_damped: usize,
}

pub fn eigen_report(family: &ScenarioFamily) -> Result<EigenReport> {
    let spectra = family
        .scenarios
        .iter()
        .enumerate()
        .map(|(alpha, s)| {
            let eigs = eigenvalues(s)?;
            let max_real = eigs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
            Ok(ScenarioSpectrum {
                alpha,
                name: s.name.clone(),
                eigenvalues: eigs.iter().map(|l| (l.re, l.im)).collect(),
                max_real,
                stable: max_real < 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let all_stable = spectra.iter().all(|s| s.stable);
    let most_damped = spectra.iter().min_by(|a, b| a.max_real.total_cmp(&b.max_real)).map(|s| s.alpha).unwrap_or(0);
    Ok(EigenReport { spectra, all_stable, most_damped })
}

impl EigenReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["alpha", "name", "re", "im"])?;
        for s in &self.spectra {
            for (re, im) in &s.eigenvalues {
                w.write_record([s.alpha.to_string(), s.name.clone(), format!("{re:e}"), format!("{im:e}")])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Empirical frequency of each scenario over many seeded sequences.
pub fn sequence_frequencies(
    intervals: usize,
    scenarios: usize,
    seeds: std::ops::Range<u64>,
) -> Result<BTreeMap<usize, f64>> {
    let mut counts = BTreeMap::new();
    let mut total = 0usize;
    for seed in seeds {
        for a in generate_sequence(intervals, scenarios, seed)?.alphas {
            *counts.entry(a).or_insert(0usize) += 1;
            total += 1;
        }
    }
    Ok(counts.into_iter().map(|(a, c)| (a, c as f64 / total.max(1) as f64)).collect())
}
