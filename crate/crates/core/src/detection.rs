//! Scenario identification: for every candidate scenario, fit the unknown
//! initial state of a measurement window by least squares and pick the
//! scenario with the smallest residual.

use nalgebra::{DMatrix, DVector, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{simulate, DiscreteStateSpace, Signal};
use crate::probing::ProbeSignal;

pub const DEFAULT_SUBSAMPLE: usize = 10;

/// Samples `y_0..y_N` of one detection window at spacing `ts`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementWindow {
    pub t_start: f64,
    pub ts: f64,
    pub samples: Vec<DVector<f64>>,
    pub probe: ProbeSignal,
    /// Recorded disturbance (auxiliary bus voltage) samples, one per output sample.
    pub u2: Vec<DVector<f64>>,
}

impl MeasurementWindow {
    pub fn steps(&self) -> usize {
        self.samples.len().saturating_sub(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub x0_hat: DVector<f64>,
    pub residual: f64,
}

/// Initial-state fitter for one scenario and one window geometry. The
/// stacked observability map and its SVD are built once and reused.
#[derive(Clone, Debug)]
pub struct InitialStateEstimator {
    sys: DiscreteStateSpace,
    steps: usize,
    rows: Vec<usize>,
    obs: DMatrix<f64>,
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    tol: f64,
}

/// Sample indices `0, s, 2s, ...`, always including `steps`.
pub fn subsample_indices(steps: usize, subsample: usize) -> Vec<usize> {
    let s = subsample.max(1);
    let mut rows: Vec<usize> = (0..=steps).step_by(s).collect();
    if rows.last() != Some(&steps) {
        rows.push(steps);
    }
    rows
}

impl InitialStateEstimator {
    pub fn new(sys: &DiscreteStateSpace, steps: usize, subsample: usize) -> Result<Self> {
        let rows = subsample_indices(steps, subsample);
        let (p, n) = (sys.p(), sys.n());
        let mut obs = DMatrix::zeros(rows.len() * p, n);
        let mut cak = sys.c.clone();
        let mut next = 0;
        for k in 0..=steps {
            if rows.get(next) == Some(&k) {
                obs.view_mut((next * p, 0), (p, n)).copy_from(&cak);
                next += 1;
            }
            if k < steps {
                cak = &cak * &sys.ad;
            }
        }
        if obs.iter().all(|&v| v == 0.0) {
            return Err(Error::Unobservable);
        }
        let svd = SVD::new(obs.clone(), true, true);
        let smax = svd.singular_values.max();
        let tol = obs.nrows().max(n) as f64 * f64::EPSILON * smax;
        Ok(InitialStateEstimator { sys: sys.clone(), steps, rows, obs, svd, tol })
    }

    pub fn system(&self) -> &DiscreteStateSpace {
        &self.sys
    }

    /// Numerical rank of the stacked observability map.
    pub fn rank(&self) -> usize {
        self.svd.singular_values.iter().filter(|&&s| s > self.tol).count()
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.svd.singular_values
    }

    /// Stacked observability rows `C Ad^k` for the selected samples.
    pub fn observability(&self) -> &DMatrix<f64> {
        &self.obs
    }

    /// Zero-initial-state response to the window's probe and disturbance record.
    pub fn forced_response(&self, window: &MeasurementWindow) -> Result<Vec<DVector<f64>>> {
        let u1 = Signal::Constant(window.probe.input(self.sys.n_inputs()));
        let u2 = if self.sys.n_disturbances() == 0 { Signal::zeros(0) } else { Signal::Samples(window.u2.clone()) };
        Ok(simulate(&self.sys, &DVector::zeros(self.sys.n()), &u1, &u2, self.steps, false)?.outputs)
    }

    pub fn estimate(&self, window: &MeasurementWindow) -> Result<Estimate> {
        if window.steps() != self.steps {
            return Err(Error::Dimension(format!(
                "window has {} steps, estimator expects {}",
                window.steps(),
                self.steps
            )));
        }
        if (window.ts - self.sys.ts).abs() > 1e-12 * self.sys.ts {
            return Err(Error::Dimension(format!("window ts {} differs from model ts {}", window.ts, self.sys.ts)));
        }
        let p = self.sys.p();
        if window.samples.iter().any(|y| y.len() != p) {
            return Err(Error::Dimension(format!("window samples must have {p} components")));
        }
        if self.sys.n_disturbances() > 0 && window.u2.len() < self.steps {
            return Err(Error::Dimension("window lacks disturbance samples".into()));
        }
        let forced = self.forced_response(window)?;
        let mut b = DVector::zeros(self.rows.len() * p);
        for (r, &k) in self.rows.iter().enumerate() {
            b.rows_mut(r * p, p).copy_from(&(&window.samples[k] - &forced[k]));
        }
        let x0_hat = self.svd.solve(&b, self.tol).map_err(|e| Error::Singular(e.to_string()))?;
        let residual = (&b - &self.obs * &x0_hat).norm();
        if !residual.is_finite() {
            return Err(Error::Singular("non-finite residual".into()));
        }
        Ok(Estimate { x0_hat, residual })
    }
}

/// One-shot fit; prefer [`InitialStateEstimator`] when fitting many windows.
pub fn estimate_initial_state(
    sys: &DiscreteStateSpace,
    window: &MeasurementWindow,
    subsample: usize,
) -> Result<Estimate> {
    InitialStateEstimator::new(sys, window.steps(), subsample)?.estimate(window)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioVerdict {
    pub detected: usize,
    pub residuals: Vec<f64>,
    pub x0_hat: Vec<Vec<f64>>,
}

/// Index of the smallest value; ties go to the lowest index.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Per-scenario estimators for a fixed window geometry.
#[derive(Clone, Debug)]
pub struct Detector {
    estimators: Vec<InitialStateEstimator>,
}

impl Detector {
    pub fn new(systems: &[DiscreteStateSpace], steps: usize, subsample: usize) -> Result<Self> {
        if systems.is_empty() {
            return Err(Error::InvalidArgument("detector needs at least one scenario".into()));
        }
        let estimators =
            systems.par_iter().map(|s| InitialStateEstimator::new(s, steps, subsample)).collect::<Result<Vec<_>>>()?;
        Ok(Detector { estimators })
    }

    pub fn estimators(&self) -> &[InitialStateEstimator] {
        &self.estimators
    }

    pub fn detect(&self, window: &MeasurementWindow) -> Result<ScenarioVerdict> {
        let fits = self
            .estimators
            .par_iter()
            .enumerate()
            .map(|(i, e)| {
                e.estimate(window).map_err(|err| Error::Scenario {
                    index: i,
                    name: format!("scenario {i}"),
                    source: Box::new(err),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let residuals: Vec<f64> = fits.iter().map(|f| f.residual).collect();
        Ok(ScenarioVerdict {
            detected: argmin(&residuals),
            residuals,
            x0_hat: fits.into_iter().map(|f| f.x0_hat.iter().copied().collect()).collect(),
        })
    }

    pub fn detect_sequence(&self, windows: &[MeasurementWindow], truth: Option<&[usize]>) -> Result<DetectionReport> {
        let verdicts = windows.par_iter().map(|w| self.detect(w)).collect::<Result<Vec<_>>>()?;
        DetectionReport::new(verdicts, truth)
    }
}

pub fn detect(systems: &[DiscreteStateSpace], window: &MeasurementWindow, subsample: usize) -> Result<ScenarioVerdict> {
    Detector::new(systems, window.steps(), subsample)?.detect(window)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub detected: Vec<usize>,
    pub truth: Option<Vec<usize>>,
    pub matches: Option<usize>,
    pub accuracy: Option<f64>,
    pub verdicts: Vec<ScenarioVerdict>,
}

impl DetectionReport {
    pub fn new(verdicts: Vec<ScenarioVerdict>, truth: Option<&[usize]>) -> Result<Self> {
        let detected: Vec<usize> = verdicts.iter().map(|v| v.detected).collect();
        let (matches, accuracy) = match truth {
            Some(t) if t.len() != detected.len() => {
                return Err(Error::Dimension(format!("{} truth labels for {} windows", t.len(), detected.len())))
            }
            Some(t) => {
                let m = t.iter().zip(&detected).filter(|(a, b)| a == b).count();
                let acc = if t.is_empty() { 1.0 } else { m as f64 / t.len() as f64 };
                (Some(m), Some(acc))
            }
            None => (None, None),
        };
        Ok(DetectionReport { detected, truth: truth.map(|t| t.to_vec()), matches, accuracy, verdicts })
    }
}
