//! Magnitude-modulated probing input: a step of magnitude `R > R0` on one
//! control channel, with `R0 = 2 mu0 mu1 / delta_min`.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{discretize_zoh, simulate, spectral_abscissa, ResponseTrace, Signal};
use crate::ssbuild::{ScenarioFamily, StateSpaceModel};

pub const DEFAULT_MARGIN: f64 = 1.01;
pub const MU0_FRACTION: f64 = 0.02;

/// Control channel carrying the probe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    D,
    Delta,
    MA,
}

impl Channel {
    pub fn index(self) -> usize {
        match self {
            Channel::D => 0,
            Channel::Delta => 1,
            Channel::MA => 2,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Channel::D),
            1 => Ok(Channel::Delta),
            2 => Ok(Channel::MA),
            _ => Err(Error::InvalidArgument(format!("channel index {i} out of range 0..3"))),
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d" | "0" => Ok(Channel::D),
            "delta" | "1" => Ok(Channel::Delta),
            "m_a" | "ma" | "2" => Ok(Channel::MA),
            _ => Err(Error::InvalidArgument(format!("unknown channel {s:?} (expected d, delta or m_a)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeShape {
    Step,
}

/// What is actually applied during a detection window: `magnitude` on
/// `channel`, zero elsewhere, for `tau0` seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSignal {
    pub channel: Channel,
    pub magnitude: f64,
    pub tau0: f64,
}

impl ProbeSignal {
    pub fn off(channel: Channel, tau0: f64) -> Self {
        ProbeSignal { channel, magnitude: 0.0, tau0 }
    }

    pub fn input(&self, n_inputs: usize) -> DVector<f64> {
        let mut u = DVector::zeros(n_inputs);
        if n_inputs > 0 {
            u[self.channel.index() % n_inputs] = self.magnitude;
        }
        u
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbingDesign {
    pub mu0: f64,
    pub mu1: f64,
    pub delta_min: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub channel: Channel,
    pub tau0: f64,
    pub ts: f64,
    pub shape: ProbeShape,
    /// Scenario pair attaining `delta_min`, if it was computed here.
    pub argmin_pair: Option<(usize, usize)>,
}

pub fn threshold(mu0: f64, mu1: f64, delta_min: f64) -> f64 {
    2.0 * mu0 * mu1 / delta_min
}

impl ProbingDesign {
    /// Design with `R = margin * R0`.
    pub fn from_bounds(
        mu0: f64,
        mu1: f64,
        delta_min: f64,
        margin: f64,
        channel: Channel,
        tau0: f64,
        ts: f64,
    ) -> Result<Self> {
        let r0 = threshold(mu0, mu1, delta_min);
        Self::new(mu0, mu1, delta_min, margin * r0, channel, tau0, ts)
    }

    /// Design with an explicit magnitude; rejected unless `R > R0`.
    pub fn new(mu0: f64, mu1: f64, delta_min: f64, r: f64, channel: Channel, tau0: f64, ts: f64) -> Result<Self> {
        for (name, v) in [("mu0", mu0), ("mu1", mu1), ("delta_min", delta_min), ("tau0", tau0), ("ts", ts)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::DegenerateProbe(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if mu0 == 0.0 {
            return Err(Error::DegenerateProbe("mu0 = 0".into()));
        }
        if delta_min == 0.0 {
            return Err(Error::DegenerateProbe("delta_min = 0".into()));
        }
        if tau0 == 0.0 || ts == 0.0 {
            return Err(Error::DegenerateProbe("tau0 and ts must be > 0".into()));
        }
        let r0 = threshold(mu0, mu1, delta_min);
        if !(r > r0) {
            return Err(Error::DegenerateProbe(format!("R = {r} does not exceed R0 = {r0}")));
        }
        Ok(ProbingDesign { mu0, mu1, delta_min, r0, r, channel, tau0, ts, shape: ProbeShape::Step, argmin_pair: None })
    }

    pub fn signal(&self) -> ProbeSignal {
        ProbeSignal { channel: self.channel, magnitude: self.r, tau0: self.tau0 }
    }
}

/// `0.02 * max |x_i|` over the current-typed states of `equilibrium`.
pub fn compute_mu0(model: &StateSpaceModel, equilibrium: &DVector<f64>) -> Result<f64> {
    if equilibrium.len() != model.n() {
        return Err(Error::Dimension(format!(
            "equilibrium has {} entries, model has {}",
            equilibrium.len(),
            model.n()
        )));
    }
    if !equilibrium.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("equilibrium is not finite".into()));
    }
    let currents: Vec<f64> = model
        .state_kinds
        .iter()
        .zip(equilibrium.iter())
        .filter(|(k, _)| k.is_network_current())
        .map(|(_, v)| v.abs())
        .collect();
    if currents.is_empty() {
        return Err(Error::InvalidArgument("model has no current-typed states".into()));
    }
    Ok(MU0_FRACTION * currents.into_iter().fold(0.0, f64::max))
}

/// `max_alpha ||C(alpha)||_2`; every scenario must be Hurwitz.
pub fn compute_mu1(family: &ScenarioFamily) -> Result<f64> {
    let mut mu1 = 0.0f64;
    for (index, s) in family.scenarios.iter().enumerate() {
        let max_re = spectral_abscissa(&s.a)?;
        if max_re >= 0.0 {
            return Err(Error::NotHurwitz { index, max_re });
        }
        let norm = s.c.singular_values().iter().copied().fold(0.0, f64::max);
        mu1 = mu1.max(norm);
    }
    Ok(mu1)
}

/// Pairwise maximum output gaps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaScan {
    pub delta_min: f64,
    pub argmin_pair: (usize, usize),
    /// `((i, j), max_t gap)` for every `i < j`.
    pub pairs: Vec<((usize, usize), f64)>,
}

/// Zero-initial unit-step responses on `channel` over `[0, tau0]`.
pub fn step_responses(family: &ScenarioFamily, channel: Channel, tau0: f64, ts: f64) -> Result<Vec<ResponseTrace>> {
    let steps = window_steps(tau0, ts)?;
    family
        .scenarios
        .par_iter()
        .map(|s| {
            let sys = discretize_zoh(s, ts)?;
            let u1 = ProbeSignal { channel, magnitude: 1.0, tau0 }.input(sys.n_inputs());
            simulate(
                &sys,
                &DVector::zeros(sys.n()),
                &Signal::Constant(u1),
                &Signal::zeros(sys.n_disturbances()),
                steps,
                false,
            )
        })
        .collect()
}

/// Number of sample steps in a window; `tau0 / ts` must be an integer.
pub fn window_steps(tau0: f64, ts: f64) -> Result<usize> {
    if !(tau0.is_finite() && ts.is_finite() && tau0 > 0.0 && ts > 0.0) {
        return Err(Error::InvalidArgument(format!("tau0 = {tau0} and ts = {ts} must be finite and > 0")));
    }
    let ratio = tau0 / ts;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-6 * ratio.max(1.0) {
        return Err(Error::InvalidArgument(format!("{tau0} is not an integer multiple of {ts}")));
    }
    Ok(steps as usize)
}

/// Max over samples of the gap between two traces: of the aggregate, or of
/// any single component when `per_component` is set.
pub fn max_gap(a: &ResponseTrace, b: &ResponseTrace, per_component: bool) -> f64 {
    if per_component {
        a.outputs.iter().zip(&b.outputs).map(|(ya, yb)| (ya - yb).amax()).fold(0.0, f64::max)
    } else {
        a.aggregate.iter().zip(&b.aggregate).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

pub fn scan_delta(
    family: &ScenarioFamily,
    channel: Channel,
    tau0: f64,
    ts: f64,
    per_component: bool,
) -> Result<DeltaScan> {
    if family.len() < 2 {
        return Err(Error::InvalidArgument("delta_min needs at least two scenarios".into()));
    }
    let traces = step_responses(family, channel, tau0, ts)?;
    let m = traces.len();
    let pairs: Vec<((usize, usize), f64)> = (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .map(|(i, j)| ((i, j), max_gap(&traces[i], &traces[j], per_component)))
        .collect();
    let (argmin_pair, delta_min) =
        pairs.iter().fold(((0, 1), f64::INFINITY), |best, &(pair, v)| if v < best.1 { (pair, v) } else { best });
    Ok(DeltaScan { delta_min, argmin_pair, pairs })
}

/// Like [`scan_delta`], but a zero gap is an error.
pub fn compute_delta_min(
    family: &ScenarioFamily,
    channel: Channel,
    tau0: f64,
    ts: f64,
    per_component: bool,
) -> Result<DeltaScan> {
    let scan = scan_delta(family, channel, tau0, ts, per_component)?;
    if scan.delta_min == 0.0 {
        return Err(Error::Indistinguishable(scan.argmin_pair.0, scan.argmin_pair.1));
    }
    Ok(scan)
}

pub fn design_mami(
    family: &ScenarioFamily,
    equilibrium: &DVector<f64>,
    channel: Channel,
    tau0: f64,
    ts: f64,
    margin: f64,
) -> Result<ProbingDesign> {
    if !(margin > 1.0) {
        return Err(Error::InvalidArgument(format!("margin {margin} must be > 1")));
    }
    let mu0 = compute_mu0(&family.scenarios[0], equilibrium)?;
    let mu1 = compute_mu1(family)?;
    let scan = compute_delta_min(family, channel, tau0, ts, false)?;
    let mut design = ProbingDesign::from_bounds(mu0, mu1, scan.delta_min, margin, channel, tau0, ts)?;
    design.argmin_pair = Some(scan.argmin_pair);
    Ok(design)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_arithmetic() {
        assert_eq!(threshold(1.0, 1.0, 2.0), 1.0);
        let d = ProbingDesign::from_bounds(1.0, 1.0, 20.0, 1.01, Channel::Delta, 0.01, 1e-6).unwrap();
        assert!((d.r - 0.101).abs() < 1e-15);
    }

    #[test]
    fn magnitude_at_or_below_threshold_rejected() {
        assert!(ProbingDesign::new(1.0, 1.0, 2.0, 1.0, Channel::Delta, 0.01, 1e-6).is_err());
        assert!(ProbingDesign::new(1.0, 1.0, 2.0, 0.5, Channel::Delta, 0.01, 1e-6).is_err());
        assert!(ProbingDesign::new(0.0, 1.0, 2.0, 1.5, Channel::Delta, 0.01, 1e-6).is_err());
        assert!(ProbingDesign::new(1.0, 1.0, 0.0, 1.5, Channel::Delta, 0.01, 1e-6).is_err());
    }

    #[test]
    fn channel_parsing() {
        assert_eq!("delta".parse::<Channel>().unwrap(), Channel::Delta);
        assert_eq!("m_a".parse::<Channel>().unwrap().index(), 2);
        assert!("q".parse::<Channel>().is_err());
    }

    #[test]
    fn window_steps_requires_integer_ratio() {
        assert_eq!(window_steps(0.01, 1e-6).unwrap(), 10_000);
        assert!(window_steps(0.01, 3e-3).is_err());
    }
}
