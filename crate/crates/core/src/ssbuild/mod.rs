//! Per-scenario continuous-time state-space models of a segment.
//!
//! State order is `[x_pvb | x_net | x_aux | x_load]`:
//! PV-B `[i_pv, v_dc, i_tq, i_td, v_cs, v_cb]`, one `(q, d)` current pair per
//! internal line, one per auxiliary branch, and `[V_q, V_d, I_LLq, I_LLd]`
//! per load node in ascending bus order. Contingencies change coefficients
//! but never the state dimension.

pub mod circuit;
pub mod powerflow;
pub mod pvb;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use circuit::{Circuit, CircuitAux, CircuitLine, LineMode, Linearization, StateKind};
pub use powerflow::{attach_aux_voltages, prepare_segments, solve_network, NetworkOperatingPoint};

use crate::error::{Error, Result};
use crate::grid::BusId;
use crate::linalg::DiscreteStateSpace;
use crate::segmentation::{SegmentId, SegmentModel};

pub const DEFAULT_FAULT_RESISTANCE: f64 = 1e-3;

/// Structural configuration of a segment.
///
/// Serialized as `{"kind": "ShortCircuit", "line": [1, 4], "R_f_ohm": 0.001}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ContingencyDoc", into = "ContingencyDoc")]
pub enum ContingencySpec {
    Normal,
    ShortCircuit { line: [BusId; 2], r_f: f64 },
    LineOutage { line: [BusId; 2] },
    LineDisconnect { line: [BusId; 2], open_end: BusId },
}

// Flat document form; tagged enums would route numbers through a buffer
// that does not understand arbitrary-precision numbers.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContingencyDoc {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    line: Option<[BusId; 2]>,
    #[serde(rename = "R_f_ohm", default, skip_serializing_if = "Option::is_none")]
    r_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    open_end: Option<BusId>,
}

impl TryFrom<ContingencyDoc> for ContingencySpec {
    type Error = String;
    fn try_from(doc: ContingencyDoc) -> std::result::Result<Self, String> {
        let line = || doc.line.ok_or_else(|| format!("{} needs a line", doc.kind));
        let spec = match doc.kind.as_str() {
            "Normal" => ContingencySpec::Normal,
            "ShortCircuit" => {
                ContingencySpec::ShortCircuit { line: line()?, r_f: doc.r_f.unwrap_or(DEFAULT_FAULT_RESISTANCE) }
            }
            "LineOutage" => ContingencySpec::LineOutage { line: line()? },
            "LineDisconnect" => ContingencySpec::LineDisconnect {
                line: line()?,
                open_end: doc.open_end.ok_or("LineDisconnect needs open_end")?,
            },
            other => return Err(format!("unknown contingency kind {other:?}")),
        };
        let extra = match &spec {
            ContingencySpec::Normal => doc.line.is_some() || doc.r_f.is_some() || doc.open_end.is_some(),
            ContingencySpec::ShortCircuit { .. } => doc.open_end.is_some(),
            ContingencySpec::LineOutage { .. } => doc.r_f.is_some() || doc.open_end.is_some(),
            ContingencySpec::LineDisconnect { .. } => doc.r_f.is_some(),
        };
        if extra {
            return Err(format!("field not allowed for {}", doc.kind));
        }
        Ok(spec)
    }
}

impl From<ContingencySpec> for ContingencyDoc {
    fn from(spec: ContingencySpec) -> Self {
        let mut doc = ContingencyDoc { kind: String::new(), line: None, r_f: None, open_end: None };
        match spec {
            ContingencySpec::Normal => doc.kind = "Normal".into(),
            ContingencySpec::ShortCircuit { line, r_f } => {
                doc.kind = "ShortCircuit".into();
                doc.line = Some(line);
                doc.r_f = Some(r_f);
            }
            ContingencySpec::LineOutage { line } => {
                doc.kind = "LineOutage".into();
                doc.line = Some(line);
            }
            ContingencySpec::LineDisconnect { line, open_end } => {
                doc.kind = "LineDisconnect".into();
                doc.line = Some(line);
                doc.open_end = Some(open_end);
            }
        }
        doc
    }
}

impl ContingencySpec {
    pub fn name(&self) -> String {
        match self {
            ContingencySpec::Normal => "normal".to_string(),
            ContingencySpec::ShortCircuit { line, .. } => {
                format!("short_circuit_{}_{}", line[0], line[1])
            }
            ContingencySpec::LineOutage { line } => format!("line_outage_{}_{}", line[0], line[1]),
            ContingencySpec::LineDisconnect { line, open_end } => {
                format!("line_disconnect_{}_{}_open_{}", line[0], line[1], open_end)
            }
        }
    }

    fn line(&self) -> Option<[BusId; 2]> {
        match self {
            ContingencySpec::Normal => None,
            ContingencySpec::ShortCircuit { line, .. }
            | ContingencySpec::LineOutage { line }
            | ContingencySpec::LineDisconnect { line, .. } => Some(*line),
        }
    }

    fn mode(&self) -> LineMode {
        match *self {
            ContingencySpec::Normal => LineMode::Normal,
            ContingencySpec::ShortCircuit { r_f, .. } => LineMode::Faulted { r_f },
            ContingencySpec::LineOutage { .. } => LineMode::Outaged,
            ContingencySpec::LineDisconnect { open_end, .. } => LineMode::OpenAt(open_end),
        }
    }

    /// The three line contingencies on one line, preceded by normal operation.
    pub fn standard_set(line: [BusId; 2], open_end: BusId) -> Vec<ContingencySpec> {
        vec![
            ContingencySpec::Normal,
            ContingencySpec::ShortCircuit { line, r_f: DEFAULT_FAULT_RESISTANCE },
            ContingencySpec::LineOutage { line },
            ContingencySpec::LineDisconnect { line, open_end },
        ]
    }
}

impl Circuit {
    /// Circuit of `segment` with `contingency` applied.
    pub fn for_segment(segment: &SegmentModel, contingency: &ContingencySpec) -> Result<Self> {
        let mut nodes = Vec::new();
        for bus in &segment.buses {
            let load = bus.load.ok_or(Error::SingularCapacitanceNode { bus: bus.id })?;
            nodes.push((bus.id, load));
        }
        nodes.sort_by_key(|n| n.0);
        let pvb = segment
            .bus(segment.pvb_bus)
            .and_then(|b| b.pvb)
            .ok_or_else(|| Error::Segmentation(format!("bus {} has no PV-B parameters", segment.pvb_bus)))?;

        let target = match contingency.line() {
            Some([a, b]) => {
                let line = segment.internal_line(a, b).ok_or_else(|| {
                    Error::Contingency(format!("line {a}-{b} is not internal to segment {}", segment.id))
                })?;
                Some(line.key())
            }
            None => None,
        };
        match *contingency {
            ContingencySpec::ShortCircuit { r_f, .. } if !(r_f.is_finite() && r_f > 0.0) => {
                return Err(Error::Contingency(format!("fault resistance {r_f} must be > 0")));
            }
            ContingencySpec::LineDisconnect { line, open_end } if !line.contains(&open_end) => {
                return Err(Error::Contingency(format!(
                    "open end {open_end} is not an endpoint of line {}-{}",
                    line[0], line[1]
                )));
            }
            _ => {}
        }

        let lines = segment
            .internal_lines
            .iter()
            .map(|l| CircuitLine {
                from: l.from,
                to: l.to,
                r: l.r,
                l: l.l,
                mode: if Some(l.key()) == target { contingency.mode() } else { LineMode::Normal },
            })
            .collect();
        let aux = segment
            .aux_buses
            .iter()
            .map(|a| CircuitAux { name: a.aux_id.clone(), bus: a.attach_bus, r: a.r, l: a.l })
            .collect();
        let circuit = Circuit { omega: segment.omega_nom, pvbs: vec![(segment.pvb_bus, pvb)], lines, aux, nodes };
        circuit.check()?;
        Ok(circuit)
    }
}

/// Nominal inputs and the equilibrium state they produce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub x: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

/// Output map `y = C x + D2 u2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub c: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    pub output_labels: Vec<String>,
}

/// Measured quantities: DC-link voltage, inverter terminal current and the
/// load-branch current of the monitored bus, followed by every auxiliary bus
/// voltage (received from the neighbouring segment).
pub fn build_measurement(segment: &SegmentModel) -> Result<Measurement> {
    let circuit = Circuit::for_segment(segment, &ContingencySpec::Normal)?;
    let (labels, _) = circuit.state_labels();
    let pvb = segment.pvb_bus;
    let mon = segment.monitored_bus;
    let selected = [
        format!("v_dc_{pvb}"),
        format!("i_tq_{pvb}"),
        format!("i_td_{pvb}"),
        format!("I_LL{mon}_q"),
        format!("I_LL{mon}_d"),
    ];
    let n = labels.len();
    let n_dist = circuit.n_disturbances();
    let p = selected.len() + n_dist;
    let mut c = DMatrix::zeros(p, n);
    let mut d2 = DMatrix::zeros(p, n_dist);
    for (row, label) in selected.iter().enumerate() {
        let col = labels.iter().position(|l| l == label).ok_or_else(|| Error::MissingLabel(label.clone()))?;
        c[(row, col)] = 1.0;
    }
    for k in 0..n_dist {
        d2[(selected.len() + k, k)] = 1.0;
    }
    let mut output_labels = selected.to_vec();
    output_labels.extend(circuit.disturbance_labels());
    Ok(Measurement { c, d2, output_labels })
}

/// Continuous-time linear model of one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceModel {
    pub alpha: usize,
    pub name: String,
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    pub state_labels: Vec<String>,
    pub state_kinds: Vec<StateKind>,
    pub input_labels: Vec<String>,
    pub disturbance_labels: Vec<String>,
    pub output_labels: Vec<String>,
    pub operating_point: OperatingPoint,
}

impl StateSpaceModel {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b1.ncols()
    }

    pub fn n_disturbances(&self) -> usize {
        self.b2.ncols()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.state_labels.iter().position(|l| l == label)
    }

    /// Consistency of every matrix dimension with the label lists.
    pub fn check_dims(&self) -> Result<()> {
        let n = self.state_labels.len();
        let p = self.output_labels.len();
        let m1 = self.input_labels.len();
        let m2 = self.disturbance_labels.len();
        let ok = self.a.shape() == (n, n)
            && self.b1.shape() == (n, m1)
            && self.b2.shape() == (n, m2)
            && self.c.shape() == (p, n)
            && self.d2.shape() == (p, m2)
            && self.state_kinds.len() == n;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!("inconsistent matrices in scenario {}", self.name)))
        }
    }

    /// Minimal model from raw matrices; labels are generated.
    pub fn from_matrices(
        a: DMatrix<f64>,
        b1: DMatrix<f64>,
        b2: DMatrix<f64>,
        c: DMatrix<f64>,
        d2: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        let model = StateSpaceModel {
            alpha: 0,
            name: "custom".to_string(),
            state_labels: (0..n).map(|i| format!("x{i}")).collect(),
            state_kinds: vec![StateKind::LineCurrent; n],
            input_labels: (0..b1.ncols()).map(|i| format!("u{i}")).collect(),
            disturbance_labels: (0..b2.ncols()).map(|i| format!("w{i}")).collect(),
            output_labels: (0..c.nrows()).map(|i| format!("y{i}")).collect(),
            operating_point: OperatingPoint { x: vec![0.0; n], u1: vec![0.0; b1.ncols()], u2: vec![0.0; b2.ncols()] },
            a,
            b1,
            b2,
            c,
            d2,
        };
        model.check_dims()?;
        Ok(model)
    }
}

/// Linearize `segment` under `contingency` at that scenario's own equilibrium.
pub fn build_state_space(segment: &SegmentModel, contingency: &ContingencySpec) -> Result<StateSpaceModel> {
    let circuit = Circuit::for_segment(segment, contingency)?;
    let pvb = segment.bus(segment.pvb_bus).and_then(|b| b.pvb).expect("checked by for_segment");
    let u1 = DVector::from_row_slice(&pvb.operating_point.to_array());
    let u2 = DVector::from_iterator(circuit.n_disturbances(), segment.aux_buses.iter().flat_map(|a| a.v_nominal));
    let x = circuit.equilibrium(&u1, &u2)?;
    let lin = circuit.linearize(&x, &u1)?;
    let meas = build_measurement(segment)?;
    let (state_labels, state_kinds) = circuit.state_labels();
    let model = StateSpaceModel {
        alpha: 0,
        name: contingency.name(),
        a: lin.a,
        b1: lin.b1,
        b2: lin.b2,
        c: meas.c,
        d2: meas.d2,
        state_labels,
        state_kinds,
        input_labels: circuit.input_labels(),
        disturbance_labels: circuit.disturbance_labels(),
        output_labels: meas.output_labels,
        operating_point: OperatingPoint {
            x: x.iter().copied().collect(),
            u1: u1.iter().copied().collect(),
            u2: u2.iter().copied().collect(),
        },
    };
    model.check_dims()?;
    Ok(model)
}

/// Scenario set of one segment; index 0 is normal operation.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioFamily {
    pub segment_id: SegmentId,
    pub scenarios: Vec<StateSpaceModel>,
}

impl ScenarioFamily {
    pub fn new(segment_id: SegmentId, mut scenarios: Vec<StateSpaceModel>) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::InvalidArgument("scenario family is empty".into()));
        }
        for (i, s) in scenarios.iter_mut().enumerate() {
            s.alpha = i;
            s.check_dims()?;
        }
        let first = &scenarios[0];
        for s in &scenarios[1..] {
            if s.state_labels != first.state_labels
                || s.output_labels != first.output_labels
                || s.input_labels != first.input_labels
                || s.disturbance_labels != first.disturbance_labels
            {
                return Err(Error::Dimension(format!(
                    "scenario {} does not share the family's labels and dimensions",
                    s.name
                )));
            }
        }
        Ok(ScenarioFamily { segment_id, scenarios })
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn n(&self) -> usize {
        self.scenarios[0].n()
    }

    pub fn p(&self) -> usize {
        self.scenarios[0].p()
    }

    pub fn state_labels(&self) -> &[String] {
        &self.scenarios[0].state_labels
    }

    pub fn alpha_names(&self) -> Vec<String> {
        self.scenarios.iter().map(|s| s.name.clone()).collect()
    }

    /// Equilibrium of normal operation.
    pub fn nominal_equilibrium(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.scenarios[0].operating_point.x)
    }

    pub fn discretize(&self, ts: f64) -> Result<Vec<DiscreteStateSpace>> {
        self.scenarios.par_iter().map(|s| crate::linalg::discretize_zoh(s, ts)).collect()
    }
}

/// Build every scenario of `contingencies` on `segment`; the first entry
/// must be normal operation.
pub fn build_family(segment: &SegmentModel, contingencies: &[ContingencySpec]) -> Result<ScenarioFamily> {
    match contingencies.first() {
        Some(ContingencySpec::Normal) => {}
        Some(other) => {
            return Err(Error::Contingency(format!("first scenario must be Normal, found {}", other.name())))
        }
        None => return Err(Error::Contingency("no scenarios given".into())),
    }
    let scenarios = contingencies
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            build_state_space(segment, spec).map_err(|e| Error::Scenario {
                index: i,
                name: spec.name(),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ScenarioFamily::new(segment.id, scenarios)
}
