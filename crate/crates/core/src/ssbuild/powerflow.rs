//! Network-wide operating point. The whole network is solved as one circuit
//! at the PV-B operating controls; the midpoint voltage of every cut line
//! becomes the nominal voltage of the two auxiliary buses it was split into.

use nalgebra::DVector;

use super::circuit::Circuit;
use crate::error::{Error, Result};
use crate::grid::NetworkModel;
use crate::segmentation::{segment_network, Assignment, SegmentModel};

#[derive(Clone, Debug)]
pub struct NetworkOperatingPoint {
    pub circuit: Circuit,
    pub state_labels: Vec<String>,
    pub x: DVector<f64>,
}

impl NetworkOperatingPoint {
    pub fn value(&self, label: &str) -> Option<f64> {
        self.state_labels.iter().position(|l| l == label).map(|i| self.x[i])
    }
}

pub fn solve_network(model: &NetworkModel) -> Result<NetworkOperatingPoint> {
    let circuit = Circuit::for_network(model)?;
    circuit.check()?;
    let u1 =
        DVector::from_iterator(circuit.n_inputs(), circuit.pvbs.iter().flat_map(|(_, p)| p.operating_point.to_array()));
    let x = circuit.equilibrium(&u1, &DVector::zeros(0))?;
    let (state_labels, _) = circuit.state_labels();
    Ok(NetworkOperatingPoint { circuit, state_labels, x })
}

/// Fill `v_nominal` of every auxiliary bus from the network operating point.
pub fn attach_aux_voltages(op: &NetworkOperatingPoint, segments: &mut [SegmentModel]) -> Result<()> {
    let c = &op.circuit;
    for seg in segments.iter_mut() {
        for aux in seg.aux_buses.iter_mut() {
            let j = c
                .lines
                .iter()
                .position(|l| {
                    (l.from == aux.attach_bus && l.to == aux.far_bus)
                        || (l.to == aux.attach_bus && l.from == aux.far_bus)
                })
                .ok_or_else(|| Error::MissingLabel(format!("line {}-{}", aux.attach_bus, aux.far_bus)))?;
            let lo = c.line_offset(j);
            // line current oriented from the attach bus towards the far bus
            let sign = if c.lines[j].from == aux.attach_bus { 1.0 } else { -1.0 };
            let i = [sign * op.x[lo], sign * op.x[lo + 1]];
            let no = c.node_offset(c.node_index(aux.attach_bus)?);
            let v = [op.x[no], op.x[no + 1]];
            let w = c.omega;
            // steady state of the attach-side half: 0 = v - v_mid - R i + w L J i
            aux.v_nominal = [v[0] - aux.r * i[0] + w * aux.l * i[1], v[1] - aux.r * i[1] - w * aux.l * i[0]];
        }
    }
    Ok(())
}

/// Segment the network and attach nominal auxiliary voltages.
pub fn prepare_segments(model: &NetworkModel, assignment: &Assignment) -> Result<Vec<SegmentModel>> {
    let mut segments = segment_network(model, assignment)?;
    if segments.iter().any(|s| !s.aux_buses.is_empty()) {
        let op = solve_network(model)?;
        attach_aux_voltages(&op, &mut segments)?;
    }
    Ok(segments)
}
