//! Partition of a network into segments, one PV-B resource each. Lines that
//! cross a segment boundary are cut into two auxiliary branches carrying half
//! of the line impedance; the far-end voltage of each half becomes a
//! disturbance input of its segment.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BusId, BusKind, BusSpec, LineSpec, NetworkModel};

pub type SegmentId = u32;

/// Bus to segment map.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment(pub BTreeMap<BusId, SegmentId>);

impl Assignment {
    /// Build from the config form `segment -> [buses]`.
    pub fn from_segments(segments: &BTreeMap<SegmentId, Vec<BusId>>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (&seg, buses) in segments {
            for &bus in buses {
                if let Some(prev) = map.insert(bus, seg) {
                    return Err(Error::Segmentation(format!(
                        "bus {bus} assigned to both segment {prev} and segment {seg}"
                    )));
                }
            }
        }
        Ok(Assignment(map))
    }

    pub fn segment_of(&self, bus: BusId) -> Option<SegmentId> {
        self.0.get(&bus).copied()
    }

    pub fn segments(&self) -> BTreeMap<SegmentId, BTreeSet<BusId>> {
        let mut out: BTreeMap<SegmentId, BTreeSet<BusId>> = BTreeMap::new();
        for (&bus, &seg) in &self.0 {
            out.entry(seg).or_default().insert(bus);
        }
        out
    }
}

/// One half of a cut line, seen from inside a segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxBusSpec {
    pub aux_id: String,
    /// Bus inside the segment the auxiliary branch hangs from.
    pub attach_bus: BusId,
    /// Endpoint of the original line in the neighbouring segment.
    pub far_bus: BusId,
    pub r: f64,
    pub l: f64,
    /// `(segment, aux_id)` of the other half.
    pub peer: (SegmentId, String),
    /// Nominal dq voltage of the auxiliary bus (cut-line midpoint); zero until
    /// a network operating point is attached.
    pub v_nominal: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentModel {
    pub id: SegmentId,
    pub pvb_bus: BusId,
    /// Non-PV-B buses of the segment.
    pub load_buses: BTreeSet<BusId>,
    pub internal_lines: Vec<LineSpec>,
    pub aux_buses: Vec<AuxBusSpec>,
    /// Copies of every bus of the segment, ascending id.
    pub buses: Vec<BusSpec>,
    /// Bus whose load-branch current is measured.
    pub monitored_bus: BusId,
    pub omega_nom: f64,
}

impl SegmentModel {
    pub fn bus_ids(&self) -> Vec<BusId> {
        self.buses.iter().map(|b| b.id).collect()
    }

    pub fn contains(&self, bus: BusId) -> bool {
        bus == self.pvb_bus || self.load_buses.contains(&bus)
    }

    pub fn bus(&self, id: BusId) -> Option<&BusSpec> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn internal_line(&self, a: BusId, b: BusId) -> Option<&LineSpec> {
        self.internal_lines.iter().find(|l| l.connects(a, b))
    }
}

fn aux_name(line: &LineSpec, side: BusId) -> String {
    format!("a{}_{}_{}", line.from, line.to, side)
}

/// Split `model` into segments following `assignment`.
pub fn segment_network(model: &NetworkModel, assignment: &Assignment) -> Result<Vec<SegmentModel>> {
    for bus in &model.buses {
        if assignment.segment_of(bus.id).is_none() {
            return Err(Error::Segmentation(format!("bus {} is not assigned to a segment", bus.id)));
        }
    }
    for &bus in assignment.0.keys() {
        if model.bus(bus).is_none() {
            return Err(Error::Segmentation(format!("assignment names unknown bus {bus}")));
        }
    }

    let mut segments = Vec::new();
    for (seg, members) in assignment.segments() {
        let pvbs: Vec<BusId> =
            members.iter().copied().filter(|&b| model.bus(b).is_some_and(|s| s.kind == BusKind::Pvb)).collect();
        let pvb_bus = match pvbs.as_slice() {
            [one] => *one,
            [] => {
                return Err(Error::Segmentation(format!("segment {seg} has no PV-B bus")));
            }
            many => {
                return Err(Error::Segmentation(format!(
                    "segment {seg} has {} PV-B buses {:?}; exactly one is required",
                    many.len(),
                    many
                )));
            }
        };

        let internal_lines: Vec<LineSpec> =
            model.lines.iter().filter(|l| members.contains(&l.from) && members.contains(&l.to)).copied().collect();
        if !induces_connected(&members, &internal_lines) {
            return Err(Error::Segmentation(format!("segment {seg} is not connected")));
        }

        let mut aux_buses = Vec::new();
        for line in &model.lines {
            let (inside, outside) = match (members.contains(&line.from), members.contains(&line.to)) {
                (true, false) => (line.from, line.to),
                (false, true) => (line.to, line.from),
                _ => continue,
            };
            let peer_seg = assignment.segment_of(outside).expect("coverage checked above");
            aux_buses.push(AuxBusSpec {
                aux_id: aux_name(line, inside),
                attach_bus: inside,
                far_bus: outside,
                r: line.r / 2.0,
                l: line.l / 2.0,
                peer: (peer_seg, aux_name(line, outside)),
                v_nominal: [0.0; 2],
            });
        }

        let buses: Vec<BusSpec> = members.iter().map(|&b| model.bus(b).expect("checked").clone()).collect();
        let monitored_bus = default_monitored_bus(pvb_bus, &buses, &internal_lines);
        segments.push(SegmentModel {
            id: seg,
            pvb_bus,
            load_buses: members.iter().copied().filter(|&b| b != pvb_bus).collect(),
            internal_lines,
            aux_buses,
            buses,
            monitored_bus,
            omega_nom: model.omega_nom,
        });
    }
    Ok(segments)
}

/// The PV-B bus itself when it hosts a load, otherwise its lowest-id loaded
/// neighbour inside the segment.
fn default_monitored_bus(pvb: BusId, buses: &[BusSpec], lines: &[LineSpec]) -> BusId {
    let has_load = |id: BusId| buses.iter().any(|b| b.id == id && b.load.is_some());
    if has_load(pvb) {
        return pvb;
    }
    lines
        .iter()
        .filter_map(|l| match (l.from == pvb, l.to == pvb) {
            (true, _) => Some(l.to),
            (_, true) => Some(l.from),
            _ => None,
        })
        .filter(|&b| has_load(b))
        .min()
        .unwrap_or(pvb)
}

fn induces_connected(members: &BTreeSet<BusId>, lines: &[LineSpec]) -> bool {
    let Some(&start) = members.iter().next() else {
        return false;
    };
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(b) = queue.pop_front() {
        for l in lines {
            let next = if l.from == b {
                l.to
            } else if l.to == b {
                l.from
            } else {
                continue;
            };
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    seen.len() == members.len()
}

/// External endpoints of every cut line, per segment.
pub fn neighbor_sets(segments: &[SegmentModel]) -> BTreeMap<SegmentId, BTreeSet<BusId>> {
    segments.iter().map(|s| (s.id, s.aux_buses.iter().map(|a| a.far_bus).collect())).collect()
}

/// Assign each bus to the hop-nearest PV-B bus (ties go to the lower PV-B
/// id). Segment ids are 1, 2, ... in ascending PV-B bus order.
pub fn nearest_pvb_assignment(model: &NetworkModel) -> Assignment {
    let adj = model.adjacency();
    let pvbs = model.pvb_buses();
    let hops: Vec<BTreeMap<BusId, usize>> = pvbs
        .iter()
        .map(|&src| {
            let mut dist = BTreeMap::from([(src, 0usize)]);
            let mut queue = VecDeque::from([src]);
            while let Some(b) = queue.pop_front() {
                let d = dist[&b];
                for &n in adj.get(&b).into_iter().flatten() {
                    dist.entry(n).or_insert_with(|| {
                        queue.push_back(n);
                        d + 1
                    });
                }
            }
            dist
        })
        .collect();
    let mut map = BTreeMap::new();
    for bus in &model.buses {
        let best = (0..pvbs.len()).filter_map(|i| hops[i].get(&bus.id).map(|&d| (d, i))).min();
        if let Some((_, i)) = best {
            map.insert(bus.id, i as SegmentId + 1);
        }
    }
    Assignment(map)
}

/// The bundled `{1,4} {2,5} {3,6}` partition of the six-bus network.
pub fn reference_assignment() -> Assignment {
    let segs = BTreeMap::from([(1, vec![1, 4]), (2, vec![2, 5]), (3, vec![3, 6])]);
    Assignment::from_segments(&segs).expect("disjoint")
}
