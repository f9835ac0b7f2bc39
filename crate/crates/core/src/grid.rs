//! Physical description of a distribution network: buses, lines, loads and
//! PV+battery resources.
//!
//! Network documents are JSON. Every dimensioned field carries its unit as a
//! key suffix (`R_ohm`, `L_mH`, `C_mF`, ...). Unit scaling is done on the
//! decimal text of the number, so `"L_mH": 0.636` and `"L_H": 0.000636`
//! produce bit-identical models.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub type BusId = u32;

pub const DEFAULT_FREQUENCY_HZ: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BusKind {
    #[serde(rename = "PVB")]
    Pvb,
    Load,
}

/// Inverter and chopper control settings `[d, delta, m_a]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// Chopper duty cycle in [0, 1].
    pub d: f64,
    /// Inverter phase angle, rad.
    pub delta: f64,
    /// Modulation index in [0, 1].
    pub m_a: f64,
}

impl Default for ControlInput {
    fn default() -> Self {
        ControlInput { d: 0.5, delta: 0.1, m_a: 0.8 }
    }
}

impl ControlInput {
    pub fn to_array(self) -> [f64; 3] {
        [self.d, self.delta, self.m_a]
    }
}

/// Load at a bus: shunt capacitor, parallel resistor and a series Rl-L branch.
/// `p`, `q` and `pf` are metadata; the circuit values drive the dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadParams {
    pub p: f64,
    pub q: f64,
    pub pf: f64,
    pub r: f64,
    pub l: f64,
    pub rl: f64,
    pub c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvbParams {
    /// Signed incremental slope dv/di of the linearized PV curve, ohm.
    pub r_pv: f64,
    pub i_pv: f64,
    pub l_1pv: f64,
    pub c_pv: f64,
    pub r_2pv: f64,
    pub l_2pv: f64,
    pub r_s: f64,
    pub r_e: f64,
    pub r_t: f64,
    pub c_s: f64,
    pub c_b: f64,
    pub operating_point: ControlInput,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusSpec {
    pub id: BusId,
    pub kind: BusKind,
    pub load: Option<LoadParams>,
    pub pvb: Option<PvbParams>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub from: BusId,
    pub to: BusId,
    /// Series resistance, ohm.
    pub r: f64,
    /// Series inductance, H.
    pub l: f64,
}

impl LineSpec {
    /// Unordered endpoint pair, smaller id first.
    pub fn key(&self) -> (BusId, BusId) {
        (self.from.min(self.to), self.from.max(self.to))
    }

    pub fn connects(&self, a: BusId, b: BusId) -> bool {
        self.key() == (a.min(b), a.max(b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub name: String,
    /// Nominal angular frequency, rad/s.
    pub omega_nom: f64,
    pub buses: Vec<BusSpec>,
    pub lines: Vec<LineSpec>,
}

impl NetworkModel {
    pub fn bus(&self, id: BusId) -> Option<&BusSpec> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn pvb_buses(&self) -> Vec<BusId> {
        let mut ids: Vec<BusId> = self.buses.iter().filter(|b| b.kind == BusKind::Pvb).map(|b| b.id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn line(&self, a: BusId, b: BusId) -> Option<&LineSpec> {
        self.lines.iter().find(|l| l.connects(a, b))
    }

    /// Adjacency list keyed by bus id; ignores lines to unknown buses.
    pub fn adjacency(&self) -> BTreeMap<BusId, BTreeSet<BusId>> {
        let mut adj: BTreeMap<BusId, BTreeSet<BusId>> = self.buses.iter().map(|b| (b.id, BTreeSet::new())).collect();
        for line in &self.lines {
            if adj.contains_key(&line.from) && adj.contains_key(&line.to) {
                adj.get_mut(&line.from).unwrap().insert(line.to);
                adj.get_mut(&line.to).unwrap().insert(line.from);
            }
        }
        adj
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    EmptyNetwork,
    NonPositiveFrequency,
    DuplicateBus,
    KindMismatch,
    DanglingEndpoint,
    SelfLoop,
    DuplicateLine,
    NonPhysicalResistance,
    NonPhysicalInductance,
    NonPhysicalCapacitance,
    PowerFactorRange,
    ControlInputRange,
    NonFiniteValue,
    Disconnected,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::EmptyNetwork => "empty network",
            ViolationKind::NonPositiveFrequency => "non-positive frequency",
            ViolationKind::DuplicateBus => "duplicate bus",
            ViolationKind::KindMismatch => "kind mismatch",
            ViolationKind::DanglingEndpoint => "dangling endpoint",
            ViolationKind::SelfLoop => "self loop",
            ViolationKind::DuplicateLine => "duplicate line",
            ViolationKind::NonPhysicalResistance => "non-physical resistance",
            ViolationKind::NonPhysicalInductance => "non-physical inductance",
            ViolationKind::NonPhysicalCapacitance => "non-physical capacitance",
            ViolationKind::PowerFactorRange => "power factor out of range",
            ViolationKind::ControlInputRange => "control input out of range",
            ViolationKind::NonFiniteValue => "non-finite value",
            ViolationKind::Disconnected => "disconnected network",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { kind, location: location.into(), message: message.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{} at {}: {}", v.kind, v.location, v.message)?;
        }
        Ok(())
    }
}

/// Check every structural and physical invariant of `model`. Violations are
/// reported in document order, so the report is deterministic.
pub fn validate(model: &NetworkModel) -> ValidationReport {
    let mut report = ValidationReport::default();

    if model.buses.is_empty() {
        report.push(ViolationKind::EmptyNetwork, "buses", "network has no buses");
    }
    if !(model.omega_nom.is_finite() && model.omega_nom > 0.0) {
        report.push(
            ViolationKind::NonPositiveFrequency,
            "omega",
            format!("omega_nom = {} must be > 0", model.omega_nom),
        );
    }

    let mut seen = BTreeSet::new();
    for (i, bus) in model.buses.iter().enumerate() {
        let loc = format!("buses[{i}] (id {})", bus.id);
        if !seen.insert(bus.id) {
            report.push(ViolationKind::DuplicateBus, &loc, format!("bus id {} repeated", bus.id));
        }
        match bus.kind {
            BusKind::Pvb if bus.pvb.is_none() => {
                report.push(ViolationKind::KindMismatch, &loc, "PVB bus without pvb parameters")
            }
            BusKind::Load if bus.load.is_none() => {
                report.push(ViolationKind::KindMismatch, &loc, "Load bus without load parameters")
            }
            BusKind::Load if bus.pvb.is_some() => {
                report.push(ViolationKind::KindMismatch, &loc, "Load bus carries pvb parameters")
            }
            _ => {}
        }
        if let Some(load) = &bus.load {
            check_load(&mut report, &format!("{loc}.load"), load);
        }
        if let Some(pvb) = &bus.pvb {
            check_pvb(&mut report, &format!("{loc}.pvb"), pvb);
        }
    }

    let mut pairs = BTreeSet::new();
    for (i, line) in model.lines.iter().enumerate() {
        let loc = format!("lines[{i}] ({}-{})", line.from, line.to);
        for end in [line.from, line.to] {
            if !seen.contains(&end) {
                report.push(ViolationKind::DanglingEndpoint, &loc, format!("endpoint {end} is not a bus"));
            }
        }
        if line.from == line.to {
            report.push(ViolationKind::SelfLoop, &loc, "line connects a bus to itself");
        } else if !pairs.insert(line.key()) {
            report.push(ViolationKind::DuplicateLine, &loc, "second line between the same buses");
        }
        positive(&mut report, &loc, "R", line.r, ViolationKind::NonPhysicalResistance);
        positive(&mut report, &loc, "L", line.l, ViolationKind::NonPhysicalInductance);
    }

    if !model.buses.is_empty() && !is_connected(model) {
        report.push(ViolationKind::Disconnected, "lines", "bus graph is not connected");
    }
    report
}

fn positive(report: &mut ValidationReport, loc: &str, name: &str, value: f64, kind: ViolationKind) {
    if !value.is_finite() {
        report.push(ViolationKind::NonFiniteValue, loc, format!("{name} = {value}"));
    } else if value <= 0.0 {
        report.push(kind, loc, format!("{name} = {value} must be > 0"));
    }
}

fn check_load(report: &mut ValidationReport, loc: &str, load: &LoadParams) {
    positive(report, loc, "R", load.r, ViolationKind::NonPhysicalResistance);
    positive(report, loc, "Rl", load.rl, ViolationKind::NonPhysicalResistance);
    positive(report, loc, "L", load.l, ViolationKind::NonPhysicalInductance);
    positive(report, loc, "C", load.c, ViolationKind::NonPhysicalCapacitance);
    if !(load.pf > 0.0 && load.pf <= 1.0) {
        report.push(ViolationKind::PowerFactorRange, loc, format!("pf = {} outside (0, 1]", load.pf));
    }
    for (name, v) in [("P", load.p), ("Q", load.q)] {
        if !v.is_finite() {
            report.push(ViolationKind::NonFiniteValue, loc, format!("{name} = {v}"));
        }
    }
}

fn check_pvb(report: &mut ValidationReport, loc: &str, p: &PvbParams) {
    // r_pv is a signed slope; only zero and non-finite values are rejected.
    if !p.r_pv.is_finite() || p.r_pv == 0.0 {
        report.push(
            ViolationKind::NonPhysicalResistance,
            loc,
            format!("R_PV = {} must be finite and non-zero", p.r_pv),
        );
    }
    if !p.i_pv.is_finite() {
        report.push(ViolationKind::NonFiniteValue, loc, format!("I_PV = {}", p.i_pv));
    }
    for (name, v) in [("R_2PV", p.r_2pv), ("R_s", p.r_s), ("R_e", p.r_e), ("R_t", p.r_t)] {
        positive(report, loc, name, v, ViolationKind::NonPhysicalResistance);
    }
    for (name, v) in [("L_1PV", p.l_1pv), ("L_2PV", p.l_2pv)] {
        positive(report, loc, name, v, ViolationKind::NonPhysicalInductance);
    }
    for (name, v) in [("C_PV", p.c_pv), ("C_s", p.c_s), ("C_b", p.c_b)] {
        positive(report, loc, name, v, ViolationKind::NonPhysicalCapacitance);
    }
    let op = p.operating_point;
    for (name, v) in [("d", op.d), ("m_a", op.m_a)] {
        if !(0.0..=1.0).contains(&v) {
            report.push(
                ViolationKind::ControlInputRange,
                format!("{loc}.operating_point"),
                format!("{name} = {v} outside [0, 1]"),
            );
        }
    }
    if !op.delta.is_finite() {
        report.push(
            ViolationKind::ControlInputRange,
            format!("{loc}.operating_point"),
            format!("delta = {}", op.delta),
        );
    }
}

fn is_connected(model: &NetworkModel) -> bool {
    let adj = model.adjacency();
    let Some(&start) = adj.keys().next() else {
        return true;
    };
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(b) = queue.pop_front() {
        for &n in &adj[&b] {
            if seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen.len() == adj.len()
}

// ---------------------------------------------------------------------------
// Document parsing
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
enum Quantity {
    Resistance,
    Inductance,
    Capacitance,
    Current,
    Power,
    ReactivePower,
    Angle,
    Ratio,
}

impl Quantity {
    /// Accepted key suffixes with their decimal exponent relative to SI.
    fn units(self) -> &'static [(&'static str, i32)] {
        match self {
            Quantity::Resistance => &[("ohm", 0), ("mohm", -3), ("kohm", 3)],
            Quantity::Inductance => &[("H", 0), ("mH", -3), ("uH", -6)],
            Quantity::Capacitance => &[("F", 0), ("mF", -3), ("uF", -6)],
            Quantity::Current => &[("A", 0), ("kA", 3)],
            Quantity::Power => &[("W", 0), ("kW", 3), ("MW", 6)],
            Quantity::ReactivePower => &[("var", 0), ("kvar", 3), ("Mvar", 6)],
            Quantity::Angle => &[("rad", 0)],
            Quantity::Ratio => &[],
        }
    }

    fn si_suffix(self) -> Option<&'static str> {
        self.units().first().map(|u| u.0)
    }
}

/// Parse a number's decimal text shifted by `exp10` decimal places, so unit
/// prefixes never introduce a second rounding.
fn scaled_number(n: &serde_json::Number, exp10: i32) -> Option<f64> {
    let text = n.to_string();
    if exp10 == 0 {
        return text.parse().ok();
    }
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text.as_str(), 0),
    };
    format!("{mantissa}e{}", exp + exp10).parse().ok()
}

struct Obj<'a> {
    map: &'a Map<String, Value>,
    loc: String,
}

impl<'a> Obj<'a> {
    fn new(value: &'a Value, loc: impl Into<String>) -> Result<Self> {
        let loc = loc.into();
        match value.as_object() {
            Some(map) => Ok(Obj { map, loc }),
            None => Err(Error::schema(loc, "expected an object")),
        }
    }

    fn field(&self, key: &str) -> String {
        format!("{}.{key}", self.loc)
    }

    fn number_key(&self, key: &str, exp10: i32) -> Result<f64> {
        match self.map.get(key) {
            Some(Value::Number(n)) => {
                scaled_number(n, exp10).ok_or_else(|| Error::schema(self.field(key), "unparseable number"))
            }
            Some(_) => Err(Error::schema(self.field(key), "expected a number")),
            None => Err(Error::schema(self.field(key), "missing field")),
        }
    }

    /// Look up `base` under any accepted unit suffix; exactly one must exist.
    fn quantity(&self, base: &str, q: Quantity) -> Result<f64> {
        if q.units().is_empty() {
            return self.number_key(base, 0);
        }
        let mut found = None;
        for (suffix, exp10) in q.units() {
            let key = format!("{base}_{suffix}");
            if self.map.contains_key(&key) {
                if found.is_some() {
                    return Err(Error::schema(self.field(base), "quantity given in more than one unit"));
                }
                found = Some(self.number_key(&key, *exp10)?);
            }
        }
        found.ok_or_else(|| {
            let accepted: Vec<String> = q.units().iter().map(|(s, _)| format!("{base}_{s}")).collect();
            Error::schema(self.field(base), format!("missing field (one of {})", accepted.join(", ")))
        })
    }

    fn optional_quantity(&self, base: &str, q: Quantity) -> Result<Option<f64>> {
        let present = if q.units().is_empty() {
            self.map.contains_key(base)
        } else {
            q.units().iter().any(|(s, _)| self.map.contains_key(&format!("{base}_{s}")))
        };
        if present {
            self.quantity(base, q).map(Some)
        } else {
            Ok(None)
        }
    }

    fn bus_id(&self, key: &str) -> Result<BusId> {
        match self.map.get(key) {
            Some(Value::Number(n)) => n
                .as_u64()
                .and_then(|v| BusId::try_from(v).ok())
                .ok_or_else(|| Error::schema(self.field(key), "expected a non-negative integer")),
            Some(_) => Err(Error::schema(self.field(key), "expected an integer")),
            None => Err(Error::schema(self.field(key), "missing field")),
        }
    }
}

fn parse_load(value: &Value, loc: String) -> Result<LoadParams> {
    let o = Obj::new(value, loc)?;
    Ok(LoadParams {
        p: o.quantity("P", Quantity::Power)?,
        q: o.quantity("Q", Quantity::ReactivePower)?,
        pf: o.quantity("pf", Quantity::Ratio)?,
        r: o.quantity("R", Quantity::Resistance)?,
        l: o.quantity("L", Quantity::Inductance)?,
        rl: o.quantity("Rl", Quantity::Resistance)?,
        c: o.quantity("C", Quantity::Capacitance)?,
    })
}

fn parse_control(value: &Value, loc: String) -> Result<ControlInput> {
    let o = Obj::new(value, loc)?;
    let default = ControlInput::default();
    Ok(ControlInput {
        d: o.optional_quantity("d", Quantity::Ratio)?.unwrap_or(default.d),
        delta: o.optional_quantity("delta", Quantity::Angle)?.unwrap_or(default.delta),
        m_a: o.optional_quantity("m_a", Quantity::Ratio)?.unwrap_or(default.m_a),
    })
}

fn parse_pvb(value: &Value, loc: String) -> Result<PvbParams> {
    let o = Obj::new(value, loc)?;
    let operating_point = match o.map.get("operating_point") {
        Some(v) => parse_control(v, o.field("operating_point"))?,
        None => ControlInput::default(),
    };
    Ok(PvbParams {
        r_pv: o.quantity("R_PV", Quantity::Resistance)?,
        i_pv: o.quantity("I_PV", Quantity::Current)?,
        l_1pv: o.quantity("L_1PV", Quantity::Inductance)?,
        c_pv: o.quantity("C_PV", Quantity::Capacitance)?,
        r_2pv: o.quantity("R_2PV", Quantity::Resistance)?,
        l_2pv: o.quantity("L_2PV", Quantity::Inductance)?,
        r_s: o.quantity("R_s", Quantity::Resistance)?,
        r_e: o.quantity("R_e", Quantity::Resistance)?,
        r_t: o.quantity("R_t", Quantity::Resistance)?,
        c_s: o.quantity("C_s", Quantity::Capacitance)?,
        c_b: o.quantity("C_b", Quantity::Capacitance)?,
        operating_point,
    })
}

fn parse_bus(value: &Value, loc: String) -> Result<BusSpec> {
    let o = Obj::new(value, loc)?;
    let id = o.bus_id("id")?;
    let kind = match o.map.get("kind").and_then(Value::as_str) {
        Some("PVB") => BusKind::Pvb,
        Some("Load") => BusKind::Load,
        Some(other) => {
            return Err(Error::schema(
                o.field("kind"),
                format!("unknown bus kind {other:?} (expected \"PVB\" or \"Load\")"),
            ))
        }
        None => return Err(Error::schema(o.field("kind"), "missing string field")),
    };
    let load = o.map.get("load").filter(|v| !v.is_null()).map(|v| parse_load(v, o.field("load"))).transpose()?;
    let pvb = o.map.get("pvb").filter(|v| !v.is_null()).map(|v| parse_pvb(v, o.field("pvb"))).transpose()?;
    Ok(BusSpec { id, kind, load, pvb })
}

fn parse_line(value: &Value, loc: String) -> Result<LineSpec> {
    let o = Obj::new(value, loc)?;
    Ok(LineSpec {
        from: o.bus_id("from")?,
        to: o.bus_id("to")?,
        r: o.quantity("R", Quantity::Resistance)?,
        l: o.quantity("L", Quantity::Inductance)?,
    })
}

/// Parse a network document without checking physical invariants.
pub fn parse_network_unchecked(text: &str) -> Result<NetworkModel> {
    let doc: Value = serde_json::from_str(text)?;
    let root = Obj::new(&doc, "$")?;
    let name = match root.map.get("name") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(Error::schema("$.name", "expected a string")),
        None => return Err(Error::schema("$.name", "missing field")),
    };
    let omega_nom = match (root.map.get("omega_rad_s"), root.map.get("omega_hz")) {
        (Some(_), Some(_)) => return Err(Error::schema("$.omega", "give either omega_hz or omega_rad_s")),
        (Some(_), None) => root.number_key("omega_rad_s", 0)?,
        (None, Some(_)) => 2.0 * PI * root.number_key("omega_hz", 0)?,
        (None, None) => 2.0 * PI * DEFAULT_FREQUENCY_HZ,
    };
    let list = |key: &str| -> Result<&Vec<Value>> {
        match root.map.get(key) {
            Some(Value::Array(items)) => Ok(items),
            Some(_) => Err(Error::schema(format!("$.{key}"), "expected an array")),
            None => Err(Error::schema(format!("$.{key}"), "missing field")),
        }
    };
    let buses = list("buses")?
        .iter()
        .enumerate()
        .map(|(i, v)| parse_bus(v, format!("$.buses[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let lines = list("lines")?
        .iter()
        .enumerate()
        .map(|(i, v)| parse_line(v, format!("$.lines[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkModel { name, omega_nom, buses, lines })
}

/// Parse and validate a network document.
pub fn parse_network(text: &str) -> Result<NetworkModel> {
    let model = parse_network_unchecked(text)?;
    if model.buses.is_empty() {
        return Err(Error::EmptyNetwork);
    }
    let report = validate(&model);
    if report.is_empty() {
        Ok(model)
    } else {
        Err(Error::InvalidNetwork { report })
    }
}

fn si(base: &str, q: Quantity, v: f64) -> (String, Value) {
    let key = match q.si_suffix() {
        Some(s) => format!("{base}_{s}"),
        None => base.to_string(),
    };
    (key, Value::from(v))
}

fn object(entries: Vec<(String, Value)>) -> Value {
    Value::Object(entries.into_iter().collect())
}

/// Serialize to a network document in SI-suffixed units. `parse_network`
/// of the result reproduces `model` field for field.
pub fn to_document(model: &NetworkModel) -> Value {
    use Quantity::*;
    let buses: Vec<Value> = model
        .buses
        .iter()
        .map(|b| {
            let mut e = vec![
                ("id".to_string(), Value::from(b.id)),
                (
                    "kind".to_string(),
                    Value::from(match b.kind {
                        BusKind::Pvb => "PVB",
                        BusKind::Load => "Load",
                    }),
                ),
            ];
            if let Some(l) = &b.load {
                e.push((
                    "load".to_string(),
                    object(vec![
                        si("P", Power, l.p),
                        si("Q", ReactivePower, l.q),
                        si("pf", Ratio, l.pf),
                        si("R", Resistance, l.r),
                        si("L", Inductance, l.l),
                        si("Rl", Resistance, l.rl),
                        si("C", Capacitance, l.c),
                    ]),
                ));
            }
            if let Some(p) = &b.pvb {
                let op = p.operating_point;
                e.push((
                    "pvb".to_string(),
                    object(vec![
                        si("R_PV", Resistance, p.r_pv),
                        si("I_PV", Current, p.i_pv),
                        si("L_1PV", Inductance, p.l_1pv),
                        si("C_PV", Capacitance, p.c_pv),
                        si("R_2PV", Resistance, p.r_2pv),
                        si("L_2PV", Inductance, p.l_2pv),
                        si("R_s", Resistance, p.r_s),
                        si("R_e", Resistance, p.r_e),
                        si("R_t", Resistance, p.r_t),
                        si("C_s", Capacitance, p.c_s),
                        si("C_b", Capacitance, p.c_b),
                        (
                            "operating_point".to_string(),
                            object(vec![si("d", Ratio, op.d), si("delta", Angle, op.delta), si("m_a", Ratio, op.m_a)]),
                        ),
                    ]),
                ));
            }
            object(e)
        })
        .collect();
    let lines: Vec<Value> = model
        .lines
        .iter()
        .map(|l| {
            object(vec![
                ("from".to_string(), Value::from(l.from)),
                ("to".to_string(), Value::from(l.to)),
                si("R", Resistance, l.r),
                si("L", Inductance, l.l),
            ])
        })
        .collect();
    object(vec![
        ("name".to_string(), Value::from(model.name.clone())),
        ("omega_rad_s".to_string(), Value::from(model.omega_nom)),
        ("buses".to_string(), Value::Array(buses)),
        ("lines".to_string(), Value::Array(lines)),
    ])
}

pub fn serialize_network(model: &NetworkModel) -> String {
    serde_json::to_string_pretty(&to_document(model)).expect("network document is valid JSON")
}

/// The bundled six-bus reference network.
pub fn reference_network() -> NetworkModel {
    parse_network(include_str!("../examples/six_bus.json")).expect("bundled network is valid")
}
