//! Lumped dq-frame circuit of a segment (or a whole network): PV-B units,
//! RL lines, auxiliary RL branches to disturbance voltage sources, and load
//! nodes with shunt C, parallel R and a series Rl-L branch.
//!
//! Two independent evaluation paths exist: [`Circuit::rhs`] walks the
//! elements and evaluates their equations directly, [`Circuit::linearize`]
//! stamps coefficients into `A`, `B1`, `B2`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::pvb::{self, pvb_jacobian, pvb_rhs, PVB_INPUTS, PVB_STATES};
use crate::error::{Error, Result};
use crate::grid::{BusId, LoadParams, NetworkModel, PvbParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    PvCurrent,
    DcVoltage,
    TerminalCurrent,
    BatteryVoltage,
    LineCurrent,
    AuxCurrent,
    BusVoltage,
    LoadCurrent,
}

impl StateKind {
    /// Line, auxiliary, load-branch and inverter terminal currents.
    pub fn is_network_current(self) -> bool {
        matches!(
            self,
            StateKind::LineCurrent | StateKind::AuxCurrent | StateKind::LoadCurrent | StateKind::TerminalCurrent
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LineMode {
    Normal,
    /// Resistive fault to ground at the line midpoint. The line inductance
    /// stays lumped on the `from` half; the `to` half is R/2.
    Faulted {
        r_f: f64,
    },
    /// Decoupled from both buses; the current decays through R/L.
    Outaged,
    /// Opened at the given end bus.
    OpenAt(BusId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitLine {
    pub from: BusId,
    pub to: BusId,
    pub r: f64,
    pub l: f64,
    pub mode: LineMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitAux {
    pub name: String,
    pub bus: BusId,
    pub r: f64,
    pub l: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub omega: f64,
    pub pvbs: Vec<(BusId, PvbParams)>,
    pub lines: Vec<CircuitLine>,
    pub aux: Vec<CircuitAux>,
    /// Load nodes, ascending bus id.
    pub nodes: Vec<(BusId, LoadParams)>,
}

/// Jacobians of the circuit at an operating point.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
}

impl Circuit {
    /// Whole-network circuit, every line in normal mode, no auxiliary branches.
    pub fn for_network(model: &NetworkModel) -> Result<Self> {
        let mut nodes: Vec<(BusId, LoadParams)> = Vec::new();
        let mut pvbs = Vec::new();
        for bus in &model.buses {
            let load = bus.load.ok_or(Error::SingularCapacitanceNode { bus: bus.id })?;
            nodes.push((bus.id, load));
            if let Some(p) = bus.pvb {
                pvbs.push((bus.id, p));
            }
        }
        nodes.sort_by_key(|n| n.0);
        pvbs.sort_by_key(|p| p.0);
        let lines = model
            .lines
            .iter()
            .map(|l| CircuitLine { from: l.from, to: l.to, r: l.r, l: l.l, mode: LineMode::Normal })
            .collect();
        Ok(Circuit { omega: model.omega_nom, pvbs, lines, aux: Vec::new(), nodes })
    }

    pub fn n_states(&self) -> usize {
        PVB_STATES * self.pvbs.len() + 2 * self.lines.len() + 2 * self.aux.len() + 4 * self.nodes.len()
    }

    pub fn n_inputs(&self) -> usize {
        PVB_INPUTS * self.pvbs.len()
    }

    pub fn n_disturbances(&self) -> usize {
        2 * self.aux.len()
    }

    pub fn pvb_offset(&self, i: usize) -> usize {
        PVB_STATES * i
    }

    pub fn line_offset(&self, j: usize) -> usize {
        PVB_STATES * self.pvbs.len() + 2 * j
    }

    pub fn aux_offset(&self, k: usize) -> usize {
        self.line_offset(self.lines.len()) + 2 * k
    }

    pub fn node_offset(&self, m: usize) -> usize {
        self.aux_offset(self.aux.len()) + 4 * m
    }

    pub fn node_index(&self, bus: BusId) -> Result<usize> {
        self.nodes.iter().position(|n| n.0 == bus).ok_or(Error::SingularCapacitanceNode { bus })
    }

    /// Every element must land on a node with a shunt capacitor.
    pub fn check(&self) -> Result<()> {
        for (bus, _) in &self.pvbs {
            self.node_index(*bus)?;
        }
        for line in &self.lines {
            self.node_index(line.from)?;
            self.node_index(line.to)?;
        }
        for aux in &self.aux {
            self.node_index(aux.bus)?;
        }
        Ok(())
    }

    pub fn state_labels(&self) -> (Vec<String>, Vec<StateKind>) {
        use StateKind::*;
        let mut labels = Vec::with_capacity(self.n_states());
        let mut kinds = Vec::with_capacity(self.n_states());
        let mut push = |l: String, k: StateKind| {
            labels.push(l);
            kinds.push(k);
        };
        for (bus, _) in &self.pvbs {
            push(format!("i_pv_{bus}"), PvCurrent);
            push(format!("v_dc_{bus}"), DcVoltage);
            push(format!("i_tq_{bus}"), TerminalCurrent);
            push(format!("i_td_{bus}"), TerminalCurrent);
            push(format!("v_cs_{bus}"), BatteryVoltage);
            push(format!("v_cb_{bus}"), BatteryVoltage);
        }
        for l in &self.lines {
            push(format!("I_{}_{}_q", l.from, l.to), LineCurrent);
            push(format!("I_{}_{}_d", l.from, l.to), LineCurrent);
        }
        for a in &self.aux {
            push(format!("I_{}_q", a.name), AuxCurrent);
            push(format!("I_{}_d", a.name), AuxCurrent);
        }
        for (bus, _) in &self.nodes {
            push(format!("V_{bus}_q"), BusVoltage);
            push(format!("V_{bus}_d"), BusVoltage);
            push(format!("I_LL{bus}_q"), LoadCurrent);
            push(format!("I_LL{bus}_d"), LoadCurrent);
        }
        (labels, kinds)
    }

    pub fn input_labels(&self) -> Vec<String> {
        self.pvbs
            .iter()
            .flat_map(|(bus, _)| [format!("d_{bus}"), format!("delta_{bus}"), format!("m_a_{bus}")])
            .collect()
    }

    pub fn disturbance_labels(&self) -> Vec<String> {
        self.aux.iter().flat_map(|a| [format!("V_{}_q", a.name), format!("V_{}_d", a.name)]).collect()
    }

    fn check_dims(&self, x: &DVector<f64>, u1: &DVector<f64>, u2: &DVector<f64>) -> Result<()> {
        if x.len() != self.n_states() || u1.len() != self.n_inputs() || u2.len() != self.n_disturbances() {
            return Err(Error::Dimension(format!(
                "circuit expects x:{} u1:{} u2:{}, got {} {} {}",
                self.n_states(),
                self.n_inputs(),
                self.n_disturbances(),
                x.len(),
                u1.len(),
                u2.len()
            )));
        }
        Ok(())
    }

    /// Direct evaluation of the nonlinear element equations.
    pub fn rhs(&self, x: &DVector<f64>, u1: &DVector<f64>, u2: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dims(x, u1, u2)?;
        let w = self.omega;
        let mut dx = DVector::zeros(self.n_states());
        // net current injected into each node, (q, d)
        let mut inj = vec![[0.0f64; 2]; self.nodes.len()];
        let volt = |m: usize| {
            let o = self.node_offset(m);
            [x[o], x[o + 1]]
        };

        for (j, line) in self.lines.iter().enumerate() {
            let o = self.line_offset(j);
            let i = [x[o], x[o + 1]];
            let f = self.node_index(line.from)?;
            let t = self.node_index(line.to)?;
            let (vf, vt) = (volt(f), volt(t));
            let rot = [w * line.l * i[1], -w * line.l * i[0]];
            match line.mode {
                LineMode::Normal => {
                    for ax in 0..2 {
                        dx[o + ax] = (vf[ax] - vt[ax] - line.r * i[ax] + rot[ax]) / line.l;
                        inj[f][ax] -= i[ax];
                        inj[t][ax] += i[ax];
                    }
                }
                LineMode::Faulted { r_f } => {
                    let half = line.r / 2.0;
                    for ax in 0..2 {
                        // midpoint KCL: i = v_m / r_f + (v_m - v_t) / half
                        let v_mid = (i[ax] + vt[ax] / half) / (1.0 / r_f + 1.0 / half);
                        dx[o + ax] = (vf[ax] - v_mid - half * i[ax] + rot[ax]) / line.l;
                        inj[f][ax] -= i[ax];
                        inj[t][ax] += (v_mid - vt[ax]) / half;
                    }
                }
                LineMode::Outaged => {
                    for ax in 0..2 {
                        dx[o + ax] = -line.r / line.l * i[ax];
                    }
                }
                LineMode::OpenAt(end) => {
                    let open_to = end == line.to;
                    for ax in 0..2 {
                        let drive = if open_to { vf[ax] } else { -vt[ax] };
                        dx[o + ax] = (drive - line.r * i[ax] + rot[ax]) / line.l;
                        if open_to {
                            inj[f][ax] -= i[ax];
                        } else {
                            inj[t][ax] += i[ax];
                        }
                    }
                }
            }
        }

        for (k, aux) in self.aux.iter().enumerate() {
            let o = self.aux_offset(k);
            let i = [x[o], x[o + 1]];
            let n = self.node_index(aux.bus)?;
            let v = volt(n);
            let rot = [w * aux.l * i[1], -w * aux.l * i[0]];
            for ax in 0..2 {
                dx[o + ax] = (v[ax] - u2[2 * k + ax] - aux.r * i[ax] + rot[ax]) / aux.l;
                inj[n][ax] -= i[ax];
            }
        }

        for (i, (bus, params)) in self.pvbs.iter().enumerate() {
            let o = self.pvb_offset(i);
            let n = self.node_index(*bus)?;
            let xs: [f64; PVB_STATES] = std::array::from_fn(|s| x[o + s]);
            let us: [f64; PVB_INPUTS] = std::array::from_fn(|s| u1[PVB_INPUTS * i + s]);
            let f = pvb_rhs(params, w, &xs, &us, &volt(n));
            for (s, v) in f.into_iter().enumerate() {
                dx[o + s] = v;
            }
            inj[n][0] += xs[pvb::I_TQ];
            inj[n][1] += xs[pvb::I_TD];
        }

        for (m, (_, load)) in self.nodes.iter().enumerate() {
            let o = self.node_offset(m);
            let (vq, vd, iq, id) = (x[o], x[o + 1], x[o + 2], x[o + 3]);
            dx[o] = (inj[m][0] - vq / load.r - iq + w * load.c * vd) / load.c;
            dx[o + 1] = (inj[m][1] - vd / load.r - id - w * load.c * vq) / load.c;
            dx[o + 2] = (vq - load.rl * iq + w * load.l * id) / load.l;
            dx[o + 3] = (vd - load.rl * id - w * load.l * iq) / load.l;
        }
        Ok(dx)
    }

    /// Stamp `A`, `B1`, `B2` at the operating point `(x, u1)`. Only the
    /// PV-B blocks depend on the operating point.
    pub fn linearize(&self, x: &DVector<f64>, u1: &DVector<f64>) -> Result<Linearization> {
        let n = self.n_states();
        self.check_dims(x, u1, &DVector::zeros(self.n_disturbances()))?;
        let w = self.omega;
        let mut a = DMatrix::zeros(n, n);
        let mut b1 = DMatrix::zeros(n, self.n_inputs());
        let mut b2 = DMatrix::zeros(n, self.n_disturbances());
        let cap = |m: usize| self.nodes[m].1.c;

        for (m, (_, load)) in self.nodes.iter().enumerate() {
            let (vq, vd, iq, id) = {
                let o = self.node_offset(m);
                (o, o + 1, o + 2, o + 3)
            };
            let (r, c, l, rl) = (load.r, load.c, load.l, load.rl);
            a[(vq, vq)] = -1.0 / (r * c);
            a[(vq, vd)] = w;
            a[(vq, iq)] = -1.0 / c;
            a[(vd, vd)] = -1.0 / (r * c);
            a[(vd, vq)] = -w;
            a[(vd, id)] = -1.0 / c;
            a[(iq, vq)] = 1.0 / l;
            a[(iq, iq)] = -rl / l;
            a[(iq, id)] = w;
            a[(id, vd)] = 1.0 / l;
            a[(id, id)] = -rl / l;
            a[(id, iq)] = -w;
        }

        // RL series stamp between a driving node (+1) and a receiving node (-1)
        let rl_branch = |a: &mut DMatrix<f64>, row: usize, r: f64, l: f64| {
            a[(row, row)] -= r / l;
            a[(row, row + 1)] += w;
            a[(row + 1, row + 1)] -= r / l;
            a[(row + 1, row)] -= w;
        };

        for (j, line) in self.lines.iter().enumerate() {
            let row = self.line_offset(j);
            let f = self.node_index(line.from)?;
            let t = self.node_index(line.to)?;
            let (fo, to) = (self.node_offset(f), self.node_offset(t));
            let l = line.l;
            match line.mode {
                LineMode::Normal => {
                    rl_branch(&mut a, row, line.r, l);
                    for ax in 0..2 {
                        a[(row + ax, fo + ax)] += 1.0 / l;
                        a[(row + ax, to + ax)] -= 1.0 / l;
                        a[(fo + ax, row + ax)] -= 1.0 / cap(f);
                        a[(to + ax, row + ax)] += 1.0 / cap(t);
                    }
                }
                LineMode::Faulted { r_f } => {
                    let half = line.r / 2.0;
                    let g = 1.0 / r_f + 1.0 / half;
                    // v_mid = ka * i + kb * v_to
                    let (ka, kb) = (1.0 / g, 1.0 / (half * g));
                    rl_branch(&mut a, row, half + ka, l);
                    for ax in 0..2 {
                        a[(row + ax, fo + ax)] += 1.0 / l;
                        a[(row + ax, to + ax)] -= kb / l;
                        a[(fo + ax, row + ax)] -= 1.0 / cap(f);
                        a[(to + ax, row + ax)] += ka / half / cap(t);
                        a[(to + ax, to + ax)] += (kb - 1.0) / half / cap(t);
                    }
                }
                LineMode::Outaged => {
                    a[(row, row)] = -line.r / l;
                    a[(row + 1, row + 1)] = -line.r / l;
                }
                LineMode::OpenAt(end) => {
                    rl_branch(&mut a, row, line.r, l);
                    for ax in 0..2 {
                        if end == line.to {
                            a[(row + ax, fo + ax)] += 1.0 / l;
                            a[(fo + ax, row + ax)] -= 1.0 / cap(f);
                        } else {
                            a[(row + ax, to + ax)] -= 1.0 / l;
                            a[(to + ax, row + ax)] += 1.0 / cap(t);
                        }
                    }
                }
            }
        }

        for (k, aux) in self.aux.iter().enumerate() {
            let row = self.aux_offset(k);
            let m = self.node_index(aux.bus)?;
            let mo = self.node_offset(m);
            rl_branch(&mut a, row, aux.r, aux.l);
            for ax in 0..2 {
                a[(row + ax, mo + ax)] += 1.0 / aux.l;
                b2[(row + ax, 2 * k + ax)] = -1.0 / aux.l;
                a[(mo + ax, row + ax)] -= 1.0 / cap(m);
            }
        }

        for (i, (bus, params)) in self.pvbs.iter().enumerate() {
            let o = self.pvb_offset(i);
            let m = self.node_index(*bus)?;
            let mo = self.node_offset(m);
            let xs: [f64; PVB_STATES] = std::array::from_fn(|s| x[o + s]);
            let us: [f64; PVB_INPUTS] = std::array::from_fn(|s| u1[PVB_INPUTS * i + s]);
            let jac = pvb_jacobian(params, w, &xs, &us, &[x[mo], x[mo + 1]]);
            for r in 0..PVB_STATES {
                for c in 0..PVB_STATES {
                    a[(o + r, o + c)] = jac.dx[r][c];
                }
                for c in 0..PVB_INPUTS {
                    b1[(o + r, PVB_INPUTS * i + c)] = jac.du[r][c];
                }
                a[(o + r, mo)] = jac.dv[r][0];
                a[(o + r, mo + 1)] = jac.dv[r][1];
            }
            a[(mo, o + pvb::I_TQ)] += 1.0 / cap(m);
            a[(mo + 1, o + pvb::I_TD)] += 1.0 / cap(m);
        }
        Ok(Linearization { a, b1, b2 })
    }

    /// Solve `rhs(x, u1, u2) = 0` by Newton iteration on the stamped Jacobian.
    pub fn equilibrium(&self, u1: &DVector<f64>, u2: &DVector<f64>) -> Result<DVector<f64>> {
        const MAX_ITER: usize = 50;
        let mut x = DVector::zeros(self.n_states());
        for _ in 0..MAX_ITER {
            let f = self.rhs(&x, u1, u2)?;
            let jac = self.linearize(&x, u1)?.a;
            // componentwise backward-error scale of the residual
            let scale = (jac.abs() * x.abs()).norm().max(u2.norm()).max(1.0);
            if f.norm() <= 1e-12 * scale {
                return Ok(x);
            }
            let step = jac.lu().solve(&f).ok_or_else(|| Error::NoEquilibrium("singular Jacobian".into()))?;
            x -= &step;
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::NoEquilibrium("iterate became non-finite".into()));
            }
        }
        Err(Error::NoEquilibrium(format!("Newton did not converge in {MAX_ITER} iterations")))
    }
}
