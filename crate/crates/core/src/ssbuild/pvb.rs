//! Nonlinear PV + battery element: boost chopper, DC link, two-capacitor
//! battery and a dq-frame inverter terminal filter.
//!
//! States `[i_pv, v_dc, i_tq, i_td, v_cs, v_cb]`, controls `[d, delta, m_a]`,
//! and the dq voltage of the bus the inverter feeds.
//!
//! The equations are written once, generic over [`Scalar`], and linearized
//! by forward-mode dual numbers.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::grid::PvbParams;

pub const PVB_STATES: usize = 6;
pub const PVB_INPUTS: usize = 3;

pub const I_PV: usize = 0;
pub const V_DC: usize = 1;
pub const I_TQ: usize = 2;
pub const I_TD: usize = 3;
pub const V_CS: usize = 4;
pub const V_CB: usize = 5;

pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
}

/// First-order dual number `v + d·ε`, `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    pub fn var(v: f64) -> Self {
        Dual { v, d: 1.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, d: self.d - o.d }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual { v: self.v * o.v, d: self.d * o.v + self.v * o.d }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual { v: self.v / o.v, d: (self.d * o.v - self.v * o.d) / (o.v * o.v) }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual { v: -self.v, d: -self.d }
    }
}

impl Scalar for Dual {
    fn cst(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }
    fn sin(self) -> Self {
        Dual { v: self.v.sin(), d: self.d * self.v.cos() }
    }
    fn cos(self) -> Self {
        Dual { v: self.v.cos(), d: -self.d * self.v.sin() }
    }
}

/// Time derivative of the PV-B states.
pub fn pvb_rhs<T: Scalar>(
    p: &PvbParams,
    omega: f64,
    x: &[T; PVB_STATES],
    u: &[T; PVB_INPUTS],
    v_bus: &[T; 2],
) -> [T; PVB_STATES] {
    let c = T::cst;
    let [i_pv, v_dc, i_tq, i_td, v_cs, v_cb] = *x;
    let [d, delta, m_a] = *u;
    let one_minus_d = c(1.0) - d;

    // linearized PV curve with signed slope r_pv around the short-circuit current
    let v_pv = c(p.r_pv) * (i_pv - c(p.i_pv));

    // battery internal node between R_t, R_s and R_e
    let g_sum = c(1.0 / p.r_t + 1.0 / p.r_e + 1.0 / p.r_s);
    let v_node = (v_dc / c(p.r_t) + v_cb / c(p.r_e) + v_cs / c(p.r_s)) / g_sum;
    let i_bat = (v_dc - v_node) / c(p.r_t);

    let (sin_d, cos_d) = (delta.sin(), delta.cos());
    let i_inv = c(0.75) * m_a * (cos_d * i_td + sin_d * i_tq);
    let e_q = c(0.5) * m_a * v_dc * sin_d;
    let e_d = c(0.5) * m_a * v_dc * cos_d;
    let w_l2 = c(omega * p.l_2pv);

    [
        (v_pv - one_minus_d * v_dc) / c(p.l_1pv),
        (one_minus_d * i_pv - i_inv - i_bat) / c(p.c_pv),
        (e_q - v_bus[0] - c(p.r_2pv) * i_tq + w_l2 * i_td) / c(p.l_2pv),
        (e_d - v_bus[1] - c(p.r_2pv) * i_td - w_l2 * i_tq) / c(p.l_2pv),
        (v_node - v_cs) / c(p.r_s * p.c_s),
        (v_node - v_cb) / c(p.r_e * p.c_b),
    ]
}

/// Partial derivatives of [`pvb_rhs`] at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct PvbJacobian {
    pub dx: [[f64; PVB_STATES]; PVB_STATES],
    pub du: [[f64; PVB_INPUTS]; PVB_STATES],
    pub dv: [[f64; 2]; PVB_STATES],
}

pub fn pvb_jacobian(
    p: &PvbParams,
    omega: f64,
    x: &[f64; PVB_STATES],
    u: &[f64; PVB_INPUTS],
    v_bus: &[f64; 2],
) -> PvbJacobian {
    let lift = |vals: &[f64], seed: Option<usize>| -> Vec<Dual> {
        vals.iter().enumerate().map(|(i, &v)| if Some(i) == seed { Dual::var(v) } else { Dual::cst(v) }).collect()
    };
    // 11 seeded evaluations: states, then controls, then bus voltage
    let eval = |which: usize, k: usize| -> [f64; PVB_STATES] {
        let xs = lift(x, (which == 0).then_some(k));
        let us = lift(u, (which == 1).then_some(k));
        let vs = lift(v_bus, (which == 2).then_some(k));
        let out =
            pvb_rhs(p, omega, &[xs[0], xs[1], xs[2], xs[3], xs[4], xs[5]], &[us[0], us[1], us[2]], &[vs[0], vs[1]]);
        out.map(|o| o.d)
    };
    let mut jac = PvbJacobian {
        dx: [[0.0; PVB_STATES]; PVB_STATES],
        du: [[0.0; PVB_INPUTS]; PVB_STATES],
        dv: [[0.0; 2]; PVB_STATES],
    };
    for k in 0..PVB_STATES {
        for (row, v) in eval(0, k).into_iter().enumerate() {
            jac.dx[row][k] = v;
        }
    }
    for k in 0..PVB_INPUTS {
        for (row, v) in eval(1, k).into_iter().enumerate() {
            jac.du[row][k] = v;
        }
    }
    for k in 0..2 {
        for (row, v) in eval(2, k).into_iter().enumerate() {
            jac.dv[row][k] = v;
        }
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::reference_network;

    fn params() -> PvbParams {
        reference_network().bus(4).unwrap().pvb.unwrap()
    }

    #[test]
    fn dual_jacobian_matches_central_differences() {
        let p = params();
        let x = [500.0, 170.0, 120.0, -80.0, 169.0, 171.0];
        let u = [0.5, 0.1, 0.8];
        let v = [10.0, 60.0];
        let jac = pvb_jacobian(&p, 377.0, &x, &u, &v);
        for k in 0..PVB_STATES {
            let h = 1e-4 * x[k].abs().max(1.0);
            let (mut xp, mut xm) = (x, x);
            xp[k] += h;
            xm[k] -= h;
            let fp = pvb_rhs(&p, 377.0, &xp, &u, &v);
            let fm = pvb_rhs(&p, 377.0, &xm, &u, &v);
            for row in 0..PVB_STATES {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                let scale = jac.dx[row][k].abs().max(1e-6);
                assert!((fd - jac.dx[row][k]).abs() / scale < 1e-6, "row {row} col {k}");
            }
        }
        for k in 0..PVB_INPUTS {
            let h = 1e-6;
            let (mut up, mut um) = (u, u);
            up[k] += h;
            um[k] -= h;
            let fp = pvb_rhs(&p, 377.0, &x, &up, &v);
            let fm = pvb_rhs(&p, 377.0, &x, &um, &v);
            for row in 0..PVB_STATES {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                let scale = jac.du[row][k].abs().max(1.0);
                assert!((fd - jac.du[row][k]).abs() / scale < 1e-6, "row {row} input {k}");
            }
        }
    }

    #[test]
    fn inverter_power_is_conserved_between_dc_and_ac_sides() {
        let p = params();
        let x = [0.0, 200.0, 30.0, 40.0, 200.0, 200.0];
        let u = [0.5, 0.3, 0.7];
        let v = [20.0, -15.0];
        let w = 377.0;
        let f = pvb_rhs(&p, w, &x, &u, &v);
        // recover the inverter EMF and DC-side current from the derivatives
        let e_q = p.l_2pv * f[I_TQ] + v[0] + p.r_2pv * x[I_TQ] - w * p.l_2pv * x[I_TD];
        let e_d = p.l_2pv * f[I_TD] + v[1] + p.r_2pv * x[I_TD] + w * p.l_2pv * x[I_TQ];
        let i_inv = -p.c_pv * f[V_DC];
        let ac = 1.5 * (e_q * x[I_TQ] + e_d * x[I_TD]);
        let dc = x[V_DC] * i_inv;
        assert!((ac - dc).abs() < 1e-9 * dc.abs());
    }

    #[test]
    fn battery_at_rest_draws_no_current() {
        let p = params();
        let x = [0.0, 150.0, 0.0, 0.0, 150.0, 150.0];
        let f = pvb_rhs(&p, 377.0, &x, &[1.0, 0.0, 0.0], &[0.0, 0.0]);
        assert!(f[V_CS].abs() < 1e-12);
        assert!(f[V_CB].abs() < 1e-12);
        assert!(f[V_DC].abs() < 1e-9);
    }
}
