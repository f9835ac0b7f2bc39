#![allow(dead_code)]

use shs_lab::grid::{reference_network, BusKind, BusSpec, LineSpec, LoadParams, NetworkModel};
use shs_lab::segmentation::{reference_assignment, SegmentModel};
use shs_lab::ssbuild::{build_family, prepare_segments, ContingencySpec, ScenarioFamily};

pub const TS: f64 = 1e-6;
pub const TAU0: f64 = 0.01;

pub fn reference_segments() -> Vec<SegmentModel> {
    prepare_segments(&reference_network(), &reference_assignment()).unwrap()
}

/// The four-scenario family on line 1-4 of the first segment.
pub fn m1_family() -> ScenarioFamily {
    build_family(&reference_segments()[0], &m1_contingencies()).unwrap()
}

pub fn m1_contingencies() -> Vec<ContingencySpec> {
    ContingencySpec::standard_set([1, 4], 1)
}

pub fn load(c: f64) -> LoadParams {
    LoadParams { p: 0.0, q: 0.0, pf: 1.0, r: 2.0, l: 0.05, rl: 0.3, c }
}

pub fn load_bus(id: u32, c: f64) -> BusSpec {
    BusSpec { id, kind: BusKind::Load, load: Some(load(c)), pvb: None }
}

pub fn line(from: u32, to: u32, r: f64, l: f64) -> LineSpec {
    LineSpec { from, to, r, l }
}

pub fn network(buses: Vec<BusSpec>, lines: Vec<LineSpec>, omega: f64) -> NetworkModel {
    NetworkModel { name: "test".into(), omega_nom: omega, buses, lines }
}

pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Noise-free window generated by `sys` from `x0` under `probe`, with zero disturbance deviation.
pub fn synth_window(
    sys: &shs_lab::linalg::DiscreteStateSpace,
    x0: &nalgebra::DVector<f64>,
    probe: shs_lab::probing::ProbeSignal,
    steps: usize,
) -> shs_lab::detection::MeasurementWindow {
    use shs_lab::linalg::{simulate, Signal};
    let u2 = nalgebra::DVector::zeros(sys.n_disturbances());
    let trace =
        simulate(sys, x0, &Signal::Constant(probe.input(sys.n_inputs())), &Signal::Constant(u2.clone()), steps, false)
            .unwrap();
    shs_lab::detection::MeasurementWindow {
        t_start: 0.0,
        ts: sys.ts,
        samples: trace.outputs,
        probe,
        u2: vec![u2; steps + 1],
    }
}

/// Discretized first-segment family.
pub fn m1_discrete() -> Vec<shs_lab::linalg::DiscreteStateSpace> {
    m1_family().discretize(TS).unwrap()
}

/// Central-difference Jacobians of `c.rhs` with respect to x, u1 and u2.
pub fn fd_jacobian(
    c: &shs_lab::ssbuild::Circuit,
    x: &nalgebra::DVector<f64>,
    u1: &nalgebra::DVector<f64>,
    u2: &nalgebra::DVector<f64>,
) -> (nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>) {
    let f = |x: &nalgebra::DVector<f64>, u1: &nalgebra::DVector<f64>, u2: &nalgebra::DVector<f64>| {
        c.rhs(x, u1, u2).unwrap()
    };
    // Richardson-extrapolated central differences
    let col = |k: usize, v: &nalgebra::DVector<f64>, which: usize| {
        let d = |h: f64| {
            let (mut p, mut m) = (v.clone(), v.clone());
            p[k] += h;
            m[k] -= h;
            let (fp, fm) = match which {
                0 => (f(&p, u1, u2), f(&m, u1, u2)),
                1 => (f(x, &p, u2), f(x, &m, u2)),
                _ => (f(x, u1, &p), f(x, u1, &m)),
            };
            (fp - fm) / (2.0 * h)
        };
        let h = 1e-4 * v[k].abs().max(1.0);
        (d(h / 2.0) * 4.0 - d(h)) / 3.0
    };
    let n = x.len();
    let a = nalgebra::DMatrix::from_columns(&(0..n).map(|k| col(k, x, 0)).collect::<Vec<_>>());
    let b1 = nalgebra::DMatrix::from_columns(&(0..u1.len()).map(|k| col(k, u1, 1)).collect::<Vec<_>>());
    let b2 = if u2.is_empty() {
        nalgebra::DMatrix::zeros(n, 0)
    } else {
        nalgebra::DMatrix::from_columns(&(0..u2.len()).map(|k| col(k, u2, 2)).collect::<Vec<_>>())
    };
    (a, b1, b2)
}

/// Classical fourth-order Runge-Kutta for `x' = A x + B u` with constant `u`.
pub fn rk4(
    a: &nalgebra::DMatrix<f64>,
    b: &nalgebra::DMatrix<f64>,
    x0: &nalgebra::DVector<f64>,
    u: &nalgebra::DVector<f64>,
    h: f64,
    steps: usize,
) -> nalgebra::DVector<f64> {
    let bu = b * u;
    let f = |x: &nalgebra::DVector<f64>| a * x + &bu;
    let mut x = x0.clone();
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (h / 2.0)));
        let k3 = f(&(&x + &k2 * (h / 2.0)));
        let k4 = f(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    x
}

/// Orthonormal basis of the null space of `m`, from a column-pivoted QR of `m^T`.
pub fn null_basis(m: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
    let n = m.ncols();
    let qr = m.transpose().col_piv_qr();
    let r = qr.r();
    let top = r[(0, 0)].abs();
    let rank = (0..r.nrows().min(n)).filter(|&i| r[(i, i)].abs() > 1e-12 * top).count();
    let q = qr.q();
    // complete Q to a full basis of R^n
    let full = if q.ncols() == n { q } else { nalgebra::DMatrix::identity(n, n) };
    full.columns(rank, n - rank).into_owned()
}
