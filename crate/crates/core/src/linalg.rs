//! Eigenvalues, linear equilibria, zero-order-hold discretization and
//! discrete-time response simulation.

use nalgebra::{Complex, DMatrix, DVector, Schur};

use crate::error::{Error, Result};
use crate::ssbuild::StateSpaceModel;

const SCHUR_EPS: f64 = 1e-14;
const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues of `a`, sorted by real part then imaginary part.
pub fn eigenvalues_of(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("matrix is {}x{}, not square", a.nrows(), a.ncols())));
    }
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(a.clone(), SCHUR_EPS, SCHUR_MAX_ITER).ok_or(Error::EigenNonConvergence { n })?;
    let mut eigs: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(eigs)
}

pub fn eigenvalues(model: &StateSpaceModel) -> Result<Vec<Complex<f64>>> {
    eigenvalues_of(&model.a)
}

/// Largest real part of the spectrum (spectral abscissa).
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues_of(a)?.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max))
}

pub fn is_hurwitz(a: &DMatrix<f64>) -> Result<bool> {
    Ok(spectral_abscissa(a)? < 0.0)
}

/// `x* = -A^{-1} (B1 u1 + B2 u2)`.
pub fn equilibrium(model: &StateSpaceModel, u1: &DVector<f64>, u2: &DVector<f64>) -> Result<DVector<f64>> {
    if u1.len() != model.n_inputs() || u2.len() != model.n_disturbances() {
        return Err(Error::Dimension(format!(
            "expected u1:{} u2:{}, got {} {}",
            model.n_inputs(),
            model.n_disturbances(),
            u1.len(),
            u2.len()
        )));
    }
    let forcing = &model.b1 * u1 + &model.b2 * u2;
    let x = model.a.clone().lu().solve(&(-&forcing)).ok_or_else(|| Error::Singular("A is not invertible".into()))?;
    let residual = (&model.a * &x + &forcing).norm();
    if !x.iter().all(|v| v.is_finite()) || residual > 1e-9 * x.norm() {
        return Err(Error::Singular(format!("equilibrium residual {residual:e} too large")));
    }
    Ok(x)
}

/// Exact discretization under piecewise-constant inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteStateSpace {
    pub ad: DMatrix<f64>,
    pub bd1: DMatrix<f64>,
    pub bd2: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    pub ts: f64,
}

impl DiscreteStateSpace {
    pub fn n(&self) -> usize {
        self.ad.nrows()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.bd1.ncols()
    }

    pub fn n_disturbances(&self) -> usize {
        self.bd2.ncols()
    }
}

/// `exp([[A, B], [0, 0]] t)` gives `Ad` in the top-left and `∫exp(Aσ)dσ·B` in the top-right.
pub fn zoh_matrices(a: &DMatrix<f64>, b: &DMatrix<f64>, ts: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !ts.is_finite() || ts <= 0.0 {
        return Err(Error::InvalidArgument(format!("sample period {ts} must be finite and > 0")));
    }
    let n = a.nrows();
    let m = b.ncols();
    if !a.is_square() || b.nrows() != n {
        return Err(Error::Dimension(format!("A is {:?}, B is {:?}", a.shape(), b.shape())));
    }
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * ts));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * ts));
    let e = aug.exp();
    Ok((e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned()))
}

pub fn discretize_zoh(model: &StateSpaceModel, ts: f64) -> Result<DiscreteStateSpace> {
    let n = model.n();
    let m1 = model.n_inputs();
    let b =
        DMatrix::from_fn(
            n,
            m1 + model.n_disturbances(),
            |i, j| {
                if j < m1 {
                    model.b1[(i, j)]
                } else {
                    model.b2[(i, j - m1)]
                }
            },
        );
    let (ad, bd) = zoh_matrices(&model.a, &b, ts)?;
    Ok(DiscreteStateSpace {
        ad,
        bd1: bd.columns(0, m1).into_owned(),
        bd2: bd.columns(m1, model.n_disturbances()).into_owned(),
        c: model.c.clone(),
        d2: model.d2.clone(),
        ts,
    })
}

/// Input sequence for [`simulate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Signal {
    Constant(DVector<f64>),
    Samples(Vec<DVector<f64>>),
}

impl Signal {
    pub fn zeros(dim: usize) -> Self {
        Signal::Constant(DVector::zeros(dim))
    }

    fn dim(&self) -> Option<usize> {
        match self {
            Signal::Constant(v) => Some(v.len()),
            Signal::Samples(s) => s.first().map(|v| v.len()),
        }
    }

    fn len(&self) -> Option<usize> {
        match self {
            Signal::Constant(_) => None,
            Signal::Samples(s) => Some(s.len()),
        }
    }

    /// Sample `k`; the last sample is held past the end.
    pub fn at(&self, k: usize) -> &DVector<f64> {
        match self {
            Signal::Constant(v) => v,
            Signal::Samples(s) => &s[k.min(s.len() - 1)],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResponseTrace {
    pub times: Vec<f64>,
    pub outputs: Vec<DVector<f64>>,
    pub states: Option<Vec<DVector<f64>>>,
    /// Plain sum of the output components per sample.
    pub aggregate: Vec<f64>,
    /// State after the last step.
    pub final_state: DVector<f64>,
}

/// Run `steps` updates from `x0` and record the `steps + 1` samples `y_0..y_steps`.
pub fn simulate(
    sys: &DiscreteStateSpace,
    x0: &DVector<f64>,
    u1: &Signal,
    u2: &Signal,
    steps: usize,
    record_states: bool,
) -> Result<ResponseTrace> {
    let check = |what: &str, dim: Option<usize>, want: usize| -> Result<()> {
        match dim {
            Some(d) if d != want => Err(Error::Dimension(format!("{what} has dimension {d}, expected {want}"))),
            None if want != 0 => Err(Error::Dimension(format!("{what} is empty"))),
            _ => Ok(()),
        }
    };
    if x0.len() != sys.n() {
        return Err(Error::Dimension(format!("x0 has dimension {}, expected {}", x0.len(), sys.n())));
    }
    check("u1", u1.dim(), sys.n_inputs())?;
    check("u2", u2.dim(), sys.n_disturbances())?;
    for (what, sig) in [("u1", u1), ("u2", u2)] {
        if let Some(len) = sig.len() {
            if len < steps && !(len == 0 && steps == 0) {
                return Err(Error::Dimension(format!("{what} has {len} samples, {steps} steps requested")));
            }
            if len == 0 {
                return Err(Error::Dimension(format!("{what} has no samples")));
            }
        }
    }

    let mut x = x0.clone();
    let mut next = DVector::zeros(sys.n());
    let mut times = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut aggregate = Vec::with_capacity(steps + 1);
    let mut states = record_states.then(|| Vec::with_capacity(steps + 1));
    for k in 0..=steps {
        let mut y = DVector::zeros(sys.p());
        y.gemv(1.0, &sys.c, &x, 0.0);
        y.gemv(1.0, &sys.d2, u2.at(k), 1.0);
        times.push(k as f64 * sys.ts);
        aggregate.push(y.sum());
        outputs.push(y);
        if let Some(s) = states.as_mut() {
            s.push(x.clone());
        }
        if k < steps {
            next.gemv(1.0, &sys.ad, &x, 0.0);
            next.gemv(1.0, &sys.bd1, u1.at(k), 1.0);
            next.gemv(1.0, &sys.bd2, u2.at(k), 1.0);
            std::mem::swap(&mut x, &mut next);
        }
    }
    Ok(ResponseTrace { times, outputs, states, aggregate, final_state: x })
}
