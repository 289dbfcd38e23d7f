//! Python bindings: models, tilting families, θ solvers, estimators and oracles.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use tiltcopula::copulas::{CopulaSpec, CornerEvent, Direction, Model, RVineSpec};
use tiltcopula::estimators::{replicate, EventSpec, ExperimentConfig, HrtRule, Method, ThetaSource, SOLVER_STREAM};
use nalgebra::DMatrix;
use tiltcopula::randkit::{make_stream, MarginSpec};
use tiltcopula::tilting::{hrt_theta_asymptotic, solve_hrt_theta, solve_theta_saa, PilotConfig, Scheme, TiltFamily, TiltKind};
use tiltcopula::{oracle, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NonConvergence(_) | Error::DegeneratePilot(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("sigma must be a square list of lists"));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn margins(spec: Option<Vec<String>>, d: usize, default: MarginSpec) -> PyResult<Vec<MarginSpec>> {
    match spec {
        None => Ok(vec![default; d]),
        Some(v) if v.len() == 1 => Ok(vec![MarginSpec::parse(&v[0]).map_err(py_err)?; d]),
        Some(v) if v.len() == d => v.iter().map(|s| MarginSpec::parse(s).map_err(py_err)).collect(),
        Some(v) => Err(PyValueError::new_err(format!("{} margins for dimension {d}", v.len()))),
    }
}

fn corner(d: usize, p: Option<f64>, a: Option<Vec<f64>>, direction: &str) -> PyResult<CornerEvent> {
    let dir = Direction::parse(direction).map_err(py_err)?;
    match (p, a) {
        (Some(p), None) => Ok(CornerEvent::equal(d, p, dir)),
        (None, Some(a)) if a.len() == d => Ok(CornerEvent::new(dir, a)),
        (None, Some(_)) => Err(PyValueError::new_err("threshold vector length differs from the model dimension")),
        _ => Err(PyValueError::new_err("give exactly one of p or a")),
    }
}

/// A copula model with margins.
#[pyclass(name = "Model", module = "pytiltcopula", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: Model,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    #[pyo3(signature = (sigma, margins=None))]
    fn gaussian(sigma: Vec<Vec<f64>>, margins: Option<Vec<String>>) -> PyResult<Self> {
        let s = matrix(sigma)?;
        let m = self::margins(margins, s.nrows(), MarginSpec::std_normal())?;
        Ok(PyModel { inner: CopulaSpec::gaussian(s, m).map_err(py_err)?.into() })
    }

    #[staticmethod]
    #[pyo3(signature = (nu, sigma, margins=None))]
    fn student_t(nu: f64, sigma: Vec<Vec<f64>>, margins: Option<Vec<String>>) -> PyResult<Self> {
        let s = matrix(sigma)?;
        let m = self::margins(margins, s.nrows(), MarginSpec::std_normal())?;
        Ok(PyModel { inner: CopulaSpec::student_t(nu, s, m).map_err(py_err)?.into() })
    }

    #[staticmethod]
    #[pyo3(signature = (delta, dim=2, margins=None))]
    fn clayton(delta: f64, dim: usize, margins: Option<Vec<String>>) -> PyResult<Self> {
        let m = self::margins(margins, dim, MarginSpec::std_normal())?;
        Ok(PyModel { inner: CopulaSpec::clayton(delta, dim, m).map_err(py_err)?.into() })
    }

    /// "3d" or "4d" preset, or a vine description in the text format.
    #[staticmethod]
    fn vine(spec: &str) -> PyResult<Self> {
        let rv = match spec {
            "3d" => RVineSpec::example_3d(),
            "4d" => RVineSpec::example_4d(),
            text => RVineSpec::parse(text).map_err(py_err)?,
        };
        Ok(PyModel { inner: rv.into() })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    #[getter]
    fn params(&self) -> String {
        self.inner.params_label()
    }

    /// n crude draws on the margin scale.
    #[pyo3(signature = (n, seed=0, stream=0))]
    fn sample(&self, n: usize, seed: u64, stream: u64) -> PyResult<Vec<Vec<f64>>> {
        tiltcopula::copulas::sample_copula_crude(&self.inner, &mut make_stream(seed, stream), n).map_err(py_err)
    }

    fn rosenblatt_forward(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.rosenblatt_forward(&u).map_err(py_err)
    }

    fn rosenblatt_inverse(&self, v: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.rosenblatt_inverse(&v).map_err(py_err)
    }

    /// Deterministic probability of the corner event (gaussian, t, clayton).
    #[pyo3(signature = (p=None, a=None, direction="upper"))]
    fn corner_prob(&self, p: Option<f64>, a: Option<Vec<f64>>, direction: &str) -> PyResult<f64> {
        oracle::corner_prob(&self.inner, &corner(self.inner.dim(), p, a, direction)?).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Model({}, {})", self.inner.name(), self.inner.params_label())
    }
}

/// A tilting family: ψ and its derivatives, and tilted draws.
#[pyclass(name = "TiltFamily", module = "pytiltcopula", frozen)]
struct PyTiltFamily {
    inner: TiltFamily,
}

#[pymethods]
impl PyTiltFamily {
    #[staticmethod]
    fn trunc_exp_product(d: usize) -> Self {
        PyTiltFamily { inner: TiltFamily::trunc_exp_product(d) }
    }

    #[staticmethod]
    fn hazard_rate(d: usize) -> Self {
        PyTiltFamily { inner: TiltFamily::hazard_rate(d) }
    }

    #[staticmethod]
    fn mvn_shift(sigma: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PyTiltFamily { inner: TiltFamily::mvn_shift(matrix(sigma)?).map_err(py_err)? })
    }

    #[staticmethod]
    fn t_gamma_normal(nu: f64, sigma: Vec<Vec<f64>>, a_star: Vec<f64>) -> PyResult<Self> {
        Ok(PyTiltFamily { inner: TiltFamily::t_gamma_normal(nu, matrix(sigma)?, a_star).map_err(py_err)? })
    }

    #[staticmethod]
    fn clayton_mo(delta: f64, d: usize) -> PyResult<Self> {
        Ok(PyTiltFamily { inner: TiltFamily::clayton_mo(delta, d).map_err(py_err)? })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().label()
    }

    #[getter]
    fn theta_dim(&self) -> usize {
        self.inner.theta_dim()
    }

    fn psi(&self, theta: Vec<f64>) -> PyResult<f64> {
        self.inner.psi(&theta).map_err(py_err)
    }

    fn grad_psi(&self, theta: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.grad_psi(&theta).map_err(py_err)
    }

    fn hess_psi(&self, theta: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let h = self.inner.hess_psi(&theta).map_err(py_err)?;
        Ok((0..h.nrows()).map(|i| h.row(i).iter().copied().collect()).collect())
    }

    /// One tilted draw: (statistic, log likelihood ratio).
    #[pyo3(signature = (theta, seed=0, stream=0, conjugate=false))]
    fn sample(&self, theta: Vec<f64>, seed: u64, stream: u64, conjugate: bool) -> PyResult<(Vec<f64>, f64)> {
        let t = self.inner.sample_tilted(&mut make_stream(seed, stream), &theta, conjugate).map_err(py_err)?;
        Ok((t.stat, t.log_lr))
    }
}

fn tilt_kind(name: &str) -> PyResult<TiltKind> {
    TiltKind::parse(name).map_err(py_err)
}

/// Optimal tilting parameter for a corner event; returns the solution as a dict.
#[pyfunction]
#[pyo3(signature = (model, family, p=None, a=None, direction="upper", solver="saa", seed=0, n_pilot=None))]
#[allow(clippy::too_many_arguments)]
fn solve_theta(
    py: Python<'_>,
    model: &PyModel,
    family: &str,
    p: Option<f64>,
    a: Option<Vec<f64>>,
    direction: &str,
    solver: &str,
    seed: u64,
    n_pilot: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let m = &model.inner;
    let event = m.prepare_event(&corner(m.dim(), p, a, direction)?).map_err(py_err)?;
    let kind = tilt_kind(family)?;
    let mut cfg = PilotConfig::default();
    if let Some(n) = n_pilot {
        cfg.n_pilot = n;
    }
    let mut s = make_stream(seed, SOLVER_STREAM);
    let sol = match (kind, solver) {
        (TiltKind::HazardRate, "saa") => solve_hrt_theta(m, &event, &cfg, &mut s),
        (TiltKind::HazardRate, "asymptotic") => hrt_theta_asymptotic(m, &event),
        (_, "saa") => Scheme::new(m.clone(), event, kind).and_then(|sc| solve_theta_saa(&sc, &cfg, &mut s)),
        _ => return Err(PyValueError::new_err(format!("solver '{solver}' is not available for family '{family}' here"))),
    }
    .map_err(py_err)?;
    to_py(py, &sol)
}

/// Replicated estimate (M replications of n draws); returns the result as a dict.
#[pyfunction]
#[pyo3(signature = (model, method, p=None, a=None, direction="upper", n=500, reps=5000, seed=0, theta=None, hrt_rule="saa"))]
#[allow(clippy::too_many_arguments)]
fn estimate(
    py: Python<'_>,
    model: &PyModel,
    method: &str,
    p: Option<f64>,
    a: Option<Vec<f64>>,
    direction: &str,
    n: usize,
    reps: usize,
    seed: u64,
    theta: Option<Vec<f64>>,
    hrt_rule: &str,
) -> PyResult<Py<PyAny>> {
    let m = &model.inner;
    let ev = EventSpec::Corner(corner(m.dim(), p, a, direction)?);
    let mut cfg = ExperimentConfig::new(m.clone(), ev, Method::parse(method).map_err(py_err)?);
    cfg.n = n;
    cfg.reps = reps;
    cfg.seed = seed;
    if let Some(t) = theta {
        cfg.theta = ThetaSource::Explicit(t);
    }
    cfg.hrt_rule = match hrt_rule {
        "saa" => HrtRule::Saa,
        "asymptotic" => HrtRule::Asymptotic,
        o => return Err(PyValueError::new_err(format!("unknown hrt_rule '{o}'"))),
    };
    let r = py.detach(|| replicate(&cfg)).map_err(py_err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (delta, u0, dim=2))]
fn clayton_corner_prob(delta: f64, u0: f64, dim: usize) -> PyResult<f64> {
    oracle::clayton_orthant_prob(delta, &vec![u0; dim], Direction::Upper).map_err(py_err)
}

/// Monte Carlo oracle for vine upper corners {U > p}; returns a dict with a 99.9% interval.
#[pyfunction]
#[pyo3(signature = (model, p, n=1_000_000, seed=0))]
fn vine_corner_prob(py: Python<'_>, model: &PyModel, p: f64, n: u64, seed: u64) -> PyResult<Py<PyAny>> {
    let Model::Vine(rv) = &model.inner else { return Err(PyValueError::new_err("model is not a vine")) };
    let e = py.detach(|| oracle::vine_corner_prob(rv, p, n, seed));
    to_py(py, &e)
}

#[pymodule]
fn pytiltcopula(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyTiltFamily>()?;
    m.add_function(wrap_pyfunction!(solve_theta, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(clayton_corner_prob, m)?)?;
    m.add_function(wrap_pyfunction!(vine_corner_prob, m)?)?;
    Ok(())
}
