//! Python bindings for the `csawg` step-size planning toolkit.
//!
//! Structured results (traces, verification summaries, configs) cross the
//! boundary as plain dicts and lists via JSON.

use pyo3::exceptions::{PyValueError, PyRuntimeError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::Serialize;

use csawg::baselines::Optimizer;
use csawg::harness::{run_experiment, ExperimentConfig, ProblemSpec};
use csawg::planner::{Csawg, Pairing, PlannerConfig};
use csawg::presets::{preset, PRESET_NAMES};
use csawg::report::csv_string;
use csawg::theory::{self, StepSize};
use csawg::{Objective, ParamVector};

fn err(e: csawg::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: serde::de::DeserializeOwned>(value: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = match value.extract::<String>() {
        Ok(s) => s,
        Err(_) => value.py().import("json")?.call_method1("dumps", (value,))?.extract()?,
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn vector(v: Vec<f64>) -> PyResult<ParamVector> {
    ParamVector::new(v).map_err(err)
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<nalgebra::DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn parse_pairing(name: &str) -> PyResult<Pairing> {
    match name {
        "after_step" => Ok(Pairing::AfterStep),
        "before_step" => Ok(Pairing::BeforeStep),
        other => Err(PyValueError::new_err(format!(
            "unknown pairing `{other}`; expected after_step or before_step"
        ))),
    }
}

/// A planner bound to a problem, stepped one iteration at a time.
#[pyclass(unsendable)]
struct Planner {
    inner: Csawg,
    obj: Objective,
}

#[pymethods]
impl Planner {
    /// `problem` is a problem spec as a dict or JSON string, e.g.
    /// `{"name": "rosenbrock"}`.
    #[new]
    #[pyo3(signature = (problem, gamma, k, p=1, m=0, pairing="after_step", seed=0))]
    fn new(
        problem: &Bound<'_, PyAny>,
        gamma: f64,
        k: usize,
        p: usize,
        m: usize,
        pairing: &str,
        seed: u64,
    ) -> PyResult<Self> {
        let spec: ProblemSpec = from_py(problem)?;
        let (obj, w0) = spec.build(seed).map_err(err)?;
        let cfg = PlannerConfig::repeated(gamma, k, p, m).with_pairing(parse_pairing(pairing)?);
        Ok(Planner {
            inner: Csawg::new(w0, cfg).map_err(err)?,
            obj,
        })
    }

    /// Runs one iteration and returns the step-size vector if it planned.
    fn step(&mut self) -> PyResult<Option<Vec<f64>>> {
        let report = self.inner.step(&mut self.obj).map_err(err)?;
        Ok(report.alpha.map(Vec::from))
    }

    /// Runs `n` iterations and returns the error after each.
    fn run(&mut self, n: usize) -> PyResult<Vec<f64>> {
        (0..n)
            .map(|_| {
                self.inner.step(&mut self.obj).map_err(err)?;
                self.error()
            })
            .collect()
    }

    #[getter]
    fn position(&self) -> Vec<f64> {
        self.inner.position().as_slice().to_vec()
    }

    #[getter]
    fn iterations(&self) -> u64 {
        self.inner.steps()
    }

    #[getter]
    fn events(&self) -> u64 {
        self.inner.events()
    }

    #[getter]
    fn grad_evals(&self) -> u64 {
        self.obj.grad_evals()
    }

    /// Step-size from the most recent planning event.
    #[getter]
    fn alpha(&self) -> Option<Vec<f64>> {
        self.inner.last_stats().map(|s| s.alpha.as_slice().to_vec())
    }

    /// `f(w) − f*` at the current iterate.
    fn error(&self) -> PyResult<f64> {
        self.obj.error(self.inner.position()).map_err(err)
    }

    fn __repr__(&self) -> String {
        let c = self.inner.config();
        format!(
            "Planner(gamma={}, k={}, p={}, m={}, iterations={}, events={})",
            c.gamma,
            c.k,
            c.p,
            c.m,
            self.inner.steps(),
            self.inner.events()
        )
    }
}

/// Runs an experiment config and returns its trace as a dict.
#[pyfunction]
fn run<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let cfg: ExperimentConfig = from_py(config)?;
    let trace = py.detach(|| run_experiment(&cfg)).map_err(err)?;
    to_py(py, &trace)
}

/// Runs an experiment config and returns its trace as CSV text.
#[pyfunction]
fn run_csv(py: Python<'_>, config: &Bound<'_, PyAny>) -> PyResult<String> {
    let cfg: ExperimentConfig = from_py(config)?;
    let trace = py.detach(|| run_experiment(&cfg)).map_err(err)?;
    Ok(csv_string(&trace))
}

/// Checks the quadratic step-size theorems; returns per-check summaries.
#[pyfunction]
#[pyo3(signature = (trials=1000, max_dim=10, seed=0))]
fn verify(py: Python<'_>, trials: usize, max_dim: usize, seed: u64) -> PyResult<Bound<'_, PyAny>> {
    let reports = py
        .detach(|| theory::verify_theorems(trials, max_dim, seed))
        .map_err(err)?;
    to_py(py, &theory::summarize(&reports))
}

#[pyfunction]
fn preset_names() -> Vec<&'static str> {
    PRESET_NAMES.to_vec()
}

/// The experiment configs behind a named preset, as dicts.
#[pyfunction]
fn preset_configs<'py>(py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyAny>> {
    let p = preset(name).map_err(err)?;
    to_py(py, &p.configs)
}

#[pyfunction]
fn optimal_scalar_step(q: Vec<Vec<f64>>, w: Vec<f64>) -> PyResult<f64> {
    theory::optimal_scalar_step(&matrix(q)?, &vector(w)?).map_err(err)
}

#[pyfunction]
fn optimal_diag_step(q: Vec<Vec<f64>>, w: Vec<f64>) -> PyResult<Vec<f64>> {
    theory::optimal_diag_step(&matrix(q)?, &vector(w)?)
        .map(Vec::from)
        .map_err(err)
}

/// `f(w − α⊙Qw) / f(w)` for `f(w) = ½ wᵀQw`; `alpha` is a float or a list.
#[pyfunction]
fn reduction_ratio(q: Vec<Vec<f64>>, w: Vec<f64>, alpha: &Bound<'_, PyAny>) -> PyResult<f64> {
    let step = match alpha.extract::<f64>() {
        Ok(a) => StepSize::Scalar(a),
        Err(_) => StepSize::Diagonal(vector(alpha.extract()?)?),
    };
    theory::reduction_ratio(&matrix(q)?, &vector(w)?, &step).map_err(err)
}

#[pyfunction]
fn kantorovich_bound(mu: f64, l: f64) -> PyResult<f64> {
    theory::kantorovich_bound(mu, l).map_err(err)
}

#[pymodule]
fn csawg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Planner>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_csv, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(preset_configs, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_scalar_step, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_diag_step, m)?)?;
    m.add_function(wrap_pyfunction!(reduction_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(kantorovich_bound, m)?)?;
    Ok(())
}
