//! Python bindings. Results come back as plain dicts and lists, built from
//! the same serialized form the command-line tool writes.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use onefifth::chain::consistency_check;
use onefifth::drift::{drift_ratio_mc, drift_scan};
use onefifth::es::{run_trajectory_with, RunOptions};
use onefifth::estimators::{
    estimate_bundle, estimate_cr_f_ratio, estimate_cr_timeavg, estimate_ps, BundleSetup,
};
use onefifth::experiment::{
    execute, parse_override, write_outputs, Command, Entry, ExperimentConfig,
};
use onefifth::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config { .. }
        | Error::InvalidParameter(_)
        | Error::DimensionMismatch { .. }
        | Error::NanInput(_)
        | Error::Domain(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "AlgoParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyAlgoParams(onefifth::AlgoParams);

#[pymethods]
impl PyAlgoParams {
    #[new]
    #[pyo3(signature = (n, gamma = (1.0f64 / 3.0).exp(), q = 4.0, allow_divergent = false))]
    fn new(n: usize, gamma: f64, q: f64, allow_divergent: bool) -> PyResult<Self> {
        onefifth::AlgoParams::with_divergent(n, gamma, q, allow_divergent)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma
    }

    #[getter]
    fn q(&self) -> f64 {
        self.0.q
    }

    /// `1/(q+1)`, where the expected change of ln σ vanishes.
    fn target_success(&self) -> f64 {
        self.0.target_success()
    }

    fn __repr__(&self) -> String {
        format!(
            "AlgoParams(n={}, gamma={}, q={})",
            self.0.n, self.0.gamma, self.0.q
        )
    }
}

#[pyclass(name = "ObjectiveFunction", frozen, from_py_object)]
#[derive(Clone)]
struct PyObjective(onefifth::ObjectiveFunction);

#[pymethods]
impl PyObjective {
    /// Builds a function from a key such as `sphere` or `quad:ell:100:g=log1p`.
    #[new]
    fn new(key: &str, n: usize) -> PyResult<Self> {
        onefifth::ObjectiveFunction::from_key(key, n)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn key(&self) -> String {
        self.0.key()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn degree(&self) -> f64 {
        self.0.core().degree()
    }

    #[getter]
    fn optimum(&self) -> Vec<f64> {
        self.0.optimum()
    }

    fn satisfies_assumptions(&self) -> bool {
        self.0.core().satisfies_assumptions()
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.evaluate(&x).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("ObjectiveFunction({:?}, n={})", self.0.key(), self.0.dim())
    }
}

/// Runs the (1+1)-ES and returns the trajectory as a dict.
#[pyfunction]
#[pyo3(signature = (params, f, x0, sigma0, steps, seed, stream = 0, stride = 1))]
#[allow(clippy::too_many_arguments)]
fn run_trajectory(
    py: Python<'_>,
    params: &PyAlgoParams,
    f: &PyObjective,
    x0: Vec<f64>,
    sigma0: f64,
    steps: u64,
    seed: u64,
    stream: u64,
    stride: usize,
) -> PyResult<Py<PyAny>> {
    let opts = RunOptions { stream, stride };
    let t = py
        .detach(|| run_trajectory_with(&params.0, &f.0, &x0, sigma0, steps, seed, opts))
        .map_err(py_err)?;
    to_py(py, &t)
}

/// Simulates the normalized chain on the core of `f`.
#[pyfunction]
#[pyo3(signature = (params, f, z0, steps, seed, burn_in = 0))]
fn run_chain(
    py: Python<'_>,
    params: &PyAlgoParams,
    f: &PyObjective,
    z0: Vec<f64>,
    steps: usize,
    seed: u64,
    burn_in: usize,
) -> PyResult<Py<PyAny>> {
    let rec = py
        .detach(|| onefifth::run_chain(&params.0, f.0.core(), &z0, steps, seed, burn_in))
        .map_err(py_err)?;
    to_py(py, &rec)
}

/// Success probability and convergence rate from one chain run, by the
/// time average of ln η and by the f-ratio route.
#[pyfunction]
#[pyo3(signature = (params, f, z0, steps, seed, burn_in = 0))]
fn estimate_chain(
    py: Python<'_>,
    params: &PyAlgoParams,
    f: &PyObjective,
    z0: Vec<f64>,
    steps: usize,
    seed: u64,
    burn_in: usize,
) -> PyResult<Py<PyAny>> {
    let out = py
        .detach(|| -> onefifth::Result<_> {
            let rec = onefifth::run_chain(&params.0, f.0.core(), &z0, steps, seed, burn_in)?;
            let ps = estimate_ps(&rec)?;
            let cr_from_ps = onefifth::estimators::cr_from_ps(ps.value, params.0.gamma, params.0.q);
            Ok(serde_json::json!({
                "ps": ps,
                "cr_from_ps": cr_from_ps,
                "cr_timeavg": estimate_cr_timeavg(&rec)?,
                "cr_f_ratio": estimate_cr_f_ratio(&rec, rec.alpha).ok(),
            }))
        })
        .map_err(py_err)?;
    to_py(py, &out)
}

/// All estimation routes for one configuration, with warnings.
#[pyfunction]
#[pyo3(signature = (params, f, x0, sigma0, trajectory_steps, chain_steps, seed, chain_burn_in = None))]
#[allow(clippy::too_many_arguments)]
fn estimate(
    py: Python<'_>,
    params: &PyAlgoParams,
    f: &PyObjective,
    x0: Vec<f64>,
    sigma0: f64,
    trajectory_steps: u64,
    chain_steps: usize,
    seed: u64,
    chain_burn_in: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let setup = BundleSetup {
        trajectory_steps,
        chain_steps,
        chain_burn_in,
        seed,
    };
    let report = py
        .detach(|| estimate_bundle(&params.0, &f.0, &x0, sigma0, &setup))
        .map_err(py_err)?;
    to_py(py, &report)
}

#[pyfunction]
fn cr_from_ps(ps: f64, gamma: f64, q: f64) -> f64 {
    onefifth::estimators::cr_from_ps(ps, gamma, q)
}

#[pyfunction]
#[pyo3(signature = (gamma, q, alpha = 2.0))]
fn linear_increase_condition(gamma: f64, q: f64, alpha: f64) -> f64 {
    onefifth::drift::linear_increase_condition(gamma, q, alpha)
}

#[pyfunction]
#[pyo3(signature = (gamma, q, alpha = 2.0))]
fn limit_at_zero(gamma: f64, q: f64, alpha: f64) -> f64 {
    onefifth::drift::limit_at_zero(gamma, q, alpha)
}

/// Monte Carlo estimate of the drift ratio at one point.
#[pyfunction]
#[pyo3(signature = (params, f, z, samples, seed, stream = 0))]
fn drift_ratio(
    py: Python<'_>,
    params: &PyAlgoParams,
    f: &PyObjective,
    z: Vec<f64>,
    samples: usize,
    seed: u64,
    stream: u64,
) -> PyResult<Py<PyAny>> {
    let est = py
        .detach(|| drift_ratio_mc(&params.0, f.0.core(), &z, samples, seed, stream))
        .map_err(py_err)?;
    to_py(py, &est)
}

/// Drift ratio over radii and the default directions.
#[pyfunction]
fn drift(
    py: Python<'_>,
    params: &PyAlgoParams,
    f: &PyObjective,
    radii: Vec<f64>,
    samples: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let scan = py
        .detach(|| drift_scan(&params.0, f.0.core(), &radii, None, samples, seed))
        .map_err(py_err)?;
    to_py(py, &scan)
}

/// Runs the algorithm and the chain on shared noise and compares them.
#[pyfunction]
fn consistency(
    py: Python<'_>,
    params: &PyAlgoParams,
    f: &PyObjective,
    x0: Vec<f64>,
    sigma0: f64,
    steps: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let r = py
        .detach(|| consistency_check(&params.0, &f.0, &x0, sigma0, steps, seed))
        .map_err(py_err)?;
    to_py(py, &r)
}

/// Same as the command-line tool: `command` is one of run, estimate, drift,
/// clt, validate-fn and `overrides` are `key=value` strings. Returns a dict
/// with the summary lines and, keyed by name, the contents of every output
/// file; with `out` the files and a manifest are also written there.
#[pyfunction]
#[pyo3(signature = (command, overrides = Vec::new(), out = None))]
fn run_experiment(
    py: Python<'_>,
    command: &str,
    overrides: Vec<String>,
    out: Option<PathBuf>,
) -> PyResult<Py<PyAny>> {
    let command = match command {
        "run" => Command::Run,
        "estimate" => Command::Estimate,
        "drift" => Command::Drift,
        "clt" => Command::Clt,
        "validate-fn" | "validate_fn" => Command::ValidateFn,
        other => return Err(PyValueError::new_err(format!("unknown command {other:?}"))),
    };
    let entries: Vec<Entry> = overrides
        .iter()
        .map(|o| parse_override(o))
        .collect::<onefifth::Result<_>>()
        .map_err(py_err)?;
    let config = ExperimentConfig::from_entries(&entries).map_err(py_err)?;
    let artifacts = py.detach(|| execute(&command, &config)).map_err(py_err)?;
    if let Some(dir) = &out {
        write_outputs(dir, &command, &config, &artifacts).map_err(py_err)?;
    }
    let result = PyDict::new(py);
    result.set_item("summary", artifacts.summary.clone())?;
    let files = PyDict::new(py);
    for (name, bytes) in &artifacts.files {
        files.set_item(name, String::from_utf8_lossy(bytes).into_owned())?;
    }
    result.set_item("files", files)?;
    Ok(result.into_any().unbind())
}

#[pymodule]
fn pyonefifth(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyAlgoParams>()?;
    m.add_class::<PyObjective>()?;
    m.add_function(wrap_pyfunction!(run_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(run_chain, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_chain, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(cr_from_ps, m)?)?;
    m.add_function(wrap_pyfunction!(linear_increase_condition, m)?)?;
    m.add_function(wrap_pyfunction!(limit_at_zero, m)?)?;
    m.add_function(wrap_pyfunction!(drift_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(drift, m)?)?;
    m.add_function(wrap_pyfunction!(consistency, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
