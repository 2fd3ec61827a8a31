//! Python module `nonnormal`: operators, spectral diagnostics and training
//! runs from `nonnormal-lab`. Matrices cross the boundary as lists of rows.

use nonnormal_lab::cli;
use nonnormal_lab::config::{self, Experiment, RunConfig, ToyConfig};
use nonnormal_lab::linalg::{self, DenseMatrix, C64};
use nonnormal_lab::model::{self, Dataset, InitScheme, MlpParams};
use nonnormal_lab::operators;
use nonnormal_lab::pseudospec::{self, GridSpec};
use nonnormal_lab::train;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde::Serialize;
use serde_json::Value;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DenseMatrix> {
    DenseMatrix::from_rows(&rows).map_err(value_err)
}

fn rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| m.re(r, c)).collect())
        .collect()
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    match v {
        Value::Null => Ok(py.None().into_bound(py)),
        Value::Bool(b) => b.into_bound_py_any(py),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_bound_py_any(py),
            None => n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py),
        },
        Value::String(s) => s.into_bound_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_bound_py_any(py)
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            dict.into_bound_py_any(py)
        }
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(py, &serde_json::to_value(value).map_err(runtime_err)?)
}

/// Eigendecomposition summary with unit-norm eigenvector columns.
#[pyclass(frozen, get_all, module = "nonnormal")]
struct Eig {
    eigenvalues: Vec<C64>,
    kappa_v: f64,
    spectral_radius: f64,
    diagonalizable: bool,
}

#[pymethods]
impl Eig {
    fn __repr__(&self) -> String {
        format!(
            "Eig(n={}, spectral_radius={}, kappa_v={}, diagonalizable={})",
            self.eigenvalues.len(),
            self.spectral_radius,
            self.kappa_v,
            self.diagonalizable
        )
    }
}

#[pyfunction]
fn eig(matrix_rows: Vec<Vec<f64>>) -> PyResult<Eig> {
    let e = linalg::eig(&matrix(matrix_rows)?).map_err(runtime_err)?;
    Ok(Eig {
        eigenvalues: e.eigenvalues,
        kappa_v: e.kappa_v,
        spectral_radius: e.spectral_radius,
        diagonalizable: e.diagonalizable,
    })
}

/// `‖J^t‖₂` for `t = 0..=t_max`.
#[pyfunction]
fn power_norms(matrix_rows: Vec<Vec<f64>>, t_max: usize) -> PyResult<Vec<f64>> {
    linalg::matrix_power_norms(&matrix(matrix_rows)?, t_max).map_err(runtime_err)
}

#[pyfunction]
fn operator_norm(matrix_rows: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(linalg::operator_norm_2(&matrix(matrix_rows)?))
}

#[pyfunction]
fn adam_frozen(h: Vec<Vec<f64>>, m: Vec<f64>, eta: f64) -> PyResult<Vec<Vec<f64>>> {
    let op = operators::build_adam_frozen(&matrix(h)?, &m, eta).map_err(value_err)?;
    Ok(rows(&op.matrix))
}

#[pyfunction]
fn sgdm_augmented(h: Vec<Vec<f64>>, eta: f64, beta: f64) -> PyResult<Vec<Vec<f64>>> {
    let op = operators::build_sgdm_augmented(&matrix(h)?, eta, beta).map_err(value_err)?;
    Ok(rows(&op.matrix))
}

#[pyfunction]
fn scalar_toy_operator(curvature: f64, eta: f64, beta: f64) -> PyResult<Vec<Vec<f64>>> {
    let op = operators::build_scalar_toy(curvature, eta, beta).map_err(value_err)?;
    Ok(rows(&op.matrix))
}

#[pyfunction]
fn is_normal(matrix_rows: Vec<Vec<f64>>) -> PyResult<bool> {
    Ok(operators::is_normal(&matrix(matrix_rows)?))
}

/// `JJ† − J†J`, real part.
#[pyfunction]
fn normality_commutator(matrix_rows: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let j = matrix(matrix_rows)?;
    if !j.is_square() {
        return Err(value_err("matrix must be square"));
    }
    Ok(rows(&operators::normality_commutator(&j)))
}

#[pyfunction]
fn hm_commutator(h: Vec<Vec<f64>>, m: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let c = operators::hm_commutator(&matrix(h)?, &m).map_err(value_err)?;
    Ok(rows(&c))
}

/// `σ_min(zI − J)` on a square grid; returns `(re_axis, im_axis, values)`
/// with `values[i_im][i_re]`.
#[pyfunction]
#[pyo3(signature = (matrix_rows, center=C64::new(0.0, 0.0), half_width=1.5, nodes=101))]
fn pseudospectrum(
    py: Python<'_>,
    matrix_rows: Vec<Vec<f64>>,
    center: C64,
    half_width: f64,
    nodes: usize,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let j = matrix(matrix_rows)?;
    let spec = GridSpec::square(center, half_width, nodes);
    let grid = py
        .detach(|| pseudospec::pseudospectrum(&j, spec))
        .map_err(value_err)?;
    let (nr, ni) = spec.resolution;
    let re = (0..nr).map(|i| spec.node(i, 0).re).collect();
    let im = (0..ni).map(|i| spec.node(0, i).im).collect();
    let values = (0..ni)
        .map(|i_im| (0..nr).map(|i_re| grid.value(i_re, i_im)).collect())
        .collect();
    Ok((re, im, values))
}

/// Certified lower bound on the Kreiss constant of a matrix with `ρ < 1`.
#[pyfunction]
#[pyo3(signature = (matrix_rows, radial=40, angular=64, refine_iters=6))]
fn kreiss_constant(
    py: Python<'_>,
    matrix_rows: Vec<Vec<f64>>,
    radial: usize,
    angular: usize,
    refine_iters: usize,
) -> PyResult<f64> {
    let j = matrix(matrix_rows)?;
    py.detach(|| pseudospec::kreiss_constant(&j, radial, angular, refine_iters))
        .map(|k| k.value)
        .map_err(value_err)
}

/// Precursor window `⌈ln κ / ln(1/ρ)⌉`, or `None` outside `κ > 1, 0 < ρ < 1`.
#[pyfunction]
fn precursor(kappa_v: f64, rho: f64) -> Option<u64> {
    pseudospec::precursor_from(kappa_v, rho).t_c
}

/// Slope of `log dist(center, ∂Λ_ε)` against `log ε`.
#[pyfunction]
fn ep_scaling_probe(matrix_rows: Vec<Vec<f64>>, center: C64, epsilons: Vec<f64>) -> PyResult<f64> {
    pseudospec::ep_scaling_probe(&matrix(matrix_rows)?, center, &epsilons)
        .map(|p| p.exponent)
        .map_err(value_err)
}

/// Closed-form report for momentum SGD on `λθ²/2`.
#[pyfunction]
#[pyo3(signature = (curvature=5.0, eta=0.18, beta=0.9, t_max=60))]
fn scalar_toy(
    py: Python<'_>,
    curvature: f64,
    eta: f64,
    beta: f64,
    t_max: usize,
) -> PyResult<Bound<'_, PyAny>> {
    let report = cli::cmd_toy(&ToyConfig {
        curvature,
        eta,
        beta,
        t_max,
    })
    .map_err(value_err)?;
    to_py(py, &report)
}

/// `(x_rows, y)` for the synthetic regression task.
#[pyfunction]
#[pyo3(signature = (seed, n=model::DEFAULT_DATA_SIZE))]
fn generate_dataset(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = Dataset::generate(seed, n);
    let x = (0..d.len()).map(|i| d.input(i).to_vec()).collect();
    (x, d.y)
}

fn dataset(x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<Dataset> {
    Dataset::from_arrays(x.into_iter().flatten().collect(), y).map_err(value_err)
}

fn params(theta: Vec<f64>) -> PyResult<MlpParams> {
    MlpParams::from_flat(theta).map_err(value_err)
}

/// Flat parameter vector in the order W1, b1, W2, b2.
#[pyfunction]
#[pyo3(signature = (seed, scheme="gaussian"))]
fn init_params(seed: u64, scheme: &str) -> PyResult<Vec<f64>> {
    let scheme = match scheme {
        "gaussian" => InitScheme::Gaussian,
        "uniform" => InitScheme::Uniform,
        other => return Err(value_err(format!("unknown init scheme `{other}`"))),
    };
    Ok(MlpParams::init_with(seed, scheme).into_flat())
}

#[pyfunction]
fn loss(theta: Vec<f64>, x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<f64> {
    Ok(model::loss(&params(theta)?, &dataset(x, y)?))
}

#[pyfunction]
fn gradient(theta: Vec<f64>, x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(model::gradient(&params(theta)?, &dataset(x, y)?))
}

/// Symmetrized finite-difference Hessian and its raw relative asymmetry.
#[pyfunction]
fn hessian(
    py: Python<'_>,
    theta: Vec<f64>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let (p, d) = (params(theta)?, dataset(x, y)?);
    let h = py.detach(|| model::hessian(&p, &d));
    Ok((rows(&h.matrix), h.asymmetry))
}

fn run_config(
    experiment: Experiment,
    preset: Option<&str>,
    config: Option<&str>,
    overrides: Vec<String>,
) -> PyResult<RunConfig> {
    let mut cfg = match (preset, config) {
        (Some(_), Some(_)) => return Err(value_err("pass either preset or config, not both")),
        (Some(name), None) => config::preset(name).map_err(value_err)?,
        (None, Some(text)) => RunConfig::from_toml(text).map_err(value_err)?,
        (None, None) => RunConfig::new(experiment),
    };
    cfg.experiment = experiment;
    let cfg = cfg.with_overrides(&overrides).map_err(value_err)?;
    cfg.validate().map_err(value_err)?;
    Ok(cfg)
}

/// One training run; `config` is TOML text. Returns the trace and its
/// lead-time report as a dict. A numerical abort is reported in the
/// `abort` field rather than raised.
#[pyfunction]
#[pyo3(signature = (preset=None, config=None, overrides=Vec::new()))]
fn train_run<'py>(
    py: Python<'py>,
    preset: Option<&str>,
    config: Option<&str>,
    overrides: Vec<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = run_config(Experiment::Train, preset, config, overrides)?;
    let trace = py
        .detach(|| train::run_training(&cfg.train))
        .map_err(runtime_err)?;
    let lead = train::lead_time(&trace);
    to_py(py, &serde_json::json!({ "trace": trace, "lead_time": lead }))
}

/// Multi-seed sweep; returns per-seed traces and the per-step aggregate.
#[pyfunction]
#[pyo3(signature = (preset=None, config=None, overrides=Vec::new()))]
fn sweep_run<'py>(
    py: Python<'py>,
    preset: Option<&str>,
    config: Option<&str>,
    overrides: Vec<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = run_config(Experiment::Sweep, preset, config, overrides)?;
    let result = py
        .detach(|| cli::cmd_sweep(&cfg.train, &cfg.sweep.seeds))
        .map_err(runtime_err)?;
    to_py(
        py,
        &serde_json::json!({
            "traces": result.traces,
            "rows": result.rows,
            "incomplete": result.incomplete,
        }),
    )
}

#[pymodule]
fn nonnormal(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Eig>()?;
    m.add("PARAM_COUNT", model::PARAM_COUNT)?;
    m.add("PRESETS", config::PRESETS.to_vec())?;
    m.add_function(wrap_pyfunction!(eig, m)?)?;
    m.add_function(wrap_pyfunction!(power_norms, m)?)?;
    m.add_function(wrap_pyfunction!(operator_norm, m)?)?;
    m.add_function(wrap_pyfunction!(adam_frozen, m)?)?;
    m.add_function(wrap_pyfunction!(sgdm_augmented, m)?)?;
    m.add_function(wrap_pyfunction!(scalar_toy_operator, m)?)?;
    m.add_function(wrap_pyfunction!(is_normal, m)?)?;
    m.add_function(wrap_pyfunction!(normality_commutator, m)?)?;
    m.add_function(wrap_pyfunction!(hm_commutator, m)?)?;
    m.add_function(wrap_pyfunction!(pseudospectrum, m)?)?;
    m.add_function(wrap_pyfunction!(kreiss_constant, m)?)?;
    m.add_function(wrap_pyfunction!(precursor, m)?)?;
    m.add_function(wrap_pyfunction!(ep_scaling_probe, m)?)?;
    m.add_function(wrap_pyfunction!(scalar_toy, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(init_params, m)?)?;
    m.add_function(wrap_pyfunction!(loss, m)?)?;
    m.add_function(wrap_pyfunction!(gradient, m)?)?;
    m.add_function(wrap_pyfunction!(hessian, m)?)?;
    m.add_function(wrap_pyfunction!(train_run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_run, m)?)?;
    Ok(())
}
