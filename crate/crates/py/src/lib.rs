//! Python bindings for `bornsim`.
//!
//! Outcomes are passed as `+1` / `-1`. Rates are returned as natural logs, as
//! in the Rust API, because they overflow `f64` for long records.

use bornsim::analytic::{self, DensityMatrix2};
use bornsim::model::{self, Outcome, RateMode};
use bornsim::oracle;
use bornsim::sampler;
use bornsim::trajectory;
use bornsim::ModelError;
use num_complex::Complex64;
use pyo3::exceptions::{PyOverflowError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: ModelError) -> PyErr {
    match e {
        ModelError::Capacity { .. } => PyOverflowError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn outcome(sign: i32) -> PyResult<Outcome> {
    match sign {
        1 => Ok(Outcome::Plus),
        -1 => Ok(Outcome::Minus),
        other => Err(PyValueError::new_err(format!("outcome must be +1 or -1, got {other}"))),
    }
}

fn mode(asymptotic: bool) -> RateMode {
    if asymptotic {
        RateMode::Asymptotic
    } else {
        RateMode::ExactProduct
    }
}

/// Two-level system state `ψ₊|+⟩ + ψ₋|−⟩`.
#[pyclass(name = "QubitState", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyQubitState(model::QubitState);

#[pymethods]
impl PyQubitState {
    /// State with `|ψ₊|² = p_plus` and relative phase `arg ψ₊ − arg ψ₋`.
    #[new]
    #[pyo3(signature = (p_plus, relative_phase = 0.0))]
    fn new(p_plus: f64, relative_phase: f64) -> PyResult<Self> {
        model::QubitState::from_probability(p_plus, relative_phase).map(Self).map_err(to_py)
    }

    /// State from explicit amplitudes; must be normalized.
    #[staticmethod]
    fn from_amplitudes(psi_plus: Complex64, psi_minus: Complex64) -> PyResult<Self> {
        model::QubitState::new(psi_plus, psi_minus).map(Self).map_err(to_py)
    }

    #[getter]
    fn psi_plus(&self) -> Complex64 {
        self.0.psi_plus()
    }

    #[getter]
    fn psi_minus(&self) -> Complex64 {
        self.0.psi_minus()
    }

    /// `|ψ_j|²` for `j = ±1`.
    fn weight(&self, j: i32) -> PyResult<f64> {
        Ok(self.0.weight(outcome(j)?))
    }

    fn __repr__(&self) -> String {
        format!("QubitState(psi_plus={}, psi_minus={})", self.0.psi_plus(), self.0.psi_minus())
    }
}

/// Coupling strength `κ`, step count `N` and per-step phases.
#[pyclass(name = "ModelParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModelParams(model::ModelParams);

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (kappa, n_steps, phases = None))]
    fn new(kappa: f64, n_steps: usize, phases: Option<Vec<f64>>) -> PyResult<Self> {
        match phases {
            Some(p) => model::ModelParams::with_phases(kappa, n_steps, p),
            None => model::ModelParams::new(kappa, n_steps),
        }
        .map(Self)
        .map_err(to_py)
    }

    /// Parameters with `N = round(ξ/κ²)`.
    #[staticmethod]
    fn from_xi(kappa: f64, xi: f64) -> PyResult<Self> {
        model::ModelParams::from_xi(kappa, xi).map(Self).map_err(to_py)
    }

    /// Copy with `total` split evenly over the steps.
    fn with_total_phase(&self, total: f64) -> Self {
        Self(self.0.clone().with_total_phase(total))
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.0.kappa()
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.0.n_steps()
    }

    #[getter]
    fn xi(&self) -> f64 {
        self.0.xi()
    }

    #[getter]
    fn total_phase(&self) -> f64 {
        self.0.total_phase()
    }

    fn __repr__(&self) -> String {
        format!("ModelParams(kappa={}, n_steps={})", self.0.kappa(), self.0.n_steps())
    }
}

/// A record of apparatus steps `ε_n ∈ {+1, −1}`.
#[pyclass(name = "EpsilonConfig", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyEpsilonConfig(model::EpsilonConfig);

#[pymethods]
impl PyEpsilonConfig {
    #[new]
    fn new(steps: Vec<i8>) -> PyResult<Self> {
        model::EpsilonConfig::new(steps).map(Self).map_err(to_py)
    }

    /// Configuration whose bit `n` of `mask` set means `ε_{n+1} = +1`.
    #[staticmethod]
    fn from_bits(mask: u64, n_steps: usize) -> Self {
        Self(model::EpsilonConfig::from_bits(mask, n_steps))
    }

    #[getter]
    fn steps(&self) -> Vec<i8> {
        self.0.steps().to_vec()
    }

    fn count_plus(&self) -> usize {
        self.0.count_plus()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyfunction]
fn z_sum(config: &PyEpsilonConfig) -> i64 {
    model::z_sum(&config.0)
}

#[pyfunction]
fn y_coordinate(config: &PyEpsilonConfig, params: &PyModelParams) -> PyResult<f64> {
    model::y_coordinate(&config.0, &params.0).map_err(to_py)
}

/// `ln|b^{(j)}|²` for outcome `j = ±1`.
#[pyfunction]
#[pyo3(signature = (config, params, j, asymptotic = false))]
fn branch_rate(config: &PyEpsilonConfig, params: &PyModelParams, j: i32, asymptotic: bool) -> PyResult<f64> {
    model::branch_rate(&config.0, &params.0, outcome(j)?, mode(asymptotic)).map_err(to_py)
}

/// `ln w`, the log of the total rate.
#[pyfunction]
#[pyo3(signature = (config, params, psi, asymptotic = false))]
fn total_rate(config: &PyEpsilonConfig, params: &PyModelParams, psi: &PyQubitState, asymptotic: bool) -> PyResult<f64> {
    model::total_rate(&config.0, &params.0, &psi.0, mode(asymptotic)).map_err(to_py)
}

/// `(p₊, p₋)` for one configuration.
#[pyfunction]
#[pyo3(signature = (config, params, psi, asymptotic = false))]
fn outcome_probabilities(
    config: &PyEpsilonConfig,
    params: &PyModelParams,
    psi: &PyQubitState,
    asymptotic: bool,
) -> PyResult<(f64, f64)> {
    let p = model::outcome_probabilities(&config.0, &params.0, &psi.0, mode(asymptotic)).map_err(to_py)?;
    Ok((p.plus, p.minus))
}

#[pyfunction]
fn q_density(y: f64, xi: f64) -> PyResult<f64> {
    analytic::q_density(y, xi).map_err(to_py)
}

/// `ln w(Y)`.
#[pyfunction]
fn rate_function(y: f64, xi: f64, psi: &PyQubitState) -> PyResult<f64> {
    analytic::rate_function(y, xi, &psi.0).map_err(to_py)
}

#[pyfunction]
fn final_density(y: f64, xi: f64, psi: &PyQubitState) -> PyResult<f64> {
    analytic::final_density(y, xi, &psi.0).map_err(to_py)
}

fn matrix(rho: DensityMatrix2) -> [[Complex64; 2]; 2] {
    rho.entries()
}

/// 2×2 nested list `[[ρ₊₊, ρ₊₋], [ρ₋₊, ρ₋₋]]`.
#[pyfunction]
fn density_matrix(y: f64, phi: f64, xi: f64, psi: &PyQubitState) -> PyResult<[[Complex64; 2]; 2]> {
    analytic::density_matrix(y, phi, xi, &psi.0).map(matrix).map_err(to_py)
}

#[pyfunction]
fn mean_final_density_matrix(xi: f64, phi: f64, psi: &PyQubitState) -> PyResult<[[Complex64; 2]; 2]> {
    analytic::mean_final_density_matrix(xi, phi, &psi.0).map(matrix).map_err(to_py)
}

/// Frequency of the `+` outcome over `n_samples` physical measurements.
#[pyfunction]
#[pyo3(signature = (seed, params, psi, n_samples, workers = 0))]
fn estimate_born<'py>(
    py: Python<'py>,
    seed: u64,
    params: &PyModelParams,
    psi: &PyQubitState,
    n_samples: usize,
    workers: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let e = py.detach(|| sampler::estimate_born(seed, &params.0, &psi.0, n_samples, workers)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("n_samples", e.n_samples)?;
    d.set_item("n_plus", e.n_plus)?;
    d.set_item("frequency_plus", e.frequency_plus)?;
    d.set_item("standard_error", e.standard_error)?;
    d.set_item("lower", e.lower)?;
    d.set_item("upper", e.upper)?;
    Ok(d)
}

/// Physical configuration number `index` of the run seeded with `seed`.
#[pyfunction]
fn sample_physical_config(seed: u64, index: u64, params: &PyModelParams, psi: &PyQubitState) -> PyEpsilonConfig {
    let mut rng = bornsim::rng::substream(seed, bornsim::rng::StreamDomain::Physical, index);
    PyEpsilonConfig(sampler::sample_physical_config(&mut rng, &params.0, &psi.0))
}

/// Exact expectations over all `2ᴺ` configurations (`N ≤ 16`).
#[pyfunction]
fn enumerate_all<'py>(py: Python<'py>, params: &PyModelParams, psi: &PyQubitState) -> PyResult<Bound<'py, PyDict>> {
    let r = py.detach(|| oracle::enumerate_all(&params.0, &psi.0)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("n_steps", r.n_steps)?;
    d.set_item("kappa", r.kappa)?;
    d.set_item("mean_w", r.mean_w)?;
    d.set_item("mean_rate_plus", r.mean_rate_plus)?;
    d.set_item("mean_rate_minus", r.mean_rate_minus)?;
    d.set_item("exact_p_plus", r.exact_p_plus)?;
    let z: Vec<(i64, f64, f64)> = r.z_distribution.iter().map(|z| (z.z, z.uniform, z.physical)).collect();
    d.set_item("z_distribution", z)?;
    d.set_item("config_weights", r.config_weights)?;
    Ok(d)
}

/// Conditional-probability path number `index` of the run seeded with `seed`.
#[pyfunction]
#[pyo3(signature = (seed, index, params, psi, keep_path = false))]
fn sample_trajectory<'py>(
    py: Python<'py>,
    seed: u64,
    index: u64,
    params: &PyModelParams,
    psi: &PyQubitState,
    keep_path: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let t = trajectory::trajectory_record(seed, index, &params.0, &psi.0, keep_path);
    let d = PyDict::new(py);
    d.set_item("initial_p", t.initial_p)?;
    d.set_item("final_p", t.final_p)?;
    d.set_item("z", t.z)?;
    d.set_item("final_y", t.final_y)?;
    d.set_item("path", t.path)?;
    Ok(d)
}

/// `E[p_{n+1} | p_n = p] − p`.
#[pyfunction]
fn martingale_residual(p: f64, kappa: f64) -> f64 {
    trajectory::martingale_residual(p, kappa)
}

#[pymodule]
fn bornsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQubitState>()?;
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyEpsilonConfig>()?;
    m.add_function(wrap_pyfunction!(z_sum, m)?)?;
    m.add_function(wrap_pyfunction!(y_coordinate, m)?)?;
    m.add_function(wrap_pyfunction!(branch_rate, m)?)?;
    m.add_function(wrap_pyfunction!(total_rate, m)?)?;
    m.add_function(wrap_pyfunction!(outcome_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(q_density, m)?)?;
    m.add_function(wrap_pyfunction!(rate_function, m)?)?;
    m.add_function(wrap_pyfunction!(final_density, m)?)?;
    m.add_function(wrap_pyfunction!(density_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(mean_final_density_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_born, m)?)?;
    m.add_function(wrap_pyfunction!(sample_physical_config, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_all, m)?)?;
    m.add_function(wrap_pyfunction!(sample_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(martingale_residual, m)?)?;
    Ok(())
}
