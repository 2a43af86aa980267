//! Python bindings: configurations, devices, sweeps and the analytic helpers.
//!
//! ```python
//! import ribbon_klein as rk
//! cfg = rk.RunConfig(N=197, n_modes=30, theta_deg=45)
//! dev = rk.Device(cfg)
//! dev.transmission(0.02)
//! ```

use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ribbon_klein::config::{self, KEYS};
use ribbon_klein::device;
use ribbon_klein::observables::{self, ThermalSpec, TransmissionCurve};
use ribbon_klein::ribbon::{self, Classification, PhysicalConstants};
use ribbon_klein::sweep::{self, SweepKind};
use ribbon_klein::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::NumericalFailure(_) => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

const INTEGER_KEYS: [&str; 5] = ["N", "n_modes", "E_steps", "quad_pts_per_a0", "workers"];

/// Run configuration; keyword names and item keys are the configuration
/// file keys (`N`, `n_modes`, `theta_deg`, ...).
#[pyclass(name = "RunConfig", module = "ribbon_klein")]
struct PyRunConfig {
    inner: config::RunConfig,
}

impl PyRunConfig {
    fn assign(&mut self, key: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        if !KEYS.contains(&key) {
            return Err(PyKeyError::new_err(format!("unknown key {key:?}")));
        }
        let text = value.str()?.to_string();
        self.inner.set(key, &text, 0).map_err(to_py)
    }
}

#[pymethods]
impl PyRunConfig {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut cfg = Self {
            inner: config::RunConfig::default(),
        };
        if let Some(kwargs) = kwargs {
            for (key, value) in kwargs.iter() {
                cfg.assign(&key.extract::<String>()?, &value)?;
            }
        }
        Ok(cfg)
    }

    /// Parse `key = value` text; missing keys keep their defaults.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        config::parse_config(text)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    /// Recover the configuration echoed at the top of an output CSV.
    #[staticmethod]
    fn from_csv_header(text: &str) -> PyResult<Self> {
        config::config_from_header(text)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    fn __getitem__(&self, py: Python<'_>, key: &str) -> PyResult<Py<PyAny>> {
        let text = self
            .inner
            .get(key)
            .ok_or_else(|| PyKeyError::new_err(format!("unknown key {key:?}")))?;
        let bad = |e: &dyn std::fmt::Display| PyValueError::new_err(e.to_string());
        let value = if INTEGER_KEYS.contains(&key) {
            let i: usize = text.parse().map_err(|e| bad(&e))?;
            i.into_pyobject(py)?.into_any().unbind()
        } else {
            let x: f64 = text.parse().map_err(|e| bad(&e))?;
            x.into_pyobject(py)?.into_any().unbind()
        };
        Ok(value)
    }

    fn __setitem__(&mut self, key: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        self.assign(key, value)
    }

    fn keys(&self) -> Vec<&'static str> {
        KEYS.to_vec()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let dict = PyDict::new(py);
        for key in KEYS {
            dict.set_item(key, self.__getitem__(py, key)?)?;
        }
        Ok(dict)
    }

    /// `key = value` lines for the whole configuration.
    fn echo(&self) -> String {
        self.inner.echo("")
    }

    /// Raise `ValueError` if an invariant is violated.
    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    fn energy_grid(&self) -> Vec<f64> {
        self.inner.energy_grid()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        let body: Vec<String> = KEYS
            .iter()
            .map(|k| format!("{k}={}", self.inner.get(k).unwrap_or_default()))
            .collect();
        format!("RunConfig({})", body.join(", "))
    }
}

/// A ready-to-solve device built from a validated configuration.
#[pyclass(name = "Device", module = "ribbon_klein")]
struct PyDevice {
    inner: device::Device,
    eta: f64,
}

#[pymethods]
impl PyDevice {
    #[new]
    fn new(py: Python<'_>, config: &PyRunConfig) -> PyResult<Self> {
        let cfg = config.inner.clone();
        let inner = py.detach(|| cfg.device()).map_err(to_py)?;
        Ok(Self {
            inner,
            eta: config.inner.eta_ev,
        })
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.geometry.rows
    }

    #[getter]
    fn block_dim(&self) -> usize {
        self.inner.modes.block_dim()
    }

    /// Subband momenta (1/Å) in mode-space order.
    fn momenta(&self) -> Vec<f64> {
        self.inner.modes.momenta()
    }

    /// Number of open channels at `energy` (eV).
    fn open_channels(&self, energy: f64) -> usize {
        self.inner
            .modes
            .open_channels(energy, &self.inner.geometry.consts)
    }

    /// Transmission at `energy` (eV); `eta` defaults to the configured value.
    #[pyo3(signature = (energy, eta=None))]
    fn transmission(&self, py: Python<'_>, energy: f64, eta: Option<f64>) -> PyResult<f64> {
        let eta = eta.unwrap_or(self.eta);
        py.detach(|| self.inner.solve(energy, eta, false))
            .map(|p| p.transmission)
            .map_err(to_py)
    }

    /// `(T, ldos)` at `energy`, with the LDOS per device row.
    #[pyo3(signature = (energy, eta=None))]
    fn solve(&self, py: Python<'_>, energy: f64, eta: Option<f64>) -> PyResult<(f64, Vec<f64>)> {
        let eta = eta.unwrap_or(self.eta);
        let point = py
            .detach(|| self.inner.solve(energy, eta, true))
            .map_err(to_py)?;
        Ok((point.transmission, point.ldos.unwrap_or_default()))
    }

    /// Transmission from the general block solver (slower; for cross-checks).
    #[pyo3(signature = (energy, eta=None))]
    fn transmission_full(&self, py: Python<'_>, energy: f64, eta: Option<f64>) -> PyResult<f64> {
        let eta = eta.unwrap_or(self.eta);
        py.detach(|| self.inner.solve_full(energy, eta, false))
            .map(|p| p.transmission)
            .map_err(to_py)
    }
}

/// `"metallic"` or `"semiconducting"`.
#[pyfunction]
fn classify_ribbon(width_index: usize) -> &'static str {
    match ribbon::classify_ribbon(width_index) {
        Classification::Metallic => "metallic",
        Classification::Semiconducting => "semiconducting",
    }
}

/// Transverse momentum (1/Å) of subband `n` in a ribbon of width index `N`.
#[pyfunction]
#[pyo3(name = "subband_momentum")]
fn py_subband_momentum(n: i64, width_index: usize) -> f64 {
    ribbon::subband_momentum(n, width_index)
}

/// `[(n, q), ...]` for the `n_modes` lowest subbands.
#[pyfunction]
fn enumerate_modes(width_index: usize, n_modes: usize) -> PyResult<Vec<(i64, f64)>> {
    let space = ribbon::enumerate_modes(width_index, n_modes).map_err(to_py)?;
    Ok(space
        .subband_indices()
        .into_iter()
        .zip(space.momenta())
        .collect())
}

/// Sorted, distinct subband onset energies (eV).
#[pyfunction]
fn mode_onsets(width_index: usize, n_modes: usize) -> PyResult<Vec<f64>> {
    let space = ribbon::enumerate_modes(width_index, n_modes).map_err(to_py)?;
    Ok(ribbon::mode_onsets(&space, &PhysicalConstants::default()))
}

/// Dirac transmission through a square barrier in an unbounded sheet.
#[pyfunction]
#[pyo3(name = "klein_2d")]
fn py_klein_2d(theta: f64, k: f64, length: f64) -> f64 {
    observables::klein_2d(theta, k, length)
}

/// `ħv_F / max(D, W)` in eV for lengths in Å.
#[pyfunction]
#[pyo3(name = "peak_spacing_estimate")]
fn py_peak_spacing_estimate(length: f64, width: f64) -> f64 {
    observables::peak_spacing_estimate(length, width, &PhysicalConstants::default())
}

/// Conductance (2e²/h) from a sampled `T(E)` curve.
#[pyfunction]
#[pyo3(name = "conductance")]
fn py_conductance(energies: Vec<f64>, transmission: Vec<f64>, mu: f64, temperature: f64) -> PyResult<f64> {
    if energies.len() != transmission.len() {
        return Err(PyValueError::new_err("energies and transmission differ in length"));
    }
    let curve = TransmissionCurve::new(energies.into_iter().zip(transmission).collect());
    observables::conductance(
        &curve,
        &ThermalSpec { mu, temperature },
        &PhysicalConstants::default(),
    )
    .map_err(to_py)
}

/// Run a sweep (`energy`, `angle`, `length`, `broadening` or `ldos`) and
/// write CSV files into `out_dir`. Returns a dict with the written files,
/// the manifest path, the number of failed energy points and the
/// conductance of each transmission file.
#[pyfunction]
#[pyo3(name = "run_sweep", signature = (config, kind, out_dir, values=None))]
fn py_run_sweep<'py>(
    py: Python<'py>,
    config: &PyRunConfig,
    kind: &str,
    out_dir: PathBuf,
    values: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let kind = SweepKind::from_name(kind, values).map_err(to_py)?;
    let cfg = config.inner.clone();
    let report = py
        .detach(|| sweep::run_sweep(&cfg, &kind, &out_dir))
        .map_err(to_py)?;
    let dict = PyDict::new(py);
    dict.set_item("files", report.files)?;
    dict.set_item("manifest", report.manifest)?;
    dict.set_item("failures", report.failures)?;
    dict.set_item("conductance", report.conductance)?;
    Ok(dict)
}

#[pymodule]
#[pyo3(name = "ribbon_klein")]
fn ribbon_klein_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", sweep::VERSION)?;
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyDevice>()?;
    m.add_function(wrap_pyfunction!(classify_ribbon, m)?)?;
    m.add_function(wrap_pyfunction!(py_subband_momentum, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_modes, m)?)?;
    m.add_function(wrap_pyfunction!(mode_onsets, m)?)?;
    m.add_function(wrap_pyfunction!(py_klein_2d, m)?)?;
    m.add_function(wrap_pyfunction!(py_peak_spacing_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(py_conductance, m)?)?;
    m.add_function(wrap_pyfunction!(py_run_sweep, m)?)?;
    Ok(())
}
