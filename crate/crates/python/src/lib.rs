//! Python bindings: models, eigenvalue extraction, limit-object samplers
//! and the batch runner.

use std::f64::consts::PI;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::pruefer_lab as core;
use core::experiment;
use core::limits::{self, CbeSchedule, PsiConfig};
use core::pruefer::{self as pr, default_step};
use core::spectrum::{self, EigenWindow};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Stationary potential `F(x) = Σ a_k cos(kx) + b_k sin(kx)` driven by a
/// Brownian motion with generator `(σ²/2) d²/dx²`.
#[pyclass(name = "Model", frozen)]
struct PyModel(core::PotentialModel);

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (fourier_cos = vec![1.0], fourier_sin = vec![], sigma2 = 1.0))]
    fn new(fourier_cos: Vec<f64>, fourier_sin: Vec<f64>, sigma2: f64) -> PyResult<Self> {
        core::PotentialModel::new(fourier_cos, fourier_sin, sigma2)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn cosine() -> Self {
        Self(core::PotentialModel::cosine())
    }

    fn eval(&self, x: f64) -> f64 {
        self.0.eval(x)
    }

    fn lyapunov(&self, energy: f64) -> f64 {
        self.0.lyapunov(energy)
    }

    fn energy_for_beta(&self, beta: f64) -> PyResult<f64> {
        self.0.energy_for_beta(beta).map_err(err)
    }

    /// Closed-form constants at `energy` as a dict.
    fn constants<'py>(&self, py: Python<'py>, energy: f64) -> PyResult<Bound<'py, PyDict>> {
        let k = self.0.spectral_constants(energy).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("E", k.energy)?;
        d.set_item("C_E", k.c_e)?;
        d.set_item("gamma", k.gamma_e)?;
        d.set_item("beta", k.beta_e)?;
        d.set_item("E_c", k.e_c)?;
        d.set_item("D", k.d)?;
        d.set_item("C1", (k.c1.re, k.c1.im))?;
        d.set_item("C2", (k.c2.re, k.c2.im))?;
        d.set_item("C3", k.c3)?;
        d.set_item("C4", k.c4)?;
        let g = PyDict::new(py);
        for (m, v) in &k.g_m_means {
            g.set_item(*m, (v.re, v.im))?;
        }
        d.set_item("G_m", g)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(fourier_cos={:?}, fourier_sin={:?}, sigma2={})",
            self.0.fourier_cos(),
            self.0.fourier_sin(),
            self.0.generator_scale()
        )
    }
}

/// Decay envelope `a(t)` with `a(t) ~ amplitude · t^{−α}`.
#[pyclass(name = "Decay", frozen)]
struct PyDecay(core::DecayProfile);

#[pymethods]
impl PyDecay {
    #[new]
    #[pyo3(signature = (alpha, amplitude = 1.0))]
    fn new(alpha: f64, amplitude: f64) -> PyResult<Self> {
        core::DecayProfile::new(alpha, amplitude).map(Self).map_err(err)
    }

    #[staticmethod]
    fn free() -> Self {
        Self(core::DecayProfile::free())
    }

    fn eval(&self, t: f64) -> f64 {
        self.0.eval(t)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha()
    }
}

fn signal(
    model: &PyModel,
    decay: &PyDecay,
    e0: f64,
    length: f64,
    seed: u64,
    h: Option<f64>,
) -> PyResult<core::DrivingSignal> {
    let step = h.unwrap_or_else(|| default_step(e0.sqrt()));
    let path = core::NoisePath::simulate(seed, length, step, model.0.generator_scale()).map_err(err)?;
    Ok(core::DrivingSignal::new(&path, &decay.0, &model.0))
}

/// Rescaled Dirichlet eigenvalues `x_n = L(κ_n − √E₀)` in `(−W, W)`.
#[pyfunction]
#[pyo3(signature = (model, decay, e0, length, seed, h = None, half_width = 6.0 * PI))]
#[allow(clippy::too_many_arguments)]
fn eigenvalues<'py>(
    py: Python<'py>,
    model: &PyModel,
    decay: &PyDecay,
    e0: f64,
    length: f64,
    seed: u64,
    h: Option<f64>,
    half_width: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let sig = signal(model, decay, e0, length, seed, h)?;
    let window = EigenWindow::new(e0, length, half_width).map_err(err)?;
    let s = py.detach(|| spectrum::solve_eigenvalues(&sig, &window)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("atoms", s.atoms)?;
    d.set_item("kappas", s.kappas)?;
    d.set_item("indices", s.indices)?;
    d.set_item("phi", s.phi)?;
    d.set_item("m", s.m)?;
    d.set_item("max_residual", s.max_residual)?;
    Ok(d)
}

/// `Ψ_L(x)` at each `x` along one noise path.
#[pyfunction]
#[pyo3(signature = (model, decay, e0, length, seed, xs, h = None))]
#[allow(clippy::too_many_arguments)]
fn relative_phase(
    py: Python<'_>,
    model: &PyModel,
    decay: &PyDecay,
    e0: f64,
    length: f64,
    seed: u64,
    xs: Vec<f64>,
    h: Option<f64>,
) -> PyResult<Vec<f64>> {
    let sig = signal(model, decay, e0, length, seed, h)?;
    py.detach(|| pr::relative_phase_on(&sig, e0, &xs)).map_err(err)
}

/// Limiting covariance `C(n, n′)` of the spacing fluctuations.
#[pyfunction]
fn gaussian_covariance(model: &PyModel, alpha: f64, e0: f64, n: i64, n_prime: i64) -> PyResult<f64> {
    let k = model.0.spectral_constants(e0).map_err(err)?;
    limits::gaussian_covariance(&k, alpha, n, n_prime).map_err(err)
}

/// Terminal values `Ψ₁(c)` of the critical SDE with diffusion `d`.
#[pyfunction]
#[pyo3(signature = (seed, d, cs, t0 = 1e-3, steps = 2000))]
fn psi_terminal(py: Python<'_>, seed: u64, d: f64, cs: Vec<f64>, t0: f64, steps: usize) -> PyResult<Vec<f64>> {
    let config = PsiConfig {
        t0,
        steps,
        ..PsiConfig::default()
    };
    py.detach(|| limits::psi_terminal(seed, d, &cs, &config))
        .map(|p| p.terminal().to_vec())
        .map_err(err)
}

/// `samples` thinned states of a circular β-ensemble Metropolis chain.
#[pyfunction]
#[pyo3(signature = (seed, n, beta, samples, burn_in = None, thin = 1, width = 0.5))]
#[allow(clippy::too_many_arguments)]
fn circular_beta(
    py: Python<'_>,
    seed: u64,
    n: usize,
    beta: f64,
    samples: usize,
    burn_in: Option<usize>,
    thin: usize,
    width: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let schedule = CbeSchedule {
        burn_in_sweeps: burn_in.unwrap_or(2000 * n),
        thin_sweeps: thin,
        proposal_width: width,
    };
    py.detach(|| limits::sample_circular_beta_chain(seed, n, beta, &schedule, samples))
        .map(|v| v.into_iter().map(|s| s.angles).collect())
        .map_err(err)
}

#[pyfunction]
fn split_seed(master: u64, index: u64) -> u64 {
    core::seed::split_seed(master, index)
}

/// Runs a TOML experiment and returns its manifest as a JSON string.
#[pyfunction]
#[pyo3(signature = (config, output_dir = None))]
fn run_experiment(py: Python<'_>, config: &str, output_dir: Option<PathBuf>) -> PyResult<String> {
    let mut c = experiment::parse_config(config).map_err(err)?;
    if let Some(dir) = output_dir {
        c.run.output_dir = dir;
    }
    let manifest = py.detach(|| experiment::run_experiment(&c)).map_err(err)?;
    serde_json::to_string(&manifest).map_err(err)
}

#[pymodule]
fn pruefer_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyDecay>()?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(relative_phase, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(psi_terminal, m)?)?;
    m.add_function(wrap_pyfunction!(circular_beta, m)?)?;
    m.add_function(wrap_pyfunction!(split_seed, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
