//! Python module `mmdrl_py`: kernels, discrete measures, MMD, the chain MDP,
//! the tabular learners, herding and the experiment runner.

use mmdrl::bellman::ParticleTable;
use mmdrl::experiments::{self, ExperimentConfig};
use mmdrl::herding::{self, DescentOptions};
use mmdrl::learners::{self, LearnerConfig};
use mmdrl::mdp;
use mmdrl::{DiscreteMeasure, Error, Kernel, ParticleSet, Policy, TabularMdp};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::Parse(_) | Error::Json(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for mmdrl::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

#[pyclass(name = "Kernel", module = "mmdrl_py", frozen)]
struct PyKernel(Kernel);

#[pymethods]
impl PyKernel {
    /// Parses specs such as `gaussian:h=1` or `unrectified:alpha=1`.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse::<Kernel>().py().map(PyKernel)
    }

    #[staticmethod]
    fn gaussian(h: f64) -> PyResult<Self> {
        Kernel::gaussian(h).py().map(PyKernel)
    }

    #[staticmethod]
    fn gaussian_mixture(bandwidths: Vec<f64>) -> PyResult<Self> {
        Kernel::gaussian_mixture(&bandwidths).py().map(PyKernel)
    }

    #[staticmethod]
    fn unrectified(alpha: f64) -> PyResult<Self> {
        Kernel::unrectified(alpha).py().map(PyKernel)
    }

    #[staticmethod]
    fn unrectified_mixture(components: Vec<(f64, f64)>) -> PyResult<Self> {
        Kernel::unrectified_mixture(&components).py().map(PyKernel)
    }

    #[staticmethod]
    fn exp_prod(sigma_sq: f64) -> PyResult<Self> {
        Kernel::exp_prod(sigma_sq).py().map(PyKernel)
    }

    fn __call__(&self, x: f64, y: f64) -> PyResult<f64> {
        self.0.try_eval(x, y).py()
    }

    fn grad_x(&self, x: f64, y: f64) -> f64 {
        self.0.grad_x(x, y)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Kernel('{}')", self.0)
    }
}

#[pyclass(name = "DiscreteMeasure", module = "mmdrl_py", frozen)]
struct PyMeasure(DiscreteMeasure);

#[pymethods]
impl PyMeasure {
    #[new]
    fn new(atoms: Vec<f64>, weights: Vec<f64>) -> PyResult<Self> {
        DiscreteMeasure::new(atoms, weights).py().map(PyMeasure)
    }

    #[staticmethod]
    fn dirac(z: f64) -> PyResult<Self> {
        DiscreteMeasure::dirac(z).py().map(PyMeasure)
    }

    #[staticmethod]
    fn uniform(atoms: Vec<f64>) -> PyResult<Self> {
        DiscreteMeasure::uniform(atoms).py().map(PyMeasure)
    }

    #[staticmethod]
    fn mixture(measures: Vec<PyRef<'_, PyMeasure>>, probs: Vec<f64>) -> PyResult<Self> {
        let ms: Vec<DiscreteMeasure> = measures.iter().map(|m| m.0.clone()).collect();
        DiscreteMeasure::mixture(&ms, &probs).py().map(PyMeasure)
    }

    #[getter]
    fn atoms(&self) -> Vec<f64> {
        self.0.atoms().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    fn mean(&self) -> f64 {
        self.0.mean()
    }

    #[pyo3(signature = (n, central = true))]
    fn moment(&self, n: u32, central: bool) -> PyResult<f64> {
        self.0.moment(n, central).py()
    }

    fn pushforward_affine(&self, reward: f64, gamma: f64) -> Self {
        PyMeasure(self.0.pushforward_affine(reward, gamma))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "DiscreteMeasure(atoms={:?}, weights={:?})",
            self.0.atoms(),
            self.0.weights()
        )
    }
}

#[pyfunction]
fn mmd_squared(p: PyRef<'_, PyMeasure>, q: PyRef<'_, PyMeasure>, kernel: PyRef<'_, PyKernel>) -> f64 {
    mmdrl::mmd_squared(&p.0, &q.0, &kernel.0)
}

#[pyfunction]
fn mmd(p: PyRef<'_, PyMeasure>, q: PyRef<'_, PyMeasure>, kernel: PyRef<'_, PyKernel>) -> PyResult<f64> {
    mmdrl::mmd(&p.0, &q.0, &kernel.0).py()
}

/// Biased squared MMD between two equally weighted particle lists.
#[pyfunction]
fn mmd_b_squared(z: Vec<f64>, w: Vec<f64>, kernel: PyRef<'_, PyKernel>) -> PyResult<f64> {
    Ok(mmdrl::mmd_b_squared(
        &ParticleSet::new(z).py()?,
        &ParticleSet::new(w).py()?,
        &kernel.0,
    ))
}

/// Gradient of `mmd_b_squared(z, targets)` with respect to `z`.
#[pyfunction]
fn mmd_b_grad(z: Vec<f64>, targets: Vec<f64>, kernel: PyRef<'_, PyKernel>) -> PyResult<Vec<f64>> {
    Ok(mmdrl::mmd_b_grad(
        &ParticleSet::new(z).py()?,
        &ParticleSet::new(targets).py()?,
        &kernel.0,
    ))
}

#[pyclass(name = "TabularMdp", module = "mmdrl_py", frozen)]
struct PyMdp(TabularMdp);

#[pymethods]
impl PyMdp {
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        TabularMdp::from_json(s).py().map(PyMdp)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().py()
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.0.num_states()
    }

    #[getter]
    fn num_actions(&self) -> usize {
        self.0.num_actions()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    fn is_terminal(&self, s: usize) -> bool {
        self.0.is_terminal(s)
    }

    /// Central moments 1..=max_order (order 1 is the mean) of Monte Carlo
    /// returns from `start`, taking `action` everywhere.
    #[pyo3(signature = (start, action, rollouts, max_order = 4, seed = 0, horizon = mdp::DEFAULT_HORIZON))]
    fn mc_moments(
        &self,
        start: usize,
        action: usize,
        rollouts: usize,
        max_order: u32,
        seed: u64,
        horizon: usize,
    ) -> PyResult<Vec<f64>> {
        let pi = Policy::constant(action, self.0.num_states(), self.0.num_actions()).py()?;
        let mut rng = mmdrl::Rng::seed_from_u64(seed);
        mdp::mc_rollout_moments(&self.0, &pi, start, rollouts, max_order, horizon, &mut rng).py()
    }
}

#[pyfunction]
fn build_chain(k: usize) -> PyResult<PyMdp> {
    mmdrl::build_chain(k).py().map(PyMdp)
}

#[pyclass(name = "ParticleTable", module = "mmdrl_py", frozen)]
struct PyParticleTable(ParticleTable);

#[pymethods]
impl PyParticleTable {
    fn get(&self, s: usize, a: usize) -> PyResult<Vec<f64>> {
        let (ns, na) = self.0.shape();
        if s >= ns || a >= na {
            return Err(PyValueError::new_err(format!("({s}, {a}) outside a {ns}x{na} table")));
        }
        Ok(self.0.get(s, a).as_slice().to_vec())
    }

    fn measure(&self, s: usize, a: usize) -> PyResult<PyMeasure> {
        let particles = self.get(s, a)?;
        Ok(PyMeasure(ParticleSet::new(particles).py()?.to_measure()))
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }
}

/// Tabular policy evaluation of the always-`action` policy from `start`.
/// `method` is "mmd" (with `kernel`, default the {8, 10, 12} mixture) or
/// "quantile".
#[pyfunction]
#[pyo3(signature = (mdp, action = 0, start = 0, method = "mmd", kernel = None, seed = 0, num_iters = None))]
fn run_policy_evaluation(
    mdp: PyRef<'_, PyMdp>,
    action: usize,
    start: usize,
    method: &str,
    kernel: Option<PyRef<'_, PyKernel>>,
    seed: u64,
    num_iters: Option<usize>,
) -> PyResult<PyParticleTable> {
    let mut cfg = match method {
        "mmd" => LearnerConfig::mmd(kernel.map(|k| k.0.clone()).unwrap_or_else(Kernel::tabular_mixture)),
        "quantile" => LearnerConfig::quantile(),
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    }
    .with_seed(seed);
    if let Some(n) = num_iters {
        cfg.num_iters = n;
    }
    let pi = Policy::constant(action, mdp.0.num_states(), mdp.0.num_actions()).py()?;
    learners::run_policy_evaluation(&mdp.0, &pi, start, &cfg)
        .py()
        .map(PyParticleTable)
}

/// Descent particles for `target`; returns `(particles, mmd)`.
#[pyfunction]
#[pyo3(signature = (target, n, kernel, seed = 0, max_steps = 2000, lr = 0.1, inits = 5))]
fn optimize_particles(
    target: PyRef<'_, PyMeasure>,
    n: usize,
    kernel: PyRef<'_, PyKernel>,
    seed: u64,
    max_steps: usize,
    lr: f64,
    inits: usize,
) -> PyResult<(Vec<f64>, f64)> {
    let opts = DescentOptions { max_steps, lr, inits };
    let mut rng = mmdrl::Rng::seed_from_u64(seed);
    let r = herding::optimize_particles(&target.0, n, &kernel.0, &opts, &mut rng).py()?;
    Ok((r.particles.as_slice().to_vec(), r.mmd_value))
}

/// Greedy kernel herding over `grid`; returns `(particles, mmd)`.
#[pyfunction]
fn greedy_herd(
    target: PyRef<'_, PyMeasure>,
    n: usize,
    kernel: PyRef<'_, PyKernel>,
    grid: Vec<f64>,
) -> PyResult<(Vec<f64>, f64)> {
    let r = herding::greedy_herd(&target.0, n, &kernel.0, &grid).py()?;
    Ok((r.particles.as_slice().to_vec(), r.mmd_value))
}

#[pyfunction]
#[pyo3(signature = (atoms = 200, lo = -4.0, hi = 4.0))]
fn discretized_gaussian(atoms: usize, lo: f64, hi: f64) -> PyResult<PyMeasure> {
    herding::discretized_gaussian(atoms, lo, hi).py().map(PyMeasure)
}

/// Runs an experiment from a JSON config into `out_dir`; returns
/// `(passed, summary)`.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str, out_dir: &str) -> PyResult<(bool, String)> {
    let mut cfg = ExperimentConfig::from_json(config_json).py()?;
    cfg.out_dir = Some(out_dir.into());
    let report = py.detach(|| experiments::run(&cfg)).py()?;
    Ok((report.passed(), report.summary))
}

#[pymodule]
pub fn mmdrl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyMdp>()?;
    m.add_class::<PyParticleTable>()?;
    m.add_function(wrap_pyfunction!(mmd_squared, m)?)?;
    m.add_function(wrap_pyfunction!(mmd, m)?)?;
    m.add_function(wrap_pyfunction!(mmd_b_squared, m)?)?;
    m.add_function(wrap_pyfunction!(mmd_b_grad, m)?)?;
    m.add_function(wrap_pyfunction!(build_chain, m)?)?;
    m.add_function(wrap_pyfunction!(run_policy_evaluation, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_particles, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_herd, m)?)?;
    m.add_function(wrap_pyfunction!(discretized_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
