//! Python bindings for the mechanism solver and the Tangle simulator.
//!
//! ```python
//! import tangle_pap as tp
//! cfg = tp.MechanismConfig.table1(agents=1000)
//! sol = tp.solve_mechanism(cfg)
//! print(sol.difficulty, sol.weights)
//! ```

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pap_core::inner_solver::InnerResult as CoreInner;
use pap_core::tangle_sim::TypeMetrics;
use pap_core::{
    mechanism, outer_search, tangle_sim, AgentType, AgentTypeSet, ArrivalModel, Assignment,
    DifficultyVector, Error, LinearScheme, Provenance, SearchMode, SimConfig, WeightVector,
};

create_exception!(tangle_pap, InfeasibleMechanism, PyValueError);

fn to_py(err: Error) -> PyErr {
    match err {
        Error::NoFeasibleMechanism { .. } => InfeasibleMechanism::new_err(err.to_string()),
        Error::Invariant(_) => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

#[pyclass(
    name = "MechanismConfig",
    module = "tangle_pap",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyMechanismConfig {
    inner: pap_core::MechanismConfig,
}

#[pymethods]
impl PyMechanismConfig {
    /// Agent types given by computing powers (strictly increasing) and
    /// population fractions (uniform when omitted).
    #[new]
    #[pyo3(signature = (powers, fractions=None, max_difficulty=12, alpha=0.1, beta=80.0, u0=10.0, agents=100))]
    fn new(
        powers: Vec<f64>,
        fractions: Option<Vec<f64>>,
        max_difficulty: u32,
        alpha: f64,
        beta: f64,
        u0: f64,
        agents: u64,
    ) -> PyResult<Self> {
        let types = match fractions {
            None => AgentTypeSet::uniform(&powers),
            Some(f) if f.len() != powers.len() => {
                return Err(PyValueError::new_err(
                    "powers and fractions must have equal length",
                ))
            }
            Some(f) => AgentTypeSet::new(
                powers
                    .iter()
                    .zip(f)
                    .map(|(&power, fraction)| AgentType { power, fraction })
                    .collect(),
            ),
        }
        .map_err(to_py)?;
        let inner = pap_core::MechanismConfig::new(types, max_difficulty, alpha, beta, u0, agents)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Powers {1, 3, 10}, uniform fractions, m = 12, alpha = 0.1,
    /// beta = 80, u0 = 10.
    #[staticmethod]
    #[pyo3(signature = (agents=100))]
    fn table1(agents: u64) -> PyResult<Self> {
        Ok(Self {
            inner: pap_core::MechanismConfig::table1(agents).map_err(to_py)?,
        })
    }

    fn with_agents(&self, agents: u64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_agents(agents).map_err(to_py)?,
        })
    }

    #[getter]
    fn powers(&self) -> Vec<f64> {
        self.inner.types().iter().map(|t| t.power).collect()
    }

    #[getter]
    fn fractions(&self) -> Vec<f64> {
        self.inner.types().iter().map(|t| t.fraction).collect()
    }

    #[getter]
    fn max_difficulty(&self) -> u32 {
        self.inner.max_difficulty()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    #[getter]
    fn u0(&self) -> f64 {
        self.inner.u0()
    }

    #[getter]
    fn agents(&self) -> u64 {
        self.inner.agents()
    }

    fn __repr__(&self) -> String {
        format!(
            "MechanismConfig(powers={:?}, max_difficulty={}, alpha={}, beta={}, u0={}, agents={})",
            self.powers(),
            self.inner.max_difficulty(),
            self.inner.alpha(),
            self.inner.beta(),
            self.inner.u0(),
            self.inner.agents()
        )
    }
}

#[pyclass(name = "Solution", module = "tangle_pap", frozen, get_all)]
struct PySolution {
    difficulty: Vec<u32>,
    weights: Vec<f64>,
    objective_value: f64,
    candidates_examined: u64,
    candidates_feasible: u64,
    mode: String,
}

#[pymethods]
impl PySolution {
    fn __repr__(&self) -> String {
        format!(
            "Solution(difficulty={:?}, weights={:?}, objective_value={})",
            self.difficulty, self.weights, self.objective_value
        )
    }
}

#[pyclass(name = "InnerResult", module = "tangle_pap", frozen, get_all)]
struct PyInnerResult {
    feasible: bool,
    weights: Option<Vec<f64>>,
    /// Binding constraint tags per type, e.g. ["IC(2,1)"].
    binding: Vec<Vec<String>>,
    reason: Option<String>,
}

fn difficulty(config: &pap_core::MechanismConfig, levels: Vec<u32>) -> PyResult<DifficultyVector> {
    DifficultyVector::for_config(levels, config).map_err(to_py)
}

fn assignment(
    config: &pap_core::MechanismConfig,
    levels: Vec<u32>,
    weights: Vec<f64>,
) -> PyResult<Assignment> {
    let d = difficulty(config, levels)?;
    let (w, provenance) = match WeightVector::new(weights.clone()) {
        Ok(w) => (w, Provenance::Mechanism),
        Err(_) => (
            WeightVector::unnormalized(weights).map_err(to_py)?,
            Provenance::Baseline,
        ),
    };
    Assignment::new(d, w, provenance).map_err(to_py)
}

#[pyfunction]
fn cost(level: u32, power: f64) -> PyResult<f64> {
    mechanism::cost(level, power).map_err(to_py)
}

#[pyfunction]
fn utility(weight: f64, level: u32, power: f64, beta: f64) -> PyResult<f64> {
    mechanism::utility(weight, level, power, beta).map_err(to_py)
}

#[pyfunction]
fn tx_rate(power: f64, level: u32) -> PyResult<f64> {
    mechanism::tx_rate(power, level).map_err(to_py)
}

#[pyfunction]
fn objective(config: &PyMechanismConfig, difficulty: Vec<u32>, weights: Vec<f64>) -> PyResult<f64> {
    let a = assignment(&config.inner, difficulty, weights)?;
    Ok(mechanism::objective(
        &config.inner,
        a.difficulty(),
        a.weights(),
    ))
}

#[pyfunction]
fn count_monotone(n: usize, m: u32) -> u128 {
    outer_search::count_monotone(n, m)
}

#[pyfunction]
fn enumerate_monotone(n: usize, m: u32) -> Vec<Vec<u32>> {
    outer_search::enumerate_monotone(n, m)
        .map(|d| d.levels().to_vec())
        .collect()
}

/// Componentwise-minimal feasible weights for a fixed difficulty vector.
#[pyfunction]
fn solve_weights(
    config: &PyMechanismConfig,
    difficulty_levels: Vec<u32>,
) -> PyResult<PyInnerResult> {
    let d = difficulty(&config.inner, difficulty_levels)?;
    Ok(match pap_core::solve_weights(&config.inner, &d) {
        CoreInner::Feasible(f) => PyInnerResult {
            feasible: true,
            weights: Some(f.weights.values().to_vec()),
            binding: f
                .binding
                .iter()
                .map(|tags| tags.iter().map(|t| t.to_string()).collect())
                .collect(),
            reason: None,
        },
        CoreInner::Infeasible(info) => PyInnerResult {
            feasible: false,
            weights: None,
            binding: Vec::new(),
            reason: Some(info.reason),
        },
    })
}

#[pyfunction]
#[pyo3(signature = (config, exhaustive=false))]
fn solve_mechanism(
    py: Python<'_>,
    config: &PyMechanismConfig,
    exhaustive: bool,
) -> PyResult<PySolution> {
    let mode = if exhaustive {
        SearchMode::Exhaustive
    } else {
        SearchMode::Pruned
    };
    let inner = config.inner.clone();
    let solution = py
        .detach(move || pap_core::solve_mechanism(&inner, mode))
        .map_err(to_py)?;
    Ok(PySolution {
        difficulty: solution.difficulty().levels().to_vec(),
        weights: solution.weights().values().to_vec(),
        objective_value: solution.objective_value,
        candidates_examined: solution.candidates_examined,
        candidates_feasible: solution.candidates_feasible,
        mode: solution.mode.to_string(),
    })
}

/// Best responses to weight = intercept + slope * difficulty.
/// Returns `(difficulty, weights)`.
#[pyfunction]
#[pyo3(signature = (config, slope=1.0, intercept=0.0))]
fn fixed_linear_scheme(
    config: &PyMechanismConfig,
    slope: f64,
    intercept: f64,
) -> PyResult<(Vec<u32>, Vec<f64>)> {
    let a = mechanism::fixed_linear_scheme(&config.inner, LinearScheme { slope, intercept })
        .map_err(to_py)?;
    Ok((
        a.difficulty().levels().to_vec(),
        a.weights().values().to_vec(),
    ))
}

/// Truth-telling and participation checks for an assignment.
#[pyfunction]
fn verify_assignment<'py>(
    py: Python<'py>,
    config: &PyMechanismConfig,
    difficulty: Vec<u32>,
    weights: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let a = assignment(&config.inner, difficulty, weights)?;
    let report = pap_core::verify_assignment(&config.inner, &a);
    let out = PyDict::new(py);
    out.set_item("passed", report.passed())?;
    out.set_item("failures", report.failures())?;
    out.set_item("min_slack", report.min_slack)?;
    out.set_item(
        "truth_telling",
        report
            .truth_telling
            .iter()
            .map(|c| c.passed)
            .collect::<Vec<_>>(),
    )?;
    out.set_item(
        "participation",
        report
            .participation
            .iter()
            .map(|c| c.passed)
            .collect::<Vec<_>>(),
    )?;
    Ok(out)
}

fn metrics_dict<'py>(py: Python<'py>, m: &TypeMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("created", m.created)?;
    d.set_item("approved", m.approved)?;
    d.set_item("unapproved", m.unapproved)?;
    d.set_item("mean_approval_time", m.mean_approval_time)?;
    Ok(d)
}

/// Runs the Tangle simulator under the given assignment. Returns a dict
/// with per-type metrics, genesis metrics, final tip count and total
/// transactions.
#[pyfunction]
#[pyo3(signature = (config, difficulty, weights, horizon=2000, seed=42, arrival_model="poisson"))]
fn simulate<'py>(
    py: Python<'py>,
    config: &PyMechanismConfig,
    difficulty: Vec<u32>,
    weights: Vec<f64>,
    horizon: u64,
    seed: u64,
    arrival_model: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let model = match arrival_model {
        "poisson" => ArrivalModel::Poisson,
        "deterministic" => ArrivalModel::Deterministic,
        other => {
            return Err(PyValueError::new_err(format!(
                "arrival_model must be 'poisson' or 'deterministic', got {other:?}"
            )))
        }
    };
    let a = assignment(&config.inner, difficulty, weights)?;
    let sim = SimConfig::new(horizon, seed, model, a, config.inner.clone()).map_err(to_py)?;
    let m = py.detach(move || tangle_sim::run(&sim));

    let out = PyDict::new(py);
    let per_type = m
        .per_type
        .iter()
        .map(|t| metrics_dict(py, t))
        .collect::<PyResult<Vec<_>>>()?;
    out.set_item("per_type", per_type)?;
    out.set_item("genesis", metrics_dict(py, &m.genesis)?)?;
    out.set_item("final_tips", m.final_tips)?;
    out.set_item("total_transactions", m.total_transactions)?;
    Ok(out)
}

#[pymodule]
fn tangle_pap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add(
        "InfeasibleMechanism",
        m.py().get_type::<InfeasibleMechanism>(),
    )?;
    m.add_class::<PyMechanismConfig>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyInnerResult>()?;
    m.add_function(wrap_pyfunction!(cost, m)?)?;
    m.add_function(wrap_pyfunction!(utility, m)?)?;
    m.add_function(wrap_pyfunction!(tx_rate, m)?)?;
    m.add_function(wrap_pyfunction!(objective, m)?)?;
    m.add_function(wrap_pyfunction!(count_monotone, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_monotone, m)?)?;
    m.add_function(wrap_pyfunction!(solve_weights, m)?)?;
    m.add_function(wrap_pyfunction!(solve_mechanism, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_linear_scheme, m)?)?;
    m.add_function(wrap_pyfunction!(verify_assignment, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
