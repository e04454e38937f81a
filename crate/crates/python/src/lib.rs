//! Python bindings. Matrices cross the boundary as lists of rows, vectors as
//! lists; agent labels stay 1-based as in the Rust API.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use prioropt::bounds::{self, BoundParams};
use prioropt::cli::scenario::{self, Overrides, SWEEP_POINTS};
use prioropt::cli::{config, RunConfig};
use prioropt::{mixing, optimizer, pareto, problems};

fn py_err(e: prioropt::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[pyclass(name = "Graph", module = "prioropt_py", skip_from_py_object)]
#[derive(Clone)]
struct PyGraph(prioropt::Graph);

#[pymethods]
impl PyGraph {
    /// `edges` uses 1-based agent labels.
    #[new]
    fn new(m: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        prioropt::Graph::new(m, &edges).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn complete(m: usize) -> PyResult<Self> {
        prioropt::Graph::complete(m).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn path(m: usize) -> PyResult<Self> {
        prioropt::Graph::path(m).map(Self).map_err(py_err)
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.agent_count()
    }

    /// Edges as 1-based pairs.
    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges().iter().map(|&(i, j)| (i + 1, j + 1)).collect()
    }

    fn degrees(&self) -> Vec<usize> {
        (0..self.0.agent_count()).map(|i| self.0.degree(i)).collect()
    }

    fn laplacian(&self) -> Vec<Vec<f64>> {
        rows(self.0.laplacian())
    }

    fn max_degree(&self) -> usize {
        self.0.max_degree()
    }

    fn gain_upper_bound(&self) -> f64 {
        self.0.gain_upper_bound()
    }

    fn __repr__(&self) -> String {
        format!("Graph(m={}, edges={:?})", self.0.agent_count(), self.edges())
    }
}

#[pyclass(name = "PriorityState", module = "prioropt_py", skip_from_py_object)]
#[derive(Clone)]
struct PyPriorityState(prioropt::PriorityState);

#[pymethods]
impl PyPriorityState {
    /// Row `i` is agent `i`'s priority vector.
    #[new]
    fn new(rows: Vec<Vec<f64>>, c: f64) -> PyResult<Self> {
        prioropt::PriorityState::from_rows(&rows, c)
            .map(Self)
            .map_err(py_err)
    }

    fn weights(&self) -> Vec<Vec<f64>> {
        rows(self.0.weights())
    }

    #[getter]
    fn c(&self) -> f64 {
        self.0.gain()
    }

    fn min_entry(&self) -> f64 {
        self.0.min_entry()
    }

    fn average(&self) -> Vec<f64> {
        self.0.average_priorities().iter().copied().collect()
    }

    fn step(&self, graph: &PyGraph) -> PyResult<Self> {
        self.0.priority_step(&graph.0).map(Self).map_err(py_err)
    }

    /// Applies `steps` consensus steps.
    fn run(&self, graph: &PyGraph, steps: usize) -> PyResult<Self> {
        let mut w = self.0.clone();
        for _ in 0..steps {
            w = w.priority_step(&graph.0).map_err(py_err)?;
        }
        Ok(Self(w))
    }
}

#[pyfunction]
fn build_mixing_matrix(w: &PyPriorityState, graph: &PyGraph) -> PyResult<Vec<Vec<f64>>> {
    mixing::build_mixing_matrix(&w.0, &graph.0)
        .map(|a| rows(a.matrix()))
        .map_err(py_err)
}

/// Entrywise spread of `A(k) ... A(0)` for matrices given oldest first.
#[pyfunction]
fn transition_spread(mats: Vec<Vec<Vec<f64>>>) -> PyResult<f64> {
    let mats = mats
        .iter()
        .map(|m| mixing::MixingMatrix::from_matrix(matrix(m)?).map_err(py_err))
        .collect::<PyResult<Vec<_>>>()?;
    mixing::transition_product(&mats)
        .map(|p| p.spread())
        .map_err(py_err)
}

/// `(C, beta, B0, eta)` for the initial table.
#[pyfunction]
fn geometric_params(w: &PyPriorityState) -> PyResult<(f64, f64, usize, f64)> {
    let g = mixing::geometric_params(&w.0, w.0.agent_count()).map_err(py_err)?;
    Ok((g.c, g.beta, g.b0, g.eta))
}

#[pyclass(name = "QuadraticProblem", module = "prioropt_py", skip_from_py_object)]
#[derive(Clone)]
struct PyQuadratic(problems::QuadraticProblem);

#[pymethods]
impl PyQuadratic {
    #[new]
    fn new(q: Vec<Vec<f64>>, r: Vec<f64>, c: f64) -> PyResult<Self> {
        problems::QuadraticProblem::new(matrix(&q)?, DVector::from_vec(r), c)
            .map(Self)
            .map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (seed, n, shift = problems::DEFAULT_HESSIAN_SHIFT))]
    fn generate(seed: u64, n: usize, shift: f64) -> PyResult<Self> {
        problems::generate_quadratic_with_shift(seed, n, shift)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check(&x)?;
        Ok(self.0.value(&DVector::from_vec(x)))
    }

    fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check(&x)?;
        Ok(self.0.gradient(&DVector::from_vec(x)).iter().copied().collect())
    }
}

impl PyQuadratic {
    fn check(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.0.dim() {
            return Err(PyValueError::new_err(format!(
                "expected a point of dimension {}, got {}",
                self.0.dim(),
                x.len()
            )));
        }
        Ok(())
    }
}

/// `(x*, f*, interior)` for `Σ_i wbar_i f_i` over `[lower, upper]^n`.
#[pyfunction]
fn weighted_optimum(
    problems: Vec<PyRef<'_, PyQuadratic>>,
    wbar: Vec<f64>,
    lower: f64,
    upper: f64,
) -> PyResult<(Vec<f64>, f64, bool)> {
    let ps: Vec<_> = problems.iter().map(|p| p.0.clone()).collect();
    let n = ps.first().map_or(0, |p| p.dim());
    let bx = optimizer::BoxConstraint::uniform(n, lower, upper).map_err(py_err)?;
    let o = problems::weighted_optimum(&ps, &DVector::from_vec(wbar), &bx).map_err(py_err)?;
    Ok((o.x_star.iter().copied().collect(), o.f_star, o.interior))
}

fn bound_params(m: usize, eta: f64, big_m: f64, l: f64, alpha0: f64, epsilon: f64) -> PyResult<BoundParams> {
    BoundParams::new(m, eta, big_m, l, alpha0, epsilon).map_err(py_err)
}

#[pyfunction]
fn disagreement_bound(
    k: usize,
    m: usize,
    eta: f64,
    big_m: f64,
    l: f64,
    alpha0: f64,
    epsilon: f64,
) -> PyResult<f64> {
    bounds::disagreement_bound(k, &bound_params(m, eta, big_m, l, alpha0, epsilon)?).map_err(py_err)
}

#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn optimality_bound(
    k: usize,
    s: usize,
    graph: &PyGraph,
    distances_at_s: Vec<f64>,
    eta: f64,
    big_m: f64,
    l: f64,
    alpha0: f64,
    epsilon: f64,
) -> PyResult<f64> {
    let p = bound_params(graph.0.agent_count(), eta, big_m, l, alpha0, epsilon)?;
    bounds::optimality_bound(k, s, &graph.0, &distances_at_s, &p).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (points, tol = 0.0))]
fn pareto_filter(points: Vec<Vec<f64>>, tol: f64) -> PyResult<Vec<Vec<f64>>> {
    pareto::pareto_filter_tol(&points, tol).map_err(py_err)
}

#[pyclass(name = "Trace", module = "prioropt_py")]
struct PyTrace(optimizer::Trace);

#[pymethods]
impl PyTrace {
    fn k(&self) -> Vec<usize> {
        self.0.records.iter().map(|r| r.k).collect()
    }

    fn disagreement(&self) -> Vec<f64> {
        self.0.records.iter().map(|r| r.disagreement).collect()
    }

    fn f_of_y(&self) -> Vec<f64> {
        self.0.records.iter().map(|r| r.f_of_y).collect()
    }

    fn min_w_entry(&self) -> Vec<f64> {
        self.0.records.iter().map(|r| r.min_w_entry).collect()
    }

    fn sum_sq_dist_to_opt(&self) -> Vec<Option<f64>> {
        self.0.records.iter().map(|r| r.sum_sq_dist_to_opt).collect()
    }

    /// Consensus priorities `w̄`.
    fn wbar(&self) -> Vec<f64> {
        self.0.wbar.iter().copied().collect()
    }

    /// Final average iterate.
    fn y(&self) -> Vec<f64> {
        self.0.last().y.iter().copied().collect()
    }

    /// Final iterates, one row per agent.
    fn iterates(&self) -> Vec<Vec<f64>> {
        rows(&self.0.final_state.x.transpose())
    }

    fn oracle_f(&self) -> Option<f64> {
        self.0.oracle.as_ref().map(|o| o.f_star)
    }

    fn relative_gap(&self) -> Option<f64> {
        self.0.relative_gap()
    }

    fn __len__(&self) -> usize {
        self.0.records.len()
    }
}

#[pyclass(name = "RunConfig", module = "prioropt_py", skip_from_py_object)]
#[derive(Clone)]
struct PyRunConfig(RunConfig);

#[pymethods]
impl PyRunConfig {
    /// Complete graph and defaults everywhere else.
    #[new]
    #[pyo3(signature = (m, n, seed, iterations, record_every = 1))]
    fn new(m: usize, n: usize, seed: u64, iterations: usize, record_every: usize) -> PyResult<Self> {
        let mut cfg = RunConfig::new(m, n, seed, iterations);
        cfg.graph = config::GraphSpec::Keyword(config::GraphKeyword::Complete);
        cfg.record_every = record_every;
        cfg.resolve().map(Self).map_err(py_err)
    }

    /// Parses a TOML run configuration.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        config::parse_config(text).map(Self).map_err(py_err)
    }

    fn to_toml(&self) -> PyResult<String> {
        config::serialize_config(&self.0).map_err(py_err)
    }

    fn hash(&self) -> PyResult<String> {
        self.0.hash().map_err(py_err)
    }

    #[getter]
    fn c(&self) -> f64 {
        self.0.gain()
    }

    fn graph(&self) -> PyResult<PyGraph> {
        self.0.graph.build(self.0.m).map(PyGraph).map_err(py_err)
    }

    fn initial_priorities(&self) -> PyResult<PyPriorityState> {
        self.0.initial_priorities().map(PyPriorityState).map_err(py_err)
    }

    fn problems(&self) -> PyResult<Vec<PyQuadratic>> {
        let setup = self.0.build_setup().map_err(py_err)?;
        Ok(setup.problems.into_iter().map(PyQuadratic).collect())
    }

    /// `(x*, f*)` for the consensus weights of this config.
    fn oracle(&self) -> PyResult<(Vec<f64>, f64)> {
        let setup = self.0.build_setup().map_err(py_err)?;
        let o = setup.oracle.ok_or_else(|| PyValueError::new_err("no oracle"))?;
        Ok((o.x_star.iter().copied().collect(), o.f_star))
    }

    /// Runs the algorithm without holding the interpreter lock.
    fn run(&self, py: Python<'_>) -> PyResult<PyTrace> {
        let cfg = self.0.clone();
        py.detach(move || {
            let setup = cfg.build_setup()?;
            optimizer::run_trace(&setup)
        })
        .map(PyTrace)
        .map_err(py_err)
    }

    /// Two-agent priority sweep; one dict per grid point.
    #[pyo3(signature = (points = SWEEP_POINTS))]
    fn sweep<'py>(&self, py: Python<'py>, points: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let cfg = self.0.clone();
        let result = py.detach(move || {
            let setup = cfg.build_setup()?;
            let grid = pareto::default_two_agent_grid(points, cfg.gain())?;
            pareto::sweep(&setup, &grid)
        });
        result
            .map_err(py_err)?
            .into_iter()
            .map(|p| {
                let d = PyDict::new(py);
                d.set_item("run_id", p.run_id.clone())?;
                d.set_item("wbar", p.wbar.iter().copied().collect::<Vec<_>>())?;
                d.set_item("f_values", p.f_values.clone())?;
                d.set_item("weighted_value", p.weighted_value)?;
                d.set_item("oracle_f", p.oracle_f)?;
                d.set_item("oracle_f_values", p.oracle_f_values.clone())?;
                d.set_item("relative_gap", p.relative_gap())?;
                Ok(d)
            })
            .collect()
    }
}

/// Runs a named scenario, writes its artifacts, returns the summary.
#[pyfunction]
#[pyo3(signature = (name, out = None, seed = None, record_every = None, full = false, config = None))]
fn run_scenario<'py>(
    py: Python<'py>,
    name: &str,
    out: Option<PathBuf>,
    seed: Option<u64>,
    record_every: Option<usize>,
    full: bool,
    config: Option<PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let ov = Overrides {
        seed,
        record_every,
        out,
        full,
        config,
    };
    let name = name.to_string();
    let result = py
        .detach(move || scenario::run_scenario(&name, &ov))
        .map_err(py_err)?;
    let s = &result.summary;
    let d = PyDict::new(py);
    d.set_item("scenario", s.scenario.clone())?;
    d.set_item("final_f", s.final_f)?;
    d.set_item("oracle_f", s.oracle_f)?;
    d.set_item("relative_gap", s.relative_gap)?;
    d.set_item("final_disagreement", s.final_disagreement)?;
    d.set_item("iterations", s.iterations)?;
    d.set_item("runtime_seconds", s.runtime_seconds)?;
    d.set_item("config_hash", s.config_hash.clone())?;
    d.set_item("seed", s.seed)?;
    d.set_item("files", result.files.clone())?;
    Ok(d)
}

#[pymodule]
fn prioropt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyPriorityState>()?;
    m.add_class::<PyQuadratic>()?;
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(build_mixing_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(transition_spread, m)?)?;
    m.add_function(wrap_pyfunction!(geometric_params, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_optimum, m)?)?;
    m.add_function(wrap_pyfunction!(disagreement_bound, m)?)?;
    m.add_function(wrap_pyfunction!(optimality_bound, m)?)?;
    m.add_function(wrap_pyfunction!(pareto_filter, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
