//! Python bindings: graphs, rank bounds, generators, simulation, fitting and
//! metrics. Matrices cross the boundary as lists of rows.

use lowrank_dag::bounds::{numeric_rank as numeric_rank_impl, NUMERIC_RANK_TOL};
use lowrank_dag::graphgen::assign_weights_cfg;
use lowrank_dag::{
    fit as fit_impl, rank_bounds as rank_bounds_impl, simulate_linear, Dag as CoreDag, Dataset,
    GenConfig, GraphKind, MetricsReport, Noise, RankGenOutcome, SolverConfig, WeightedDag,
};
use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(value_error("matrix rows have different lengths"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|row| row.iter().copied().collect()).collect()
}

/// Directed acyclic graph on vertices `0..d`.
#[pyclass(name = "Dag", frozen)]
struct PyDag {
    inner: CoreDag,
}

#[pymethods]
impl PyDag {
    #[new]
    fn new(d: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        let inner = CoreDag::new(d, edges).map_err(value_error)?;
        inner.topological_order().map_err(value_error)?;
        Ok(Self { inner })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().collect()
    }

    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    fn topological_order(&self) -> PyResult<Vec<usize>> {
        self.inner.topological_order().map_err(value_error)
    }

    /// Largest rank over all weightings of this support.
    fn max_rank(&self) -> usize {
        lowrank_dag::max_rank(&self.inner)
    }

    /// Every graphical rank bound, as a dict.
    fn rank_bounds<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let b = rank_bounds_impl(&self.inner).map_err(value_error)?;
        let out = PyDict::new(py);
        out.set_item("lower_level", b.lower_level)?;
        out.set_item("lower_components", b.lower_components)?;
        out.set_item("upper_matching", b.upper_matching)?;
        out.set_item("by_children", b.upper_level.by_children)?;
        out.set_item("by_parents", b.upper_level.by_parents)?;
        out.set_item("by_largest_level", b.upper_level.by_largest_level)?;
        out.set_item("non_leaf", b.upper_level.non_leaf)?;
        out.set_item("non_root", b.upper_level.non_root)?;
        out.set_item("levels", b.levels.groups)?;
        out.set_item("cover_heads", b.min_cover.heads)?;
        out.set_item("cover_tails", b.min_cover.tails)?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("Dag(d={}, edges={})", self.inner.d(), self.inner.num_edges())
    }
}

fn parse_kind(kind: &str) -> PyResult<GraphKind> {
    match kind {
        "rank" => Ok(GraphKind::Rank),
        "er" => Ok(GraphKind::Er),
        "sf" => Ok(GraphKind::Sf),
        _ => Err(value_error(format!("unknown graph kind {kind:?}; use rank, er or sf"))),
    }
}

fn parse_noise(noise: &str) -> PyResult<Noise> {
    match noise {
        "gaussian" => Ok(Noise::Gaussian),
        "exponential" => Ok(Noise::Exponential),
        _ => Err(value_error(format!("unknown noise {noise:?}; use gaussian or exponential"))),
    }
}

/// Draws a random weighted DAG. Returns `(dag, weights)`, or `None` when the
/// rank-specified generator reports FAIL.
#[pyfunction]
#[pyo3(signature = (kind, d, deg, r=None, gamma=None, seed=0, weight_lo=0.5, weight_hi=2.0))]
#[allow(clippy::too_many_arguments)]
fn generate(
    kind: &str,
    d: usize,
    deg: f64,
    r: Option<usize>,
    gamma: Option<f64>,
    seed: u64,
    weight_lo: f64,
    weight_hi: f64,
) -> PyResult<Option<(PyDag, Vec<Vec<f64>>)>> {
    let mut cfg = GenConfig::new(parse_kind(kind)?, d, deg, seed);
    cfg.r = r;
    cfg.gamma = gamma;
    cfg.weight_lo = weight_lo;
    cfg.weight_hi = weight_hi;
    cfg.validate().map_err(value_error)?;
    let dag = match cfg.generate().map_err(value_error)? {
        RankGenOutcome::Success { dag, .. } => dag,
        RankGenOutcome::Fail { .. } => return Ok(None),
    };
    let w = assign_weights_cfg(&dag, &cfg).map_err(value_error)?;
    let m = w.matrix().map_err(value_error)?;
    Ok(Some((PyDag { inner: dag }, to_rows(&m))))
}

/// Number of singular values above `tol` times the largest.
#[pyfunction]
#[pyo3(signature = (matrix, tol=NUMERIC_RANK_TOL))]
fn numeric_rank(matrix: Vec<Vec<f64>>, tol: f64) -> PyResult<usize> {
    numeric_rank_impl(&to_matrix(&matrix)?, tol).map_err(value_error)
}

/// Samples `n` rows from the linear SEM with weight matrix `weights`.
#[pyfunction]
#[pyo3(signature = (weights, n, noise="gaussian", seed=0))]
fn simulate(weights: Vec<Vec<f64>>, n: usize, noise: &str, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let w = WeightedDag::from_matrix(&to_matrix(&weights)?).map_err(value_error)?;
    let ds = simulate_linear(&w, n, parse_noise(noise)?, seed).map_err(value_error)?;
    Ok(to_rows(ds.matrix()))
}

/// Learns a DAG from `data` (rows are samples). `rank_hat=None` fits the
/// full matrix.
#[pyfunction]
#[pyo3(signature = (data, rank_hat=None, seed=0, lambda_nuc=0.0, w_threshold=0.3))]
fn fit<'py>(
    py: Python<'py>,
    data: Vec<Vec<f64>>,
    rank_hat: Option<usize>,
    seed: u64,
    lambda_nuc: f64,
    w_threshold: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let ds = Dataset::new(to_matrix(&data)?).map_err(value_error)?;
    let cfg = SolverConfig {
        rank_hat,
        seed,
        lambda_nuc,
        w_threshold,
        ..SolverConfig::default()
    };
    cfg.validate(ds.d()).map_err(value_error)?;
    let res = py.detach(|| fit_impl(&ds, &cfg)).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("w_star", to_rows(&res.w_star))?;
    out.set_item("dag", PyDag { inner: res.dag })?;
    out.set_item("h_final", res.h_final)?;
    out.set_item("converged", res.converged)?;
    out.set_item("outer_iters", res.outer_iters)?;
    out.set_item("seconds", res.wall_time)?;
    Ok(out)
}

/// SHD, TPR and FDR of `estimate` against `truth`.
#[pyfunction]
fn compare<'py>(py: Python<'py>, truth: &PyDag, estimate: &PyDag) -> PyResult<Bound<'py, PyDict>> {
    let m = MetricsReport::compare(&truth.inner, &estimate.inner, 0.0).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("shd", m.shd)?;
    out.set_item("tpr", m.tpr)?;
    out.set_item("fdr", m.fdr)?;
    Ok(out)
}

#[pymodule]
fn lowrank_dag_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDag>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(numeric_rank, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
