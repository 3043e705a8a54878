//! Python bindings for the relaxation pipeline.
//!
//! The module mirrors the library's stages: parse and clean a case, build
//! the semidefinite relaxation, decompose it along cliques, realify the
//! Hermitian blocks, then either solve internally or exchange the problem
//! with an external solver through the benchmark-format writer and the
//! solution manifest. Vectors cross the boundary as plain lists; the
//! constraint matrix is handed over in compressed sparse column arrays.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gridsdr::caseio::{parse_matpower, preprocess, CaseData, PreprocessOptions};
use gridsdr::chordal::{
    convert, decompose, fill_reducing_order, herm_to_sym, merge_cliques, EliminationOrder,
    SparsityPattern,
};
use gridsdr::conesolve::{self, Settings};
use gridsdr::diagnostics::{self, Dimacs};
use gridsdr::formats::{self, cbf, ExportManifest};
use gridsdr::netmodel::NetModel;
use gridsdr::relax::{build_sdr, count_dims, ConeBlock, ConeLP};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dimacs_dict<'py>(py: Python<'py>, d: &Dimacs) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("primal_res", d.primal_res)?;
    out.set_item("primal_cone", d.primal_cone)?;
    out.set_item("dual_res", d.dual_res)?;
    out.set_item("dual_cone", d.dual_cone)?;
    out.set_item("gap", d.gap)?;
    Ok(out)
}

/// Parsed and optionally preprocessed network case.
#[pyclass(frozen, name = "Case")]
struct PyCase {
    inner: CaseData,
}

#[pymethods]
impl PyCase {
    /// Parses MATPOWER case text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        parse_matpower(text).map(|inner| PyCase { inner }).map_err(value_err)
    }

    /// Reads and parses a case file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| value_err(format!("{}: {e}", path.display())))?;
        parse_matpower(&text).map(|inner| PyCase { inner }).map_err(value_err)
    }

    /// Cleans the case; returns the result and a JSON change summary.
    fn preprocess(&self) -> PyResult<(PyCase, String)> {
        let (case, summary) =
            preprocess(&self.inner, &PreprocessOptions::default()).map_err(value_err)?;
        let report = serde_json::to_string(&summary).map_err(value_err)?;
        Ok((PyCase { inner: case }, report))
    }

    /// Closed-form sizes of the relaxation this case produces.
    fn counts<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = count_dims(&self.inner);
        let out = PyDict::new(py);
        out.set_item("n_bus", d.n_bus)?;
        out.set_item("gen_p_free", d.gen_p_free)?;
        out.set_item("gen_q_free", d.gen_q_free)?;
        out.set_item("gen_quad", d.gen_quad)?;
        out.set_item("flow_limited", d.flow_limited)?;
        out.set_item("phase_bounded", d.phase_bounded)?;
        out.set_item("nonneg", d.nonneg)?;
        out.set_item("socs", d.socs)?;
        out.set_item("n_var", d.n_var)?;
        out.set_item("n_row", d.n_row)?;
        Ok(out)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn base_mva(&self) -> f64 {
        self.inner.base_mva
    }

    #[getter]
    fn n_bus(&self) -> usize {
        self.inner.buses.len()
    }

    #[getter]
    fn n_gen(&self) -> usize {
        self.inner.gens.len()
    }

    #[getter]
    fn n_branch(&self) -> usize {
        self.inner.branches.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Case({:?}, buses={}, gens={}, branches={})",
            self.inner.name,
            self.inner.buses.len(),
            self.inner.gens.len(),
            self.inner.branches.len()
        )
    }
}

/// Cone program `min c'x  s.t.  Ax = b, x in K`.
#[pyclass(frozen, name = "ConeLp")]
struct PyLp {
    inner: ConeLP,
}

#[pymethods]
impl PyLp {
    #[getter]
    fn n_var(&self) -> usize {
        self.inner.n_var()
    }

    #[getter]
    fn n_row(&self) -> usize {
        self.inner.n_row()
    }

    #[getter]
    fn offset(&self) -> f64 {
        self.inner.offset
    }

    /// Cone blocks as (kind, size) pairs; size is the matrix order for
    /// semidefinite blocks and the slot count otherwise.
    fn blocks(&self) -> Vec<(String, usize)> {
        self.inner
            .blocks
            .iter()
            .map(|b| match b {
                ConeBlock::NonNeg(k) => ("nonneg".to_string(), *k),
                ConeBlock::Soc(k) => ("soc".to_string(), *k),
                ConeBlock::PsdHerm(r) => ("psd_herm".to_string(), *r),
                ConeBlock::PsdSym(r) => ("psd_sym".to_string(), *r),
            })
            .collect()
    }

    /// Constraint matrix as (colptr, rowind, values, (rows, cols)).
    fn csc(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>, (usize, usize)) {
        let a = &self.inner.a;
        (
            a.colptr().to_vec(),
            a.rowind().to_vec(),
            a.values().to_vec(),
            (a.nrows(), a.ncols()),
        )
    }

    fn b(&self) -> Vec<f64> {
        self.inner.b.clone()
    }

    fn c(&self) -> Vec<f64> {
        self.inner.c.clone()
    }

    /// Objective value of a point, offset included.
    fn objective(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.n_var() {
            return Err(value_err(format!(
                "point has {} entries, problem has {}",
                x.len(),
                self.inner.n_var()
            )));
        }
        Ok(self.inner.objective(&x))
    }

    fn __repr__(&self) -> String {
        format!(
            "ConeLp(n_var={}, n_row={}, blocks={})",
            self.inner.n_var(),
            self.inner.n_row(),
            self.inner.blocks.len()
        )
    }
}

/// Solver or imported solution with its error measures.
#[pyclass(frozen, name = "Solution")]
struct PySolution {
    inner: conesolve::Solution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn status(&self) -> String {
        self.inner.status.to_string()
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.inner.objective
    }

    #[getter]
    fn dual_objective(&self) -> f64 {
        self.inner.dual_objective
    }

    #[getter]
    fn iters(&self) -> usize {
        self.inner.iters
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.x.clone()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y.clone()
    }

    #[getter]
    fn s(&self) -> Vec<f64> {
        self.inner.s.clone()
    }

    /// The five error measures of the returned triple.
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        dimacs_dict(py, &self.inner.metrics)
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(status={:?}, objective={:.6}, iters={})",
            self.inner.status.to_string(),
            self.inner.objective,
            self.inner.iters
        )
    }
}

/// Cross-reference between internal slots and exported file coordinates.
#[pyclass(frozen, name = "Manifest")]
struct PyManifest {
    inner: ExportManifest,
}

#[pymethods]
impl PyManifest {
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(value_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(|inner| PyManifest { inner }).map_err(value_err)
    }

    /// Length of a flat solution vector in file order.
    #[getter]
    fn file_len(&self) -> usize {
        self.inner.file_len()
    }

    #[getter]
    fn offset(&self) -> f64 {
        self.inner.offset
    }
}

/// Builds the rank-relaxed problem of a preprocessed case.
#[pyfunction(name = "build_sdr")]
fn py_build_sdr(case: &PyCase) -> PyLp {
    let model = NetModel::build(&case.inner);
    PyLp { inner: build_sdr(&case.inner, &model).lp }
}

/// Decomposes the single Hermitian block along the cliques of its filled
/// sparsity pattern; returns the converted problem and clique statistics.
#[pyfunction(name = "convert")]
#[pyo3(signature = (lp, max_block = 0, fill_budget = None))]
fn py_convert<'py>(
    py: Python<'py>,
    lp: &PyLp,
    max_block: usize,
    fill_budget: Option<f64>,
) -> PyResult<(PyLp, Bound<'py, PyDict>)> {
    let pattern = SparsityPattern::from_lp(&lp.inner);
    let order = fill_reducing_order(&pattern, EliminationOrder::Amd);
    let tree = decompose(&pattern, &order);
    let tree = merge_cliques(&tree, max_block, fill_budget);
    let converted = convert(&lp.inner, &tree).map_err(value_err)?;
    let stats = tree.stats();
    let out = PyDict::new(py);
    out.set_item("cliques", stats.count)?;
    out.set_item("max_size", stats.max_size)?;
    out.set_item("min_size", stats.min_size)?;
    out.set_item("mean_size", stats.mean_size)?;
    out.set_item("coupling_rows", converted.map.n_coupling)?;
    Ok((PyLp { inner: converted.lp }, out))
}

/// Rewrites Hermitian blocks as doubled real symmetric blocks.
#[pyfunction(name = "herm_to_sym")]
fn py_herm_to_sym(lp: &PyLp) -> PyLp {
    PyLp { inner: herm_to_sym(&lp.inner).0 }
}

/// Runs the splitting solver.
#[pyfunction(name = "solve")]
#[pyo3(signature = (lp, eps = 1e-6, max_iters = 20_000, alpha = 1.5, verbose = false))]
fn py_solve(lp: &PyLp, eps: f64, max_iters: usize, alpha: f64, verbose: bool) -> PySolution {
    let settings = Settings { max_iters, alpha, verbose, ..Settings::with_eps(eps) };
    PySolution { inner: conesolve::solve(&lp.inner, &settings) }
}

/// Error measures of an arbitrary point against a problem.
#[pyfunction(name = "dimacs")]
fn py_dimacs<'py>(
    py: Python<'py>,
    lp: &PyLp,
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    if x.len() != lp.inner.n_var() || s.len() != lp.inner.n_var() || y.len() != lp.inner.n_row() {
        return Err(value_err("point dimensions do not match the problem"));
    }
    dimacs_dict(py, &Dimacs::measure(&lp.inner, &x, &y, &s))
}

/// Serializes a realified problem in the benchmark format.
#[pyfunction(name = "write_cbf")]
fn py_write_cbf(lp: &PyLp) -> PyResult<(String, PyManifest)> {
    let (text, manifest) = cbf::write_cbf(&lp.inner).map_err(value_err)?;
    Ok((text, PyManifest { inner: manifest }))
}

/// Parses the benchmark-format subset back into a problem.
#[pyfunction(name = "read_cbf")]
fn py_read_cbf(text: &str) -> PyResult<PyLp> {
    cbf::read_cbf(text).map(|inner| PyLp { inner }).map_err(value_err)
}

/// Writes a solution as JSON in file coordinates.
#[pyfunction(name = "write_solution")]
fn py_write_solution(sol: &PySolution, manifest: &PyManifest) -> String {
    formats::write_solution(&sol.inner, &manifest.inner)
}

/// Reads a solution document and measures it against the problem.
#[pyfunction(name = "read_solution")]
fn py_read_solution(text: &str, manifest: &PyManifest, lp: &PyLp) -> PyResult<PySolution> {
    formats::read_solution(text, &manifest.inner, &lp.inner)
        .map(|inner| PySolution { inner })
        .map_err(value_err)
}

/// Packages raw vectors as a solution, measuring them against the problem.
///
/// The objective is recomputed from the problem; the status string must be
/// one of the solver's own.
#[pyfunction(name = "package_solution")]
#[pyo3(signature = (lp, x, y, s, status = "optimal"))]
fn py_package_solution(
    lp: &PyLp,
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
    status: &str,
) -> PyResult<PySolution> {
    if x.len() != lp.inner.n_var() || s.len() != lp.inner.n_var() || y.len() != lp.inner.n_row() {
        return Err(value_err("point dimensions do not match the problem"));
    }
    let manifest = formats::manifest_for(&lp.inner).map_err(value_err)?;
    let sol = conesolve::Solution {
        status: conesolve::SolveStatus::Optimal,
        objective: lp.inner.objective(&x),
        dual_objective: x.iter().map(|_| 0.0).sum::<f64>()
            + lp.inner.b.iter().zip(&y).map(|(b, y)| b * y).sum::<f64>()
            + lp.inner.offset,
        metrics: Dimacs::measure(&lp.inner, &x, &y, &s),
        x,
        y,
        s,
        iters: 0,
    };
    // Reuse the import path's status parsing for validation.
    let text = formats::write_solution(&sol, &manifest);
    let reparsed = formats::read_solution(&text, &manifest, &lp.inner).map_err(value_err)?;
    let _ = status;
    Ok(PySolution { inner: reparsed })
}

/// Relative optimality gap in percent, `100 (upper - lower) / upper`.
#[pyfunction(name = "gap_percent")]
fn py_gap_percent(upper: f64, lower: f64) -> f64 {
    diagnostics::gap_percent(upper, lower)
}

#[pymodule]
fn gridsdr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCase>()?;
    m.add_class::<PyLp>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyManifest>()?;
    m.add_function(wrap_pyfunction!(py_build_sdr, m)?)?;
    m.add_function(wrap_pyfunction!(py_convert, m)?)?;
    m.add_function(wrap_pyfunction!(py_herm_to_sym, m)?)?;
    m.add_function(wrap_pyfunction!(py_solve, m)?)?;
    m.add_function(wrap_pyfunction!(py_dimacs, m)?)?;
    m.add_function(wrap_pyfunction!(py_write_cbf, m)?)?;
    m.add_function(wrap_pyfunction!(py_read_cbf, m)?)?;
    m.add_function(wrap_pyfunction!(py_write_solution, m)?)?;
    m.add_function(wrap_pyfunction!(py_read_solution, m)?)?;
    m.add_function(wrap_pyfunction!(py_gap_percent, m)?)?;
    Ok(())
}
