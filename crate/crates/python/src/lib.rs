//! Python module `rss`.
//!
//! Structured results (search results, bound reports, trial summaries) are
//! returned as plain dicts and lists built from their JSON form. Non-finite
//! floats such as a `−∞` log-probability come back as `None`.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyString};
use serde_json::Value;

use rss_core::bounds::{
    bound_report as core_bound_report, required_n_single as core_required_n_single, TheoremConstants,
};
use rss_core::experiments::{
    estimate_joint_prob as core_joint, estimate_single_subset_prob as core_single, verify_appendix_claims,
};
use rss_core::nne::{find_genotype as core_find_genotype, sample_genes, NetTensor};
use rss_core::sampler::{sample_standard_normal as core_sample, DistributionTag};
use rss_core::search::{cover_grid as core_cover_grid, CoverageOptions};
use rss_core::walks::{run_walk as core_run_walk, DEFAULT_FRONTIER_BUDGET};
use rss_core::{Engine, ProblemParams};

fn err(e: rss_core::Error) -> PyErr {
    use rss_core::Error as E;
    match e {
        E::Io(_) | E::Csv(_) | E::Json(_) | E::Format(_) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn param_err(e: rss_core::ParamError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(u)) => u.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for x in items {
                list.append(json_to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, x) in map {
                dict.set_item(k, json_to_py(py, x)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &value)
}

fn engine(name: &str) -> PyResult<Engine> {
    name.parse().map_err(param_err)
}

fn params(d: usize, n: usize, epsilon: f64, alpha: f64) -> PyResult<ProblemParams> {
    ProblemParams::new(d, n, epsilon, alpha).map_err(param_err)
}

/// An `n × d` sample matrix.
#[pyclass(name = "SampleMatrix", frozen)]
struct PySampleMatrix {
    inner: rss_core::SampleMatrix,
}

#[pymethods]
impl PySampleMatrix {
    #[staticmethod]
    fn from_rows(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = rss_core::SampleMatrix::from_rows(&rows, 0, DistributionTag::Imported).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows().map(<[f64]>::to_vec).collect()
    }

    fn subset_sum(&self, subset: Vec<usize>) -> PyResult<Vec<f64>> {
        if let Some(&i) = subset.iter().find(|&&i| i >= self.inner.n()) {
            return Err(PyValueError::new_err(format!("index {i} out of range")));
        }
        Ok(self.inner.subset_sum(&subset))
    }

    /// Exact search for a subset whose sum lies within `epsilon` of `z`.
    #[pyo3(signature = (z, epsilon, engine="meet_in_middle", cardinality=None))]
    fn search<'py>(
        &self,
        py: Python<'py>,
        z: Vec<f64>,
        epsilon: f64,
        engine: &str,
        cardinality: Option<usize>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let e = self::engine(engine)?;
        let r = py
            .detach(|| rss_core::search::search(e, &self.inner, &z, epsilon, cardinality))
            .map_err(err)?;
        to_py(py, &r)
    }

    /// Checks that every center of the ε-grid over `[-h, h]^d` is hit.
    #[pyo3(signature = (epsilon, range_halfwidth=1.0, max_rows=None, engine="meet_in_middle"))]
    fn cover_grid<'py>(
        &self,
        py: Python<'py>,
        epsilon: f64,
        range_halfwidth: f64,
        max_rows: Option<usize>,
        engine: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let opts = CoverageOptions {
            engine: self::engine(engine)?,
            range_halfwidth,
            max_rows,
            ..CoverageOptions::default()
        };
        let r = py
            .detach(|| core_cover_grid(&self.inner, epsilon, &opts))
            .map_err(err)?;
        to_py(py, &r)
    }

    fn __repr__(&self) -> String {
        format!(
            "SampleMatrix(n={}, d={}, seed={})",
            self.inner.n(),
            self.inner.d(),
            self.inner.seed()
        )
    }
}

#[pyfunction]
fn sample_standard_normal(n: usize, d: usize, seed: u64) -> PyResult<PySampleMatrix> {
    Ok(PySampleMatrix {
        inner: core_sample(n, d, seed).map_err(err)?,
    })
}

#[pyfunction]
fn derive_seed(master: u64, stream: u64) -> u64 {
    rss_core::derive_seed(master, stream)
}

#[pyfunction]
fn required_n_single(d: usize, alpha: f64, epsilon: f64) -> f64 {
    core_required_n_single(d, alpha, epsilon)
}

/// Every bound for `(d, n, ε, α)` and a family of `2^log2_family_size` subsets.
#[pyfunction]
#[pyo3(signature = (d, n, epsilon, alpha, log2_family_size=0.0))]
fn bound_report<'py>(
    py: Python<'py>,
    d: usize,
    n: usize,
    epsilon: f64,
    alpha: f64,
    log2_family_size: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let p = params(d, n, epsilon, alpha)?;
    to_py(
        py,
        &core_bound_report(&p, log2_family_size, TheoremConstants::default()),
    )
}

/// Subsets of size `floor(αn)` with pairwise intersections at most `floor(2α²n)`.
#[pyfunction]
#[pyo3(signature = (n, alpha, size, seed, max_attempts=1000))]
fn build_family(n: usize, alpha: f64, size: usize, seed: u64, max_attempts: usize) -> PyResult<Vec<Vec<usize>>> {
    let f = rss_core::build_family(n, alpha, size, seed, max_attempts).map_err(err)?;
    Ok(f.subsets().to_vec())
}

#[pyfunction]
fn estimate_single_subset_prob<'py>(
    py: Python<'py>,
    d: usize,
    subset_size: usize,
    epsilon: f64,
    z: Vec<f64>,
    trials: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let s = py
        .detach(|| core_single(d, subset_size, epsilon, &z, trials, seed))
        .map_err(err)?;
    to_py(py, &s)
}

#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn estimate_joint_prob<'py>(
    py: Python<'py>,
    d: usize,
    n: usize,
    epsilon: f64,
    alpha: f64,
    intersection: usize,
    z: Vec<f64>,
    trials: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let p = params(d, n, epsilon, alpha)?;
    let s = py
        .detach(|| core_joint(&p, intersection, &z, trials, seed))
        .map_err(err)?;
    to_py(py, &s)
}

#[pyfunction]
#[pyo3(signature = (draws, seed, quadrature_points=8))]
fn check_claims<'py>(py: Python<'py>, draws: u64, seed: u64, quadrature_points: usize) -> PyResult<Bound<'py, PyAny>> {
    let r = py
        .detach(|| verify_appendix_claims(draws, seed, quadrature_points))
        .map_err(err)?;
    to_py(py, &r)
}

/// Samples `n` genes of shape `l × d × d` and searches for a genotype whose
/// tensor is within `2ε` of `target` (flattened row-major) in every entry.
#[pyfunction]
#[pyo3(signature = (n, l, d, target, epsilon, seed, engine="meet_in_middle"))]
#[allow(clippy::too_many_arguments)]
fn find_genotype<'py>(
    py: Python<'py>,
    n: usize,
    l: usize,
    d: usize,
    target: Vec<f64>,
    epsilon: f64,
    seed: u64,
    engine: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let e = self::engine(engine)?;
    let bank = sample_genes(n, l, d, seed).map_err(err)?;
    let target = NetTensor::new(l, d, target).map_err(param_err)?;
    let r = py
        .detach(|| core_find_genotype(&bank, &target, epsilon, e))
        .map_err(err)?;
    to_py(py, &r)
}

/// Branching walk with `N(0, I_d)` steps; `dedup_cell = 0` tracks it exactly.
#[pyfunction]
#[pyo3(signature = (d, steps, seed, targets, dedup_cell=0.0))]
fn run_walk<'py>(
    py: Python<'py>,
    d: usize,
    steps: usize,
    seed: u64,
    targets: Vec<Vec<f64>>,
    dedup_cell: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let t = py
        .detach(|| core_run_walk(d, steps, seed, dedup_cell, &targets, DEFAULT_FRONTIER_BUDGET))
        .map_err(err)?;
    to_py(py, &t)
}

#[pymodule]
#[pyo3(name = "rss")]
fn rss_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySampleMatrix>()?;
    m.add_function(wrap_pyfunction!(sample_standard_normal, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    m.add_function(wrap_pyfunction!(required_n_single, m)?)?;
    m.add_function(wrap_pyfunction!(bound_report, m)?)?;
    m.add_function(wrap_pyfunction!(build_family, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_single_subset_prob, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_joint_prob, m)?)?;
    m.add_function(wrap_pyfunction!(check_claims, m)?)?;
    m.add_function(wrap_pyfunction!(find_genotype, m)?)?;
    m.add_function(wrap_pyfunction!(run_walk, m)?)?;
    Ok(())
}
