//! Python bindings. Matrices cross the boundary as lists of rows with
//! `None` for missing cells; reports come back as plain dicts.

use comimp::bench::{check_theorem as run_theorem, run_regression_study, SimulationConfig};
use comimp::impute::{Lambda, MaxRank};
use comimp::io::{read_csv_path, write_csv_path, CsvOptions, Table};
use comimp::merge::MergeReport;
use comimp::{
    DataMatrix, FeatureSet, ImputerConfig, LabelVector, RankRule, SoftImputeConfig, SplitDataset,
};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyList;
use serde::Serialize;

create_exception!(comimp, ComimpError, PyValueError, "Raised for any library error.");

fn err(e: comimp::Error) -> PyErr {
    ComimpError::new_err(e.to_string())
}

fn to_dict<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| ComimpError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn rows_of(m: &DataMatrix) -> Vec<Vec<Option<f64>>> {
    (0..m.n_rows()).map(|r| m.row(r)).collect()
}

fn matrix(features: Vec<String>, rows: &[Vec<Option<f64>>]) -> PyResult<DataMatrix> {
    let fs = FeatureSet::new(features).map_err(err)?;
    DataMatrix::from_rows(fs, rows).map_err(err)
}

/// Imputer settings shared by every entry point.
#[allow(clippy::too_many_arguments)]
fn imputer(
    method: &str,
    k: usize,
    lam: Option<f64>,
    tol: f64,
    max_iter: usize,
    max_rank: Option<usize>,
) -> PyResult<ImputerConfig> {
    let cfg = match method {
        "mean" => ImputerConfig::Mean,
        "knn" => ImputerConfig::Knn { k },
        "soft" => ImputerConfig::SoftImpute(SoftImputeConfig {
            lambda: lam.map_or(Lambda::Auto, Lambda::Value),
            tol,
            max_iter,
            max_rank: max_rank.map_or(MaxRank::Full, MaxRank::Rank),
        }),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown imputer `{other}` (mean, knn, soft)"
            )))
        }
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

fn rank_rule(components: Option<usize>, var_explained: Option<f64>) -> PyResult<RankRule> {
    match (components, var_explained) {
        (Some(_), Some(_)) => Err(PyValueError::new_err(
            "pass either components or var_explained, not both",
        )),
        (Some(k), None) => Ok(RankRule::Fixed(k)),
        (None, Some(t)) => Ok(RankRule::VarianceThreshold(t)),
        (None, None) => Ok(RankRule::default()),
    }
}

/// Labelled dataset with named features.
#[pyclass(name = "Dataset", module = "comimp", from_py_object)]
#[derive(Clone)]
pub struct PyDataset {
    inner: comimp::Dataset,
}

#[pymethods]
impl PyDataset {
    /// `labels` may be numbers or strings.
    #[new]
    #[pyo3(signature = (features, rows, labels, label_name = "y".to_string()))]
    fn new(
        features: Vec<String>,
        rows: Vec<Vec<Option<f64>>>,
        labels: &Bound<'_, PyAny>,
        label_name: String,
    ) -> PyResult<Self> {
        let x = matrix(features, &rows)?;
        let y = if let Ok(v) = labels.extract::<Vec<f64>>() {
            LabelVector::numeric(label_name, v).map_err(err)?
        } else {
            LabelVector::categorical(label_name, labels.extract::<Vec<String>>()?)
        };
        Ok(PyDataset {
            inner: comimp::Dataset::new(x, y).map_err(err)?,
        })
    }

    /// Read a CSV; every non-label, non-id column must be numeric.
    #[staticmethod]
    #[pyo3(signature = (path, label, na = None, id_columns = None))]
    fn read_csv(
        path: std::path::PathBuf,
        label: &str,
        na: Option<Vec<String>>,
        id_columns: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let mut opts = CsvOptions::new(label);
        if let Some(na) = na {
            opts.na = na;
        }
        opts.id_columns = id_columns.unwrap_or_default();
        let table = read_csv_path(&path, &opts).map_err(err)?;
        Ok(PyDataset {
            inner: table.dataset,
        })
    }

    /// Write in canonical form; missing cells become `na`.
    #[pyo3(signature = (path, na = ""))]
    fn write_csv(&self, path: std::path::PathBuf, na: &str) -> PyResult<()> {
        let table = Table::new(self.inner.clone(), Vec::new(), vec![Vec::new(); self.inner.n_rows()]).map_err(err)?;
        write_csv_path(&path, &table, na).map_err(err)
    }

    #[getter]
    fn features(&self) -> Vec<String> {
        self.inner.features().names().to_vec()
    }

    #[getter]
    fn rows(&self) -> Vec<Vec<Option<f64>>> {
        rows_of(&self.inner.x)
    }

    #[getter]
    fn label_name(&self) -> String {
        self.inner.y.name().to_string()
    }

    #[getter]
    fn labels<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        match (self.inner.y.as_numeric(), self.inner.y.as_categorical()) {
            (Some(v), _) => PyList::new(py, v),
            (_, Some(v)) => PyList::new(py, v),
            _ => unreachable!("labels are numeric or categorical"),
        }
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn missing_count(&self) -> usize {
        self.inner.x.missing_count()
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(rows={}, features={:?}, label={:?})",
            self.inner.n_rows(),
            self.inner.features().names(),
            self.inner.y.name()
        )
    }
}

/// Result of [`impute`].
#[pyclass(name = "Imputation", module = "comimp", get_all)]
pub struct PyImputation {
    rows: Vec<Vec<f64>>,
    cells_imputed: Vec<usize>,
    iterations: Option<usize>,
    objective_trace: Vec<f64>,
    knn_fallbacks: usize,
}

/// Fill the missing cells of a matrix given as rows with `None` holes.
#[pyfunction]
#[pyo3(signature = (rows, features = None, method = "soft", k = 5, lam = None, tol = 1e-5, max_iter = 300, max_rank = None))]
#[allow(clippy::too_many_arguments)]
fn impute(
    rows: Vec<Vec<Option<f64>>>,
    features: Option<Vec<String>>,
    method: &str,
    k: usize,
    lam: Option<f64>,
    tol: f64,
    max_iter: usize,
    max_rank: Option<usize>,
) -> PyResult<PyImputation> {
    let width = rows.first().map_or(0, Vec::len);
    let names = features.unwrap_or_else(|| (0..width).map(|j| format!("x{j}")).collect());
    let x = matrix(names, &rows)?;
    let cfg = imputer(method, k, lam, tol, max_iter, max_rank)?;
    let r = comimp::impute(&x, &cfg).map_err(err)?;
    let filled = r
        .matrix
        .complete_values()
        .map_err(err)?
        .row_iter()
        .map(|row| row.iter().copied().collect())
        .collect();
    Ok(PyImputation {
        rows: filled,
        cells_imputed: r.cells_imputed,
        iterations: r.iterations,
        objective_trace: r.objective_trace,
        knn_fallbacks: r.knn_fallbacks,
    })
}

fn merged(py: Python<'_>, m: comimp::MergedDataset) -> PyResult<(PyDataset, Py<PyAny>)> {
    let report: &MergeReport = &m.report;
    let dict = to_dict(py, report)?;
    Ok((PyDataset { inner: m.data }, dict))
}

/// Align to the feature union, stack in order and impute. Returns `(dataset, report)`.
#[pyfunction]
#[pyo3(signature = (datasets, method = "soft", k = 5, lam = None, tol = 1e-5, max_iter = 300, max_rank = None))]
#[allow(clippy::too_many_arguments)]
fn merge(
    py: Python<'_>,
    datasets: Vec<PyDataset>,
    method: &str,
    k: usize,
    lam: Option<f64>,
    tol: f64,
    max_iter: usize,
    max_rank: Option<usize>,
) -> PyResult<(PyDataset, Py<PyAny>)> {
    let cfg = imputer(method, k, lam, tol, max_iter, max_rank)?;
    let ds: Vec<comimp::Dataset> = datasets.into_iter().map(|d| d.inner).collect();
    merged(py, comimp::comimp_merge(&ds, &cfg).map_err(err)?)
}

/// PCA-reduce each dataset's exclusive features, then merge train and test.
/// Returns `(train, test)`.
#[pyfunction]
#[pyo3(signature = (train1, test1, train2, test2, components = None, var_explained = None, method = "soft"))]
#[allow(clippy::too_many_arguments)]
fn pca_merge(
    train1: PyDataset,
    test1: PyDataset,
    train2: PyDataset,
    test2: PyDataset,
    components: Option<usize>,
    var_explained: Option<f64>,
    method: &str,
) -> PyResult<(PyDataset, PyDataset)> {
    let rule = rank_rule(components, var_explained)?;
    let cfg = imputer(method, 5, None, 1e-5, 300, None)?;
    let d1 = SplitDataset::new(train1.inner, test1.inner).map_err(err)?;
    let d2 = SplitDataset::new(train2.inner, test2.inner).map_err(err)?;
    let out = comimp::pca_comimp_merge(&d1, &d2, rule, &cfg).map_err(err)?;
    Ok((
        PyDataset {
            inner: out.train.data,
        },
        PyDataset {
            inner: out.test.data,
        },
    ))
}

/// PCA fitted on complete training rows.
#[pyclass(name = "Pca", module = "comimp")]
pub struct PyPca {
    model: comimp::PcaModel,
}

#[pymethods]
impl PyPca {
    #[new]
    #[pyo3(signature = (dataset, components = None, var_explained = None))]
    fn new(dataset: &PyDataset, components: Option<usize>, var_explained: Option<f64>) -> PyResult<Self> {
        let rule = rank_rule(components, var_explained)?;
        Ok(PyPca {
            model: comimp::pca_fit(&dataset.inner.x, rule).map_err(err)?,
        })
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.model.eigenvalues.clone()
    }

    #[getter]
    fn explained_variance_ratio(&self) -> Vec<f64> {
        self.model.explained_variance_ratio.clone()
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.model.mean.iter().copied().collect()
    }

    /// One row per component.
    #[getter]
    fn components(&self) -> Vec<Vec<f64>> {
        self.model
            .components
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect()
    }

    /// Scores of `dataset`'s rows, with columns named `{tag}_pc{i}`.
    #[pyo3(signature = (dataset, tag = "pc"))]
    fn project(&self, dataset: &PyDataset, tag: &str) -> PyResult<PyDataset> {
        let scores = comimp::pca_project(&self.model, &dataset.inner.x, tag).map_err(err)?;
        Ok(PyDataset {
            inner: comimp::Dataset::new(scores, dataset.inner.y.clone()).map_err(err)?,
        })
    }
}

/// Random check that merging never lowers the least squares SSE below the
/// sum of the per-dataset SSEs.
#[pyfunction]
#[pyo3(signature = (trials = 10_000, seed = 0, n_range = (5, 50), m_range = (5, 50)))]
fn check_theorem(
    py: Python<'_>,
    trials: usize,
    seed: u64,
    n_range: (usize, usize),
    m_range: (usize, usize),
) -> PyResult<Py<PyAny>> {
    let report = py
        .detach(|| run_theorem(trials, n_range, m_range, seed))
        .map_err(err)?;
    to_dict(py, &report)
}

/// Simulated regression study; returns the summary as a dict.
#[pyfunction]
#[pyo3(signature = (repeats = 500, seed = 0, method = "soft"))]
fn regression_study(py: Python<'_>, repeats: usize, seed: u64, method: &str) -> PyResult<Py<PyAny>> {
    let cfg = SimulationConfig {
        seed,
        ..SimulationConfig::default()
    };
    let imp = imputer(method, 5, None, 1e-5, 300, None)?;
    let result = py
        .detach(|| run_regression_study(&cfg, repeats, &imp, comimp::bench::threads_from_env()))
        .map_err(err)?;
    to_dict(py, &result.summary)
}

#[pymodule]
#[pyo3(name = "comimp")]
fn comimp_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ComimpError", m.py().get_type::<ComimpError>())?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyImputation>()?;
    m.add_class::<PyPca>()?;
    m.add_function(wrap_pyfunction!(impute, m)?)?;
    m.add_function(wrap_pyfunction!(merge, m)?)?;
    m.add_function(wrap_pyfunction!(pca_merge, m)?)?;
    m.add_function(wrap_pyfunction!(check_theorem, m)?)?;
    m.add_function(wrap_pyfunction!(regression_study, m)?)?;
    Ok(())
}
