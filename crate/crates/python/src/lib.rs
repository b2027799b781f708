//! Python bindings. Matrices are passed as lists of rows.

use std::path::PathBuf;
use std::sync::Arc;

use ndarray::Array2;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use uqbench::bench::{emit_report, BenchmarkConfig, ReportFormat, RunOptions};
use uqbench::models::{fit_model, KnnAnomalyModel, ModelKind, ModelSettings, Predictor};
use uqbench::scores::{self, ConformalState};
use uqbench::tasks::{self, PerfDropMode, ScoredSet, TaskInput};

fn err(e: uqbench::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

pub fn to_matrix(rows: &[Vec<f64>]) -> PyResult<Array2<f64>> {
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Array2::from_shape_vec((rows.len(), width), rows.concat()).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn proba_rows(p: &Array2<f64>) -> Vec<[f64; 2]> {
    p.rows().into_iter().map(|r| [r[0], r[1]]).collect()
}

/// AUROC with mid-rank ties; `None` when one class is absent.
#[pyfunction]
pub fn auroc(scores: Vec<f64>, labels: Vec<u8>) -> Option<f64> {
    uqbench::metrics::auroc(&scores, &labels)
}

#[pyfunction]
pub fn f1_score(predictions: Vec<u8>, labels: Vec<u8>) -> f64 {
    uqbench::metrics::f1_score(&predictions, &labels)
}

/// Two-sample KS test, returns `(statistic, p_value)`.
#[pyfunction]
pub fn ks_two_sample(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = uqbench::metrics::ks_two_sample(&a, &b).map_err(err)?;
    Ok((r.statistic, r.p_value))
}

/// `(total, aleatoric, epistemic)` for one input's member distributions.
#[pyfunction]
pub fn decompose(members: Vec<[f64; 2]>) -> PyResult<(f64, f64, f64)> {
    if members.is_empty() {
        return Err(PyValueError::new_err("need at least one member"));
    }
    let t = scores::decompose(&members);
    Ok((t.total, t.aleatoric, t.epistemic))
}

#[pyfunction]
pub fn max_confidence(proba: Vec<[f64; 2]>) -> Vec<f64> {
    proba.iter().map(|p| 1.0 - p[0].max(p[1])).collect()
}

#[pyclass(name = "Model", frozen)]
pub struct PyModel {
    inner: Arc<dyn Predictor>,
}

#[pymethods]
impl PyModel {
    /// Fits `logistic`, `mlp` or `deep_ensemble`.
    #[staticmethod]
    #[pyo3(signature = (kind, x, y, seed = 0, ensemble_size = 10))]
    pub fn fit(py: Python<'_>, kind: &str, x: Vec<Vec<f64>>, y: Vec<u8>, seed: u64, ensemble_size: usize) -> PyResult<Self> {
        let kind: ModelKind = kind.parse().map_err(err)?;
        let x = to_matrix(&x)?;
        let settings = ModelSettings { ensemble_size, ..ModelSettings::default() };
        let inner = py.detach(|| fit_model(kind, x.view(), &y, seed, &settings)).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    pub fn name(&self) -> String {
        self.inner.name().to_string()
    }

    pub fn predict_proba(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<[f64; 2]>> {
        Ok(proba_rows(&self.inner.predict_proba(to_matrix(&x)?.view())))
    }

    pub fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<u8>> {
        Ok(self.inner.predict(to_matrix(&x)?.view()))
    }

    /// Per-row `(total, aleatoric, epistemic)`; ensembles only.
    pub fn decompose(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<(f64, f64, f64)>> {
        let triples = scores::ensemble_decomposition(self.inner.as_ref(), to_matrix(&x)?.view()).map_err(err)?;
        Ok(triples.into_iter().map(|t| (t.total, t.aleatoric, t.epistemic)).collect())
    }
}

#[pyclass(name = "IsotonicCalibrator", frozen)]
pub struct PyIsotonic {
    inner: scores::IsotonicCalibrator,
}

#[pymethods]
impl PyIsotonic {
    #[new]
    pub fn new(raw: Vec<f64>, labels: Vec<u8>) -> PyResult<Self> {
        Ok(Self { inner: scores::IsotonicCalibrator::fit_binary(&raw, &labels).map_err(err)? })
    }

    pub fn predict(&self, p: Vec<f64>) -> Vec<f64> {
        p.iter().map(|&v| self.inner.predict(v)).collect()
    }

    #[getter]
    pub fn knots(&self) -> Vec<f64> {
        self.inner.knots().to_vec()
    }

    #[getter]
    pub fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }
}

#[pyclass(name = "Conformal", frozen)]
pub struct PyConformal {
    inner: ConformalState,
}

#[pymethods]
impl PyConformal {
    /// Label-conditional calibration from calibration probabilities and labels.
    #[new]
    pub fn new(cal_proba: Vec<[f64; 2]>, labels: Vec<u8>) -> PyResult<Self> {
        let rows: Vec<Vec<f64>> = cal_proba.iter().map(|p| p.to_vec()).collect();
        Ok(Self { inner: ConformalState::fit(&to_matrix(&rows)?, &labels).map_err(err)? })
    }

    pub fn p_values(&self, proba: Vec<[f64; 2]>) -> PyResult<Vec<(Option<f64>, Option<f64>)>> {
        let rows: Vec<Vec<f64>> = proba.iter().map(|p| p.to_vec()).collect();
        Ok(self.inner.p_values(&to_matrix(&rows)?).into_iter().map(|[a, b]| (a, b)).collect())
    }

    /// `(u_pvalue, u_credibility, u_confidence)` lists for test probabilities.
    pub fn scores(&self, proba: Vec<[f64; 2]>) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let mut out = (Vec::new(), Vec::new(), Vec::new());
        for (p, row) in self.p_values(proba.clone())?.into_iter().zip(&proba) {
            let predicted = usize::from(row[1] > row[0]);
            let s = scores::conformal_scores([p.0, p.1], predicted).map_err(err)?;
            out.0.push(s.u_pvalue);
            out.1.push(s.u_credibility);
            out.2.push(s.u_confidence);
        }
        Ok(out)
    }
}

#[pyclass(name = "KnnModel", frozen)]
pub struct PyKnn {
    inner: KnnAnomalyModel,
}

#[pymethods]
impl PyKnn {
    #[new]
    #[pyo3(signature = (x, y, k = 10))]
    pub fn new(x: Vec<Vec<f64>>, y: Vec<u8>, k: usize) -> PyResult<Self> {
        Ok(Self { inner: KnnAnomalyModel::fit(to_matrix(&x)?.view(), &y, k).map_err(err)? })
    }

    pub fn score(&self, py: Python<'_>, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let x = to_matrix(&x)?;
        Ok(py.detach(|| self.inner.score(x.view())))
    }
}

fn scored(scores: Vec<f64>, predictions: Vec<u8>, labels: Vec<u8>) -> PyResult<ScoredSet> {
    ScoredSet::new(scores, predictions, labels).map_err(err)
}

/// Returns `(budgets, f1_values, area)`.
#[pyfunction]
#[pyo3(signature = (scores, predictions, labels, grid_size = 101))]
pub fn retention(
    scores: Vec<f64>,
    predictions: Vec<u8>,
    labels: Vec<u8>,
    grid_size: usize,
) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let c = tasks::retention(&scored(scores, predictions, labels)?, grid_size).map_err(err)?;
    Ok((c.budgets, c.f1, c.area))
}

#[pyfunction]
pub fn error_detection(scores: Vec<f64>, predictions: Vec<u8>, labels: Vec<u8>) -> PyResult<Option<f64>> {
    Ok(tasks::error_detection(&scored(scores, predictions, labels)?))
}

#[pyfunction]
pub fn ood_detection(in_scores: Vec<f64>, shifted_scores: Vec<f64>) -> PyResult<f64> {
    tasks::ood_detection(&in_scores, &shifted_scores).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (test_scores, shifted_scores, n_bootstrap = 100, alpha = 0.05, seed = 0))]
pub fn shift_detection(
    test_scores: Vec<f64>,
    shifted_scores: Vec<f64>,
    n_bootstrap: usize,
    alpha: f64,
    seed: u64,
) -> PyResult<f64> {
    tasks::shift_detection(&test_scores, &shifted_scores, n_bootstrap, alpha, seed).map_err(err)
}

/// Mean absolute error of the ATC error estimate on the shifted data.
/// `test` and `shifted` are `(scores, predictions, labels)` tuples.
#[pyfunction]
#[pyo3(signature = (test, shifted, n_bootstrap = 100, seed = 0, single_set = false))]
pub fn perf_drop(
    test: (Vec<f64>, Vec<u8>, Vec<u8>),
    shifted: (Vec<f64>, Vec<u8>, Vec<u8>),
    n_bootstrap: usize,
    seed: u64,
    single_set: bool,
) -> PyResult<f64> {
    let input = TaskInput {
        test: scored(test.0, test.1, test.2)?,
        shifted: scored(shifted.0, shifted.1, shifted.2)?,
        rng_seed: seed,
    };
    let mode = if single_set { PerfDropMode::SingleSet } else { PerfDropMode::Bootstrap };
    tasks::perf_drop_prediction(&input, n_bootstrap, mode).map_err(err)
}

/// Runs a TOML benchmark config and returns the report as JSON text. When
/// `output_dir` is given, markdown, CSV and JSON reports are written there.
#[pyfunction]
#[pyo3(signature = (config_path, output_dir = None, seeds = None))]
pub fn run_benchmark(
    py: Python<'_>,
    config_path: PathBuf,
    output_dir: Option<PathBuf>,
    seeds: Option<Vec<u64>>,
) -> PyResult<String> {
    let mut config = BenchmarkConfig::from_file(&config_path).map_err(err)?;
    if let Some(seeds) = seeds {
        config.seeds = seeds;
        config.validate().map_err(err)?;
    }
    let report = py.detach(|| uqbench::bench::run_benchmark(&config, &RunOptions::default())).map_err(err)?;
    if let Some(dir) = output_dir {
        emit_report(&report, &dir, &[ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::Json]).map_err(err)?;
    }
    report.to_json().map_err(err)
}

#[pymodule]
fn pyuqbench(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(auroc, m)?)?;
    m.add_function(wrap_pyfunction!(f1_score, m)?)?;
    m.add_function(wrap_pyfunction!(ks_two_sample, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(max_confidence, m)?)?;
    m.add_function(wrap_pyfunction!(retention, m)?)?;
    m.add_function(wrap_pyfunction!(error_detection, m)?)?;
    m.add_function(wrap_pyfunction!(ood_detection, m)?)?;
    m.add_function(wrap_pyfunction!(shift_detection, m)?)?;
    m.add_function(wrap_pyfunction!(perf_drop, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyIsotonic>()?;
    m.add_class::<PyConformal>()?;
    m.add_class::<PyKnn>()?;
    Ok(())
}
