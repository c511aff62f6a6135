//! Python module `crowdimpute`.
//!
//! Datasets, imputation sets and reports are wrapped as classes; everything
//! else (questionnaires, judgments, summaries) crosses the boundary as plain
//! dicts and lists.

use std::path::PathBuf;

use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyList;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crowdimpute_core::crowd::{run_crowd, JudgmentSet, Persona, PersonaMix};
use crowdimpute_core::dataset::{self, ColumnSpec, GroundTruth, Value, DEFAULT_MISSING_TOKEN};
use crowdimpute_core::imputation::{ImputationSet, Provenance};
use crowdimpute_core::mice::{self, DEFAULT_CYCLES, DEFAULT_K_D};
use crowdimpute_core::pipeline::{self, RunConfig, DEFAULT_K, DEFAULT_M};
use crowdimpute_core::pooling::{self, EvaluationReport, ReportFormat};
use crowdimpute_core::questionnaire::{
    batch, build_intro, questions_for_column, IntroOptions, Questionnaire, Templates, DEFAULT_TOP_M,
};
use crowdimpute_core::rng::{split_rng, stage};
use crowdimpute_core::summary::summarize;
use crowdimpute_core::synth;

fn value_error(err: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(format!("{err}"))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_error)
}

/// A table with typed columns and missing cells.
#[pyclass(name = "Dataset", module = "crowdimpute", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyDataset {
    inner: dataset::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Reads a CSV file against a JSON schema file.
    #[staticmethod]
    #[pyo3(signature = (csv_path, schema_path, missing_token = DEFAULT_MISSING_TOKEN))]
    fn load(csv_path: PathBuf, schema_path: PathBuf, missing_token: &str) -> PyResult<Self> {
        let schema = dataset::load_schema(schema_path).map_err(value_error)?;
        let inner = dataset::load_csv(csv_path, &schema, missing_token).map_err(value_error)?;
        Ok(Self { inner })
    }

    /// Parses CSV text; `schema` is a list of column dicts.
    #[staticmethod]
    #[pyo3(signature = (text, schema, missing_token = DEFAULT_MISSING_TOKEN))]
    fn from_csv(text: &str, schema: &Bound<'_, PyAny>, missing_token: &str) -> PyResult<Self> {
        let schema: Vec<ColumnSpec> = from_py(schema)?;
        let inner = dataset::read_csv(text.as_bytes(), &schema, missing_token).map_err(value_error)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn n_cols(&self) -> usize {
        self.inner.n_cols()
    }

    #[getter]
    fn columns(&self) -> Vec<String> {
        self.inner.columns().iter().map(|c| c.name.clone()).collect()
    }

    #[getter]
    fn missing_count(&self) -> usize {
        self.inner.missing_count()
    }

    fn schema<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.schema())
    }

    /// Cell value as float or str, or None when missing.
    fn get<'py>(&self, py: Python<'py>, row: usize, column: &str) -> PyResult<Bound<'py, PyAny>> {
        let col = self.inner.column_index(column).map_err(value_error)?;
        if row >= self.inner.n_rows() {
            return Err(PyIndexError::new_err(format!("row {row} out of range")));
        }
        to_py(py, &self.inner.get(row, col))
    }

    /// (row, column) pairs of missing cells.
    fn missing_cells(&self) -> Vec<(usize, String)> {
        self.inner
            .missing_cells()
            .into_iter()
            .map(|(r, c)| (r, self.inner.column(c).name.clone()))
            .collect()
    }

    #[pyo3(signature = (missing_token = DEFAULT_MISSING_TOKEN))]
    fn to_csv(&self, missing_token: &str) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_csv(&mut buf, missing_token).map_err(value_error)?;
        String::from_utf8(buf).map_err(value_error)
    }

    /// Removes `n` observed cells of `column`; returns the amputed copy and
    /// the ground truth as a list of `{row, column, value}` dicts.
    fn ampute<'py>(&self, py: Python<'py>, column: &str, n: usize, seed: u64) -> PyResult<(Self, Bound<'py, PyAny>)> {
        let (d, gt) = dataset::ampute(&self.inner, column, n, seed).map_err(value_error)?;
        Ok((Self { inner: d }, to_py(py, &gt)?))
    }

    /// Descriptive statistics as a dict.
    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &summarize(&self.inner).map_err(value_error)?)
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(rows={}, columns={:?}, missing={})",
            self.inner.n_rows(),
            self.columns(),
            self.inner.missing_count()
        )
    }
}

/// `m` imputed values for each missing cell of a base dataset.
#[pyclass(name = "ImputationSet", module = "crowdimpute", frozen)]
pub struct PyImputationSet {
    inner: ImputationSet,
}

#[pymethods]
impl PyImputationSet {
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: ImputationSet::load(dir).map_err(value_error)? })
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        self.inner.save(dir).map_err(value_error)
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn provenance(&self) -> String {
        self.inner.provenance.to_string()
    }

    /// List of `{row, column, values}` dicts.
    fn cells<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.cells())
    }

    /// The `i`-th completed dataset.
    fn completed(&self, i: usize) -> PyResult<PyDataset> {
        if i >= self.inner.m {
            return Err(PyIndexError::new_err(format!("imputation {i} out of range (m = {})", self.inner.m)));
        }
        Ok(PyDataset { inner: self.inner.completed(i) })
    }

    /// Per-cell pooled summaries.
    fn pool<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &pooling::summarize_set(&self.inner).map_err(value_error)?)
    }

    fn __repr__(&self) -> String {
        format!(
            "ImputationSet(provenance={}, m={}, cells={})",
            self.inner.provenance,
            self.inner.m,
            self.inner.cells().len()
        )
    }
}

/// Crowd-versus-machine comparison against the ground truth.
#[pyclass(name = "Report", module = "crowdimpute", frozen)]
pub struct PyReport {
    inner: EvaluationReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn agreement_rate(&self) -> f64 {
        self.inner.agreement.rate
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    /// Renders as "txt", "md" or "json".
    #[pyo3(signature = (format = "txt"))]
    fn render(&self, format: &str) -> PyResult<String> {
        let f: ReportFormat = format.parse().map_err(value_error)?;
        Ok(self.inner.render(f))
    }

    fn __str__(&self) -> String {
        self.inner.render(ReportFormat::Txt)
    }
}

/// Synthetic lung-function style data with columns age, FEV, height, gender, smoke.
#[pyfunction]
#[pyo3(signature = (n = 654, seed = 1))]
fn synth_fev(n: usize, seed: u64) -> PyDataset {
    PyDataset { inner: synth::fev_like(n, seed) }
}

/// Multiple imputation by chained equations with predictive mean matching.
#[pyfunction]
#[pyo3(signature = (dataset, m = DEFAULT_M, cycles = DEFAULT_CYCLES, k_d = DEFAULT_K_D, seed = 1))]
fn multiple_impute(
    py: Python<'_>,
    dataset: &PyDataset,
    m: usize,
    cycles: usize,
    k_d: usize,
    seed: u64,
) -> PyResult<PyImputationSet> {
    let d = dataset.inner.clone();
    let inner = py.detach(|| mice::multiple_impute(&d, m, cycles, k_d, seed)).map_err(value_error)?;
    Ok(PyImputationSet { inner })
}

/// One PMM pass over a single column using its fully observed neighbours as
/// predictors. Returns `(row, value)` pairs.
#[pyfunction]
#[pyo3(signature = (dataset, column, k_d = DEFAULT_K_D, seed = 1))]
fn pmm_impute_column<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    column: &str,
    k_d: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let col = dataset.inner.column_index(column).map_err(value_error)?;
    let mut rng = split_rng(seed, stage::MICE, 0);
    let out = mice::pmm_impute_column(&dataset.inner, col, k_d, &mut rng).map_err(value_error)?;
    to_py(py, &out)
}

/// Pooled point estimate: the mean of the imputed values.
#[pyfunction]
fn pool_point(values: Vec<f64>) -> PyResult<f64> {
    pooling::pool_point(&values).map_err(value_error)
}

/// Summary of one cell's imputations. Numbers give mean, median and
/// quartiles; labels give vote counts in `categories` order.
#[pyfunction]
#[pyo3(signature = (values, categories = None))]
fn summarize_cell<'py>(
    py: Python<'py>,
    values: &Bound<'py, PyList>,
    categories: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let values: Vec<Value> = from_py(values.as_any())?;
    let summary = pooling::summarize_cell(&values, categories.as_deref()).map_err(value_error)?;
    to_py(py, &summary)
}

/// Questionnaires for the missing cells of `targets`, as dicts.
#[pyfunction]
#[pyo3(signature = (dataset, targets, k = DEFAULT_K, top_m = DEFAULT_TOP_M, prior_blurb = None))]
fn gen_survey<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    targets: Vec<String>,
    k: usize,
    top_m: usize,
    prior_blurb: Option<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let d = &dataset.inner;
    let stats = summarize(d).map_err(value_error)?;
    let opts = IntroOptions { top_m, prior_blurb, ..IntroOptions::default() };
    let templates = Templates::default();
    let mut all = Vec::new();
    for target in &targets {
        let intro = build_intro(d, &stats, target, &opts).map_err(value_error)?;
        let questions = questions_for_column(d, target, Some(&stats), &templates).map_err(value_error)?;
        all.extend(batch(questions, &intro, k, target).map_err(value_error)?);
    }
    to_py(py, &all)
}

/// Simulated judgments for questionnaires from [`gen_survey`]. `persona` is
/// a preset name: novice_unconstrained, novice_constrained, experienced or
/// ideal.
#[pyfunction]
#[pyo3(signature = (dataset, questionnaires, persona = "experienced", seed = 1))]
fn simulate_crowd<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    questionnaires: &Bound<'py, PyAny>,
    persona: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let qns: Vec<Questionnaire> = from_py(questionnaires)?;
    let persona = Persona::preset(persona).ok_or_else(|| value_error(format!("unknown persona '{persona}'")))?;
    let mix = PersonaMix::single(persona).map_err(value_error)?;
    let stats = summarize(&dataset.inner).map_err(value_error)?;
    let mut set = JudgmentSet::default();
    for qn in &qns {
        set.merge(run_crowd(qn, &mix, &stats, seed).map_err(value_error)?);
    }
    to_py(py, &set)
}

/// Imputation set built from the first `k` accepted judgments per question.
#[pyfunction]
fn crowd_imputations(
    dataset: &PyDataset,
    questionnaires: &Bound<'_, PyAny>,
    judgments: &Bound<'_, PyAny>,
    k: usize,
) -> PyResult<PyImputationSet> {
    let qns: Vec<Questionnaire> = from_py(questionnaires)?;
    let judgments: JudgmentSet = from_py(judgments)?;
    let inner = ImputationSet::from_judgments(&dataset.inner, &qns, &judgments, k).map_err(value_error)?;
    Ok(PyImputationSet { inner })
}

/// Scores two imputation sets against the ground truth from `Dataset.ampute`.
#[pyfunction]
fn compare(ground_truth: &Bound<'_, PyAny>, a: &PyImputationSet, b: &PyImputationSet) -> PyResult<PyReport> {
    let gt: GroundTruth = from_py(ground_truth)?;
    let inner = pooling::compare(&gt, &a.inner, &b.inner).map_err(value_error)?;
    Ok(PyReport { inner })
}

/// Runs every stage into `config["out_dir"]` and returns the report.
#[pyfunction]
fn run_pipeline(py: Python<'_>, config: &Bound<'_, PyAny>) -> PyResult<PyReport> {
    let cfg: RunConfig = from_py(config)?;
    let inner = py.detach(|| pipeline::run_pipeline(&cfg)).map_err(value_error)?;
    Ok(PyReport { inner })
}

/// Provenance names accepted by the file-based tools.
#[pyfunction]
fn provenances() -> Vec<String> {
    [Provenance::Crowd, Provenance::Machine].iter().map(ToString::to_string).collect()
}

#[pymodule]
pub fn crowdimpute(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyImputationSet>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(synth_fev, m)?)?;
    m.add_function(wrap_pyfunction!(multiple_impute, m)?)?;
    m.add_function(wrap_pyfunction!(pmm_impute_column, m)?)?;
    m.add_function(wrap_pyfunction!(pool_point, m)?)?;
    m.add_function(wrap_pyfunction!(summarize_cell, m)?)?;
    m.add_function(wrap_pyfunction!(gen_survey, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_crowd, m)?)?;
    m.add_function(wrap_pyfunction!(crowd_imputations, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(provenances, m)?)?;
    Ok(())
}
