//! Python bindings: load models and embeddings once, score posts, and run
//! the batch pipeline steps from Python.

use std::path::PathBuf;

use clickbait_cli::{FeaturizeOptions, SplitOptions};
use clickbait_core::app::{self, ModelBundle, ModelType, ScoreRequest};
use clickbait_core::corpus::{DEFAULT_SPLIT_SEED, DEFAULT_TRAIN_FRACTION};
use clickbait_core::embed::{self, EmbeddingTable};
use clickbait_core::eval::{self, Scored};
use clickbait_core::models::mlp::build_mlp;
use clickbait_core::nlp::{tokenize, NlpResources};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyString};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn anyhow_err(e: anyhow::Error) -> PyErr {
    PyValueError::new_err(format!("{e:#}"))
}

fn from_json<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn to_json(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.cast::<PyString>() {
        return Ok(s.to_str()?.to_owned());
    }
    obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()
}

fn kind(s: &str) -> PyResult<ModelType> {
    s.parse().map_err(err)
}

/// A trained model with its feature schema and preprocessor.
#[pyclass(frozen, module = "clickbait")]
struct Model {
    bundle: ModelBundle,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Model { bundle: app::load_model(path).map_err(err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        app::save_model(&self.bundle, path).map_err(err)
    }

    #[getter]
    fn model_type(&self) -> &'static str {
        self.bundle.model_type().as_str()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.bundle.schema.names.clone()
    }

    #[getter]
    fn metadata<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        from_json(py, &serde_json::to_string(&self.bundle.metadata).map_err(err)?)
    }

    /// Probability of clickbait for one raw feature vector.
    fn predict(&self, features: Vec<f64>) -> PyResult<f64> {
        self.bundle.predict_raw(&features).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.bundle.to_json().map_err(err)
    }
}

/// Word vectors in GloVe text format.
#[pyclass(frozen, module = "clickbait")]
struct Embeddings {
    table: EmbeddingTable,
}

#[pymethods]
impl Embeddings {
    #[new]
    #[pyo3(signature = (path, dim = 50))]
    fn new(path: PathBuf, dim: usize) -> PyResult<Self> {
        Ok(Embeddings { table: embed::load_embeddings(path, dim).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.table.dimension()
    }

    fn __len__(&self) -> usize {
        self.table.len()
    }

    /// Word mover's distance between two texts; None if either side has no
    /// known words.
    fn wmd(&self, a: &str, b: &str) -> Option<f64> {
        let (a, b) = (embed::nbow(&tokenize(a), &self.table), embed::nbow(&tokenize(b), &self.table));
        embed::wmd(&a, &b, &self.table)
    }

    fn cosine(&self, a: &str, b: &str) -> PyResult<f64> {
        let u = embed::sentence_vector(&tokenize(a), &self.table);
        let v = embed::sentence_vector(&tokenize(b), &self.table);
        embed::cosine(&u, &v).map_err(err)
    }
}

/// Resident model and embeddings, as used by the HTTP service.
#[pyclass(frozen, module = "clickbait")]
struct Scorer {
    inner: app::Scorer,
}

#[pymethods]
impl Scorer {
    #[new]
    fn new(model: PathBuf, embeddings: PathBuf) -> PyResult<Self> {
        Ok(Scorer { inner: clickbait_cli::load_scorer(&model, &embeddings).map_err(anyhow_err)? })
    }

    #[getter]
    fn model_type(&self) -> &'static str {
        self.inner.bundle.model_type().as_str()
    }

    #[getter]
    fn embedding_dim(&self) -> usize {
        self.inner.table.dimension()
    }

    /// Scores a request given as a dict or a JSON string with the same
    /// camelCase fields as the HTTP API. Returns the response as a dict.
    fn score<'py>(&self, py: Python<'py>, request: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
        let req: ScoreRequest = serde_json::from_str(&to_json(request)?).map_err(err)?;
        let resp = py.detach(|| self.inner.score(&req)).map_err(err)?;
        from_json(py, &serde_json::to_string(&resp).map_err(err)?)
    }
}

/// Joins instances and truth JSONL into a corpus CSV; returns counts.
#[pyfunction]
#[pyo3(signature = (instances, truth, out, lenient = false))]
fn ingest<'py>(py: Python<'py>, instances: PathBuf, truth: PathBuf, out: PathBuf, lenient: bool) -> PyResult<Bound<'py, PyDict>> {
    let s = py
        .detach(|| clickbait_cli::ingest(&instances, &truth, &out, lenient))
        .map_err(anyhow_err)?;
    let d = PyDict::new(py);
    d.set_item("merged", s.merged)?;
    d.set_item("clickbait", s.clickbait)?;
    d.set_item("valid_text", s.valid_text)?;
    d.set_item("unmatched_instances", s.report.unmatched_instances)?;
    d.set_item("unmatched_truths", s.report.unmatched_truths)?;
    d.set_item("skipped_lines", s.skipped_lines)?;
    Ok(d)
}

/// Writes the feature CSV (and its schema JSON); returns (rows, features).
#[pyfunction]
#[pyo3(signature = (corpus, embeddings, out, dim = 50, sample = None, sample_seed = 1))]
fn featurize(
    py: Python<'_>,
    corpus: PathBuf,
    embeddings: PathBuf,
    out: PathBuf,
    dim: usize,
    sample: Option<usize>,
    sample_seed: u64,
) -> PyResult<(usize, usize)> {
    let opts = FeaturizeOptions { dim, sample, sample_seed, valid_only: false };
    let m = py
        .detach(|| clickbait_cli::featurize(&corpus, &embeddings, &out, &opts))
        .map_err(anyhow_err)?;
    Ok((m.len(), m.schema.len()))
}

#[pyfunction]
#[pyo3(signature = (features, model_type, out, seed = 1, split_seed = DEFAULT_SPLIT_SEED, train_fraction = DEFAULT_TRAIN_FRACTION))]
fn train(
    py: Python<'_>,
    features: PathBuf,
    model_type: &str,
    out: PathBuf,
    seed: u64,
    split_seed: u64,
    train_fraction: f64,
) -> PyResult<()> {
    let k = kind(model_type)?;
    let split = SplitOptions { seed: split_seed, train_fraction };
    py.detach(|| clickbait_cli::train(&features, k, seed, split, &out))
        .map_err(anyhow_err)
}

/// Metrics on the held-out split, as a dict.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, model: PathBuf, features: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let r = py
        .detach(|| clickbait_cli::evaluate(&model, &features))
        .map_err(anyhow_err)?;
    from_json(py, &r.to_json().map_err(err)?)
}

/// Rank-based area under the ROC curve.
#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    if scores.len() != labels.len() {
        return Err(PyValueError::new_err("scores and labels differ in length"));
    }
    let s: Vec<Scored> = scores.iter().zip(&labels).map(|(&p, &y)| Scored::new(p, y)).collect();
    eval::auc(&s).map_err(err)
}

/// (total, trainable, non-trainable) parameter counts of the MLP for a
/// given input width.
#[pyfunction]
fn mlp_param_counts(input_dim: usize) -> PyResult<(usize, usize, usize)> {
    let c = build_mlp(input_dim, 0).map_err(err)?.param_counts();
    Ok((c.total, c.trainable, c.non_trainable))
}

/// Feature names for an embedding width, in model input order.
#[pyfunction]
#[pyo3(signature = (dim = 50))]
fn feature_names(dim: usize) -> Vec<String> {
    let nlp = NlpResources::bundled();
    clickbait_core::features::FeatureSchema::new(dim, nlp.tagger.tagset()).names
}

#[pymodule]
fn clickbait(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Embeddings>()?;
    m.add_class::<Scorer>()?;
    m.add_function(wrap_pyfunction!(ingest, m)?)?;
    m.add_function(wrap_pyfunction!(featurize, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(mlp_param_counts, m)?)?;
    m.add_function(wrap_pyfunction!(feature_names, m)?)?;
    Ok(())
}
