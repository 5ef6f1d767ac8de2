//! Python bindings for the `jet` embedding toolkit.

use std::collections::HashSet;
use std::io::BufReader;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;

use jet::embeddings::{self, Format, PointKind};
use jet::trainer::TrainConfig;

fn to_py(err: jet::Error) -> PyErr {
    match err {
        jet::Error::Io(e) => PyIOError::new_err(e.to_string()),
        jet::Error::UnknownKey(k) => PyKeyError::new_err(k),
        e @ jet::Error::File { .. } => PyIOError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn parse_kinds(kinds: Option<Vec<String>>) -> PyResult<Vec<PointKind>> {
    match kinds {
        None => Ok(PointKind::ALL.to_vec()),
        Some(ks) => ks.iter().map(|k| k.parse().map_err(to_py)).collect(),
    }
}

/// Lowercase and split a string into tokens.
#[pyfunction]
fn normalize(text: &str) -> Vec<String> {
    jet::normalize(text)
}

/// Cosine similarity of two vectors.
#[pyfunction]
fn cosine(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    jet::cosine(&a, &b).map_err(to_py)
}

/// Spearman's rank correlation with average ranks for ties.
#[pyfunction]
fn spearman(gold: Vec<f64>, pred: Vec<f64>) -> PyResult<f64> {
    jet::eval::spearman(&gold, &pred).map_err(to_py)
}

/// Projection score of an averaged context vector against an entity vector.
#[pyfunction]
fn wsd_score(entity: Vec<f64>, context: Vec<f64>) -> PyResult<f64> {
    jet::eval::wsd_score(&entity, &context).map_err(to_py)
}

/// Term to entity mapping used for distant supervision.
#[pyclass(module = "jet_py", frozen)]
struct Terminology {
    inner: jet::Terminology,
}

#[pymethods]
impl Terminology {
    /// Build from (surface, entity-id) pairs.
    #[new]
    fn new(pairs: Vec<(String, String)>) -> PyResult<Self> {
        let pairs = pairs
            .into_iter()
            .map(|(s, e)| Ok((s, jet::EntityId::new(e).map_err(to_py)?)))
            .collect::<PyResult<Vec<_>>>()?;
        let inner = jet::Terminology::from_pairs("python", pairs).map_err(to_py)?;
        Ok(Terminology { inner })
    }

    /// Load a two-column TSV file; malformed lines are skipped.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let file = std::fs::File::open(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        let (inner, _) = jet::Terminology::load(&path.display().to_string(), BufReader::new(file))
            .map_err(|e| to_py(e.in_file(&path)))?;
        Ok(Terminology { inner })
    }

    #[getter]
    fn n_terms(&self) -> usize {
        self.inner.n_terms()
    }

    #[getter]
    fn n_entities(&self) -> usize {
        self.inner.n_entities()
    }

    /// Number of entities a surface string can denote.
    fn polysemy(&self, surface: &str) -> usize {
        self.inner.polysemy(&jet::normalize(surface))
    }

    /// Entity ids of a surface string.
    fn entities(&self, surface: &str) -> Vec<String> {
        match self.inner.term_index(&jet::normalize(surface)) {
            Some(t) => self
                .inner
                .entities_of(t)
                .iter()
                .map(|&e| self.inner.entity(e as usize).to_string())
                .collect(),
            None => Vec::new(),
        }
    }

    /// All occurrences in a text as (start, end, term) token spans.
    fn scan(&self, text: &str) -> PyResult<Vec<(u32, u32, String)>> {
        let automaton = jet::MatchAutomaton::build(&self.inner).map_err(to_py)?;
        let tokens = jet::normalize(text);
        Ok(automaton
            .scan(&tokens)
            .into_iter()
            .map(|o| (o.start, o.end, self.inner.term(o.term as usize).join(" ")))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!("Terminology(terms={}, entities={})", self.inner.n_terms(), self.inner.n_entities())
    }
}

/// Word, term and entity vectors in one namespace (`word:`, `term:`, `ent:`).
#[pyclass(module = "jet_py", frozen)]
struct EmbeddingSet {
    inner: jet::EmbeddingSet,
}

#[pymethods]
impl EmbeddingSet {
    /// Load a binary or text embeddings file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = jet::EmbeddingSet::load(&path).map_err(to_py)?;
        Ok(EmbeddingSet { inner })
    }

    /// Write to `path` in "binary" or "text" format.
    #[pyo3(signature = (path, format = "binary"))]
    fn save(&self, path: PathBuf, format: &str) -> PyResult<()> {
        let format: Format = format.parse().map_err(to_py)?;
        self.inner.save(&path, format).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Number of points of one kind ("word", "term" or "entity").
    fn count(&self, kind: &str) -> PyResult<usize> {
        let kind: PointKind = kind.parse().map_err(to_py)?;
        Ok(self.inner.len(kind))
    }

    /// Bare keys of one kind.
    fn keys(&self, kind: &str) -> PyResult<Vec<String>> {
        let kind: PointKind = kind.parse().map_err(to_py)?;
        Ok(self.inner.keys(kind).map(str::to_owned).collect())
    }

    /// Vector of a namespaced key such as "ent:C0009443".
    fn vector(&self, key: &str) -> PyResult<Vec<f64>> {
        self.inner.lookup(key).map_err(to_py)
    }

    fn __contains__(&self, key: &str) -> bool {
        self.inner.lookup(key).is_ok()
    }

    /// Mean of the word vectors of a string's known tokens.
    fn string_vector(&self, text: &str) -> PyResult<Vec<f64>> {
        self.inner.string_vector(text).map_err(to_py)
    }

    /// Cosine similarity of two namespaced keys.
    fn similarity(&self, a: &str, b: &str) -> PyResult<f64> {
        let (x, y) = (self.vector(a)?, self.vector(b)?);
        jet::cosine(&x, &y).map_err(to_py)
    }

    /// Nearest neighbors of a namespaced key (excluding itself), as
    /// (namespaced key, cosine) pairs.
    #[pyo3(signature = (key, topk = 10, kinds = None))]
    fn nearest(&self, key: &str, topk: usize, kinds: Option<Vec<String>>) -> PyResult<Vec<(String, f64)>> {
        let query = self.vector(key)?;
        let (kind, bare) = embeddings::parse_key(key).map_err(to_py)?;
        let exclude: HashSet<String> = [format!("{}:{bare}", kind.prefix())].into();
        self.nearest_impl(&query, topk, kinds, &exclude)
    }

    /// Nearest neighbors of an arbitrary vector.
    #[pyo3(signature = (vector, topk = 10, kinds = None))]
    fn nearest_to_vector(&self, vector: Vec<f64>, topk: usize, kinds: Option<Vec<String>>) -> PyResult<Vec<(String, f64)>> {
        self.nearest_impl(&vector, topk, kinds, &HashSet::new())
    }

    fn __repr__(&self) -> String {
        format!(
            "EmbeddingSet(dim={}, words={}, terms={}, entities={})",
            self.inner.dim(),
            self.inner.len(PointKind::Word),
            self.inner.len(PointKind::Term),
            self.inner.len(PointKind::Entity)
        )
    }
}

impl EmbeddingSet {
    fn nearest_impl(
        &self,
        query: &[f64],
        topk: usize,
        kinds: Option<Vec<String>>,
        exclude: &HashSet<String>,
    ) -> PyResult<Vec<(String, f64)>> {
        let kinds = parse_kinds(kinds)?;
        let found = self.inner.nearest(query, &kinds, topk, exclude).map_err(to_py)?;
        Ok(found.into_iter().map(|n| (n.namespaced(), n.cosine)).collect())
    }
}

/// Train joint embeddings on in-memory documents.
#[pyfunction]
#[pyo3(signature = (
    documents,
    terminology,
    *,
    dim = 100,
    window = 2,
    negatives = 5,
    lr = 0.05,
    epochs = 10,
    min_count = 10,
    subsample = 1e-5,
    seed = 1,
    workers = 1,
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    documents: Vec<String>,
    terminology: &Terminology,
    dim: usize,
    window: usize,
    negatives: usize,
    lr: f64,
    epochs: usize,
    min_count: u64,
    subsample: f64,
    seed: u64,
    workers: usize,
) -> PyResult<EmbeddingSet> {
    let cfg = TrainConfig {
        window,
        negatives,
        lr0: lr,
        epochs,
        min_count,
        subsample_coeff: subsample,
        dim,
        seed,
        workers,
    };
    let terms = &terminology.inner;
    let inner = py
        .detach(|| {
            let corpus = jet::Corpus::from_documents(&documents);
            let model = jet::train(&corpus, terms, &cfg)?;
            jet::EmbeddingSet::from_model(&model.vocab, &model.params)
        })
        .map_err(to_py)?;
    Ok(EmbeddingSet { inner })
}

#[pymodule]
fn jet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Terminology>()?;
    m.add_class::<EmbeddingSet>()?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(wsd_score, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
