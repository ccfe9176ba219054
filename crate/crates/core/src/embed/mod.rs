//! Pretrained word vectors, sentence vectors, similarity measures and word
//! mover's distance.

pub mod transport;

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nlp::TokenSeq;

pub const DEFAULT_DIMENSION: usize = 50;

/// Token -> vector map. Vectors are stored as `f32` in one flat buffer;
/// every computation on them is done in `f64`.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    index: HashMap<String, usize>,
    words: Vec<String>,
    data: Vec<f32>,
    duplicates: usize,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        EmbeddingTable {
            dimension,
            index: HashMap::new(),
            words: Vec::new(),
            data: Vec::new(),
            duplicates: 0,
        }
    }

    /// Inserts or replaces a vector. Replacements are counted in
    /// [`duplicates`](Self::duplicates).
    pub fn insert(&mut self, word: &str, vector: &[f32]) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: vector.len(),
            });
        }
        match self.index.get(word) {
            Some(&id) => {
                self.data[id * self.dimension..(id + 1) * self.dimension].copy_from_slice(vector);
                self.duplicates += 1;
            }
            None => {
                self.index.insert(word.to_string(), self.words.len());
                self.words.push(word.to_string());
                self.data.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn vector(&self, word: &str) -> Option<&[f32]> {
        self.id(word).map(|id| self.vector_by_id(id))
    }

    pub fn vector_by_id(&self, id: usize) -> &[f32] {
        &self.data[id * self.dimension..(id + 1) * self.dimension]
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.vector_by_id(a)
            .iter()
            .zip(self.vector_by_id(b))
            .map(|(&x, &y)| {
                let d = x as f64 - y as f64;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Reads the GloVe text format: a token followed by `dimension`
/// whitespace-separated numbers per line. Later duplicates replace earlier
/// entries.
pub fn load_embeddings(path: impl AsRef<Path>, dimension: usize) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let table = read_embeddings(file, path, dimension)?;
    if table.duplicates() > 0 {
        log::warn!(
            "{}: {} duplicate tokens, last occurrence kept",
            path.display(),
            table.duplicates()
        );
    }
    Ok(table)
}

pub fn read_embeddings<R: Read>(reader: R, origin: &Path, dimension: usize) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new(dimension);
    let mut buf = Vec::with_capacity(dimension);
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else {
            continue;
        };
        let bad = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: lineno,
            message,
        };
        buf.clear();
        for p in parts {
            buf.push(p.parse::<f32>().map_err(|e| bad(format!("{p:?}: {e}")))?);
        }
        if buf.len() != dimension {
            return Err(bad(format!(
                "expected {dimension} components, found {}",
                buf.len()
            )));
        }
        table.insert(word, &buf)?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceVector(pub Vec<f64>);

impl SentenceVector {
    pub fn zeros(dim: usize) -> Self {
        SentenceVector(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

fn median_in_place(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Per-dimension median over the vectors of in-vocabulary tokens (repeats
/// included); the zero vector when no token is known.
pub fn sentence_vector(tokens: &TokenSeq, table: &EmbeddingTable) -> SentenceVector {
    let ids: Vec<usize> = tokens.texts().filter_map(|t| table.id(t)).collect();
    let dim = table.dimension();
    if ids.is_empty() {
        return SentenceVector::zeros(dim);
    }
    let mut column = vec![0.0; ids.len()];
    let values = (0..dim)
        .map(|d| {
            for (slot, &id) in column.iter_mut().zip(&ids) {
                *slot = table.vector_by_id(id)[d] as f64;
            }
            median_in_place(&mut column)
        })
        .collect();
    SentenceVector(values)
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(u: &SentenceVector, v: &SentenceVector) -> Result<f64> {
    if u.0.len() != v.0.len() {
        return Err(Error::DimensionMismatch {
            expected: u.0.len(),
            actual: v.0.len(),
        });
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum();
    Ok(dot / (nu * nv))
}

/// Jaccard coefficient of the two token sets; 0 when both are empty.
pub fn jaccard(a: &TokenSeq, b: &TokenSeq) -> f64 {
    let sa: HashSet<&str> = a.texts().collect();
    let sb: HashSet<&str> = b.texts().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 0.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

/// Normalized bag of words over in-vocabulary tokens, in first-seen order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NbowDoc {
    ids: Vec<usize>,
    weights: Vec<f64>,
}

impl NbowDoc {
    /// Builds a document directly from table ids and positive masses, which
    /// are normalized to sum to 1.
    pub fn from_weights(ids: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if ids.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: ids.len(),
                actual: weights.len(),
            });
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid("nBOW weights must be positive and finite"));
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(NbowDoc { ids, weights })
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tokens<'a>(&self, table: &'a EmbeddingTable) -> Vec<&'a str> {
        self.ids.iter().map(|&id| table.word(id)).collect()
    }
}

pub fn nbow(tokens: &TokenSeq, table: &EmbeddingTable) -> NbowDoc {
    let mut ids = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    let mut pos: HashMap<usize, usize> = HashMap::new();
    for id in tokens.texts().filter_map(|t| table.id(t)) {
        match pos.get(&id) {
            Some(&k) => counts[k] += 1.0,
            None => {
                pos.insert(id, ids.len());
                ids.push(id);
                counts.push(1.0);
            }
        }
    }
    let total: f64 = counts.iter().sum();
    NbowDoc {
        ids,
        weights: counts.into_iter().map(|c| c / total).collect(),
    }
}

/// Row-major Euclidean ground-cost matrix between the documents' tokens.
pub fn cost_matrix(a: &NbowDoc, b: &NbowDoc, table: &EmbeddingTable) -> Vec<f64> {
    let mut cost = Vec::with_capacity(a.len() * b.len());
    for &i in &a.ids {
        for &j in &b.ids {
            cost.push(table.distance(i, j));
        }
    }
    cost
}

fn relaxed_bound(a: &NbowDoc, b: &NbowDoc, cost: &[f64]) -> f64 {
    let n = b.len();
    let rows: f64 = a
        .weights
        .iter()
        .enumerate()
        .map(|(i, w)| w * cost[i * n..(i + 1) * n].iter().copied().fold(f64::INFINITY, f64::min))
        .sum();
    let cols: f64 = b
        .weights
        .iter()
        .enumerate()
        .map(|(j, w)| {
            w * (0..a.len())
                .map(|i| cost[i * n + j])
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    rows.max(cols)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WmdOptions {
    /// Use the relaxed lower bound to skip pivoting when the starting
    /// transport plan already meets it.
    pub prefilter: bool,
}

impl Default for WmdOptions {
    fn default() -> Self {
        WmdOptions { prefilter: true }
    }
}

/// Word mover's distance; `None` when either document is empty.
pub fn wmd(a: &NbowDoc, b: &NbowDoc, table: &EmbeddingTable) -> Option<f64> {
    wmd_with(a, b, table, WmdOptions::default())
}

pub fn wmd_with(a: &NbowDoc, b: &NbowDoc, table: &EmbeddingTable, opts: WmdOptions) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let cost = cost_matrix(a, b, table);
    let lower_bound = opts.prefilter.then(|| relaxed_bound(a, b, &cost));
    let sol = transport::solve_with(
        &a.weights,
        &b.weights,
        &cost,
        transport::SolveOptions { lower_bound },
    )
    .expect("nBOW documents form a balanced transport problem");
    Some(sol.cost.max(0.0))
}

/// Relaxed WMD: each side moves its mass to the nearest token of the other
/// document; the larger of the two relaxations. Never exceeds [`wmd`].
pub fn wmd_lower_bound(a: &NbowDoc, b: &NbowDoc, table: &EmbeddingTable) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    Some(relaxed_bound(a, b, &cost_matrix(a, b, table)))
}
