//! Per-instance feature vectors and the preprocessing fitted on top of them.
//!
//! Feature order (373 values with a 50-d table and the Penn-36 tag set):
//!
//! 1. sentence-vector components for postText, targetCaptions,
//!    targetDescription, targetKeywords, targetParagraphs, targetTitle
//! 2. word mover's distance for the nine text pairs in [`TEXT_PAIRS`]
//! 3. polarity of post, captions, description, paragraphs, title, then
//!    subjectivity of captions, description, paragraphs, title
//! 4. cosine similarity for the same nine pairs
//! 5. Jaccard post/title and post/description
//! 6. counts: captions, paragraphs, post stop words, post unique
//!    punctuation, post images
//! 7. post flags: digits, wh-word, alluring phrase
//! 8. POS tag counts of the post

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Instance, LabeledInstance};
use crate::embed::{self, EmbeddingTable, NbowDoc, SentenceVector, WmdOptions};
use crate::error::{Error, Result};
use crate::nlp::{self, NlpResources, TokenSeq};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TextField {
    Post,
    Captions,
    Description,
    Keywords,
    Paragraphs,
    Title,
}

impl TextField {
    pub const ALL: [TextField; 6] = [
        TextField::Post,
        TextField::Captions,
        TextField::Description,
        TextField::Keywords,
        TextField::Paragraphs,
        TextField::Title,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TextField::Post => "postText",
            TextField::Captions => "targetCaptions",
            TextField::Description => "targetDescription",
            TextField::Keywords => "targetKeywords",
            TextField::Paragraphs => "targetParagraphs",
            TextField::Title => "targetTitle",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

use TextField::*;

/// Pairs compared by word mover's distance and by cosine similarity.
pub const TEXT_PAIRS: [(TextField, TextField); 9] = [
    (Post, Title),
    (Post, Description),
    (Post, Paragraphs),
    (Post, Keywords),
    (Post, Captions),
    (Title, Description),
    (Title, Paragraphs),
    (Title, Keywords),
    (Title, Captions),
];

const POLARITY_FIELDS: [TextField; 5] = [Post, Captions, Description, Paragraphs, Title];
const SUBJECTIVITY_FIELDS: [TextField; 4] = [Captions, Description, Paragraphs, Title];

/// Sentinel used for a pair that was empty in every fitted row.
pub const FALLBACK_WMD_SENTINEL: f64 = 1.0;

/// The text and count inputs of one post, already flattened.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TextFields {
    pub post: String,
    pub captions: String,
    pub description: String,
    pub keywords: String,
    pub paragraphs: String,
    pub title: String,
    pub caption_count: usize,
    pub paragraph_count: usize,
    pub image_count: usize,
}

impl TextFields {
    fn get(&self, f: TextField) -> &str {
        match f {
            Post => &self.post,
            Captions => &self.captions,
            Description => &self.description,
            Keywords => &self.keywords,
            Paragraphs => &self.paragraphs,
            Title => &self.title,
        }
    }
}

impl From<&Instance> for TextFields {
    fn from(i: &Instance) -> Self {
        TextFields {
            post: i.post(),
            captions: i.target_captions.join(" "),
            description: i.target_description.clone(),
            keywords: i.target_keywords.clone(),
            paragraphs: i.target_paragraphs.join(" "),
            title: i.target_title.clone(),
            caption_count: i.target_captions.len(),
            paragraph_count: i.target_paragraphs.len(),
            image_count: i.post_media.len(),
        }
    }
}

impl From<&LabeledInstance> for TextFields {
    fn from(i: &LabeledInstance) -> Self {
        TextFields::from(&i.instance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeatureSchema {
    pub version: String,
    pub names: Vec<String>,
    /// Value used for a WMD feature when one side of the pair has no
    /// in-vocabulary tokens.
    pub sentinel_values: BTreeMap<String, f64>,
    pub embedding_dim: usize,
    pub tagset: Vec<String>,
}

impl FeatureSchema {
    pub fn new(embedding_dim: usize, tagset: &[String]) -> Self {
        let mut names = Vec::new();
        for f in TextField::ALL {
            for d in 0..embedding_dim {
                names.push(format!("glove_{}_{d}", f.name()));
            }
        }
        for (a, b) in TEXT_PAIRS {
            names.push(format!("wmd_{}_{}", a.name(), b.name()));
        }
        for f in POLARITY_FIELDS {
            names.push(format!("polarity_{}", f.name()));
        }
        for f in SUBJECTIVITY_FIELDS {
            names.push(format!("subjectivity_{}", f.name()));
        }
        for (a, b) in TEXT_PAIRS {
            names.push(format!("cosine_{}_{}", a.name(), b.name()));
        }
        names.extend(
            [
                "jaccard_postText_targetTitle",
                "jaccard_postText_targetDescription",
                "count_targetCaptions",
                "count_targetParagraphs",
                "count_postStopwords",
                "count_postUniquePunctuation",
                "count_postMedia",
                "flag_postHasDigits",
                "flag_postHasWhWord",
                "flag_postHasAlluringPhrase",
            ]
            .map(String::from),
        );
        for t in tagset {
            names.push(format!("pos_{t}"));
        }

        let version = schema_version(&names);
        let sentinel_values = TEXT_PAIRS
            .iter()
            .map(|(a, b)| (wmd_name(*a, *b), FALLBACK_WMD_SENTINEL))
            .collect();
        FeatureSchema {
            version,
            names,
            sentinel_values,
            embedding_dim,
            tagset: tagset.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn wmd_offset(&self) -> usize {
        6 * self.embedding_dim
    }

    /// Sets each pair's sentinel to the largest WMD observed for that pair
    /// in `rows`. Pairs never observed take the largest value over all
    /// pairs, or [`FALLBACK_WMD_SENTINEL`] when nothing was observed.
    pub fn fit_sentinels(&mut self, rows: &[RawFeatures]) {
        let mut maxima = [f64::NEG_INFINITY; 9];
        for r in rows {
            for (k, m) in maxima.iter_mut().enumerate() {
                if let Some(w) = r.wmd[k] {
                    *m = m.max(w);
                }
            }
        }
        let overall = maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let overall = if overall.is_finite() {
            overall
        } else {
            FALLBACK_WMD_SENTINEL
        };
        for (k, (a, b)) in TEXT_PAIRS.iter().enumerate() {
            let v = if maxima[k].is_finite() { maxima[k] } else { overall };
            self.sentinel_values.insert(wmd_name(*a, *b), v);
        }
    }

    fn sentinel(&self, k: usize) -> f64 {
        let (a, b) = TEXT_PAIRS[k];
        self.sentinel_values
            .get(&wmd_name(a, b))
            .copied()
            .unwrap_or(FALLBACK_WMD_SENTINEL)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let schema: FeatureSchema = serde_json::from_str(s)?;
        if schema_version(&schema.names) != schema.version {
            return Err(Error::SchemaMismatch {
                expected: schema.version.clone(),
                actual: schema_version(&schema.names),
            });
        }
        Ok(schema)
    }
}

fn wmd_name(a: TextField, b: TextField) -> String {
    format!("wmd_{}_{}", a.name(), b.name())
}

fn schema_version(names: &[String]) -> String {
    let mut h = Sha256::new();
    for n in names {
        h.update(n.as_bytes());
        h.update([0u8]);
    }
    let digest = h.finalize();
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!("text-v1-{}-{hex}", names.len())
}

/// Feature values before WMD sentinels are applied.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    /// Full-length vector; WMD slots with no value hold NaN.
    pub values: Vec<f64>,
    pub wmd: [Option<f64>; 9],
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub schema_version: Arc<str>,
    pub values: Vec<f64>,
}

/// Borrowing view over the resources needed to featurize text.
#[derive(Clone, Copy)]
pub struct Featurizer<'a> {
    pub table: &'a EmbeddingTable,
    pub nlp: &'a NlpResources,
    pub wmd: WmdOptions,
}

impl<'a> Featurizer<'a> {
    pub fn new(table: &'a EmbeddingTable, nlp: &'a NlpResources) -> Self {
        Featurizer {
            table,
            nlp,
            wmd: WmdOptions::default(),
        }
    }

    /// A schema matching this featurizer's table dimension and tag set.
    pub fn schema(&self) -> FeatureSchema {
        FeatureSchema::new(self.table.dimension(), self.nlp.tagger.tagset())
    }

    pub fn raw(&self, input: &TextFields) -> RawFeatures {
        let dim = self.table.dimension();
        let tokens: Vec<TokenSeq> = TextField::ALL
            .iter()
            .map(|f| nlp::tokenize(input.get(*f)))
            .collect();
        let tok = |f: TextField| &tokens[f.slot()];
        let sentence: Vec<SentenceVector> = tokens
            .iter()
            .map(|t| embed::sentence_vector(t, self.table))
            .collect();
        let docs: Vec<NbowDoc> = tokens.iter().map(|t| embed::nbow(t, self.table)).collect();

        let mut values = Vec::with_capacity(6 * dim + 73);
        for sv in &sentence {
            values.extend_from_slice(sv.as_slice());
        }

        let mut wmd = [None; 9];
        for (k, (a, b)) in TEXT_PAIRS.iter().enumerate() {
            wmd[k] = embed::wmd_with(&docs[a.slot()], &docs[b.slot()], self.table, self.wmd);
            values.push(wmd[k].unwrap_or(f64::NAN));
        }

        let lex = &self.nlp.lexicon;
        for f in POLARITY_FIELDS {
            values.push(nlp::sentiment(tok(f), lex).polarity);
        }
        for f in SUBJECTIVITY_FIELDS {
            values.push(nlp::sentiment(tok(f), lex).subjectivity);
        }

        for (a, b) in TEXT_PAIRS {
            let c = embed::cosine(&sentence[a.slot()], &sentence[b.slot()])
                .expect("sentence vectors share the table dimension");
            values.push(c);
        }

        values.push(embed::jaccard(tok(Post), tok(Title)));
        values.push(embed::jaccard(tok(Post), tok(Description)));

        let surface = nlp::surface_features(&input.post, tok(Post), &self.nlp.stopwords);
        values.push(input.caption_count as f64);
        values.push(input.paragraph_count as f64);
        values.push(surface.stopword_count as f64);
        values.push(surface.unique_punctuation_count as f64);
        values.push(input.image_count as f64);
        values.push(surface.has_digits as f64);
        values.push(surface.has_wh_word as f64);
        values.push(surface.has_alluring_phrase as f64);

        let pos = self.nlp.tagger.pos_counts(tok(Post));
        values.extend(pos.counts.iter().map(|&c| c as f64));

        RawFeatures { values, wmd }
    }

    /// Raw features with sentinels from `schema` filled in.
    pub fn assemble(&self, input: &TextFields, schema: &FeatureSchema) -> Result<FeatureVector> {
        let raw = self.raw(input);
        finish(raw, schema)
    }
}

/// Fills WMD sentinels and checks the length against `schema`.
pub fn finish(mut raw: RawFeatures, schema: &FeatureSchema) -> Result<FeatureVector> {
    if raw.values.len() != schema.len() {
        return Err(Error::SchemaMismatch {
            expected: format!("{} ({} features)", schema.version, schema.len()),
            actual: format!("{} features", raw.values.len()),
        });
    }
    let off = schema.wmd_offset();
    for k in 0..9 {
        if raw.wmd[k].is_none() {
            raw.values[off + k] = schema.sentinel(k);
        }
    }
    Ok(FeatureVector {
        schema_version: Arc::from(schema.version.as_str()),
        values: raw.values,
    })
}

/// A featurized data set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub schema: FeatureSchema,
    pub ids: Vec<String>,
    pub labels: Vec<u8>,
    pub truth_means: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            schema: self.schema.clone(),
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            truth_means: idx.iter().map(|&i| self.truth_means[i]).collect(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// CSV with header `id,label,truthMean,<feature names>`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string(), "label".into(), "truthMean".into()];
        header.extend(self.schema.names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.rows.len() {
            let mut rec = vec![
                self.ids[i].clone(),
                self.labels[i].to_string(),
                self.truth_means[i].to_string(),
            ];
            rec.extend(self.rows[i].iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<feature csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, schema: FeatureSchema) -> Result<FeatureMatrix> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let names: Vec<&str> = header.iter().skip(3).collect();
        if names.len() != schema.names.len() || names.iter().zip(&schema.names).any(|(a, b)| a != b) {
            return Err(Error::SchemaMismatch {
                expected: schema.version.clone(),
                actual: format!("CSV header with {} feature columns", names.len()),
            });
        }
        let mut m = FeatureMatrix {
            schema,
            ids: Vec::new(),
            labels: Vec::new(),
            truth_means: Vec::new(),
            rows: Vec::new(),
        };
        for (idx, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |msg: String| Error::Parse {
                path: "<feature csv>".into(),
                line: idx + 2,
                message: msg,
            };
            m.ids.push(rec[0].to_string());
            m.labels.push(rec[1].parse().map_err(|e| bad(format!("label: {e}")))?);
            m.truth_means.push(rec[2].parse().map_err(|e| bad(format!("truthMean: {e}")))?);
            let row = rec
                .iter()
                .skip(3)
                .map(|v| v.parse::<f64>().map_err(|e| bad(format!("{v:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            m.rows.push(row);
        }
        Ok(m)
    }
}

/// Featurizes a labeled corpus in parallel, fitting WMD sentinels on it.
pub fn featurize_corpus(data: &[LabeledInstance], featurizer: &Featurizer<'_>) -> Result<FeatureMatrix> {
    let raw: Vec<RawFeatures> = data
        .par_iter()
        .map(|row| featurizer.raw(&TextFields::from(row)))
        .collect();
    let mut schema = featurizer.schema();
    schema.fit_sentinels(&raw);
    let rows = raw
        .into_iter()
        .map(|r| finish(r, &schema).map(|v| v.values))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMatrix {
        ids: data.iter().map(|r| r.id().to_string()).collect(),
        labels: data.iter().map(|r| r.label).collect(),
        truth_means: data.iter().map(|r| r.truth.truth_mean).collect(),
        rows,
        schema,
    })
}

pub const ZERO_FRACTION_LIMIT: f64 = 0.90;
pub const CORRELATION_LIMIT: f64 = 0.90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PreprocessMode {
    /// Drop mostly-zero and highly correlated features, then z-score.
    Linear,
    /// Keep every feature and z-score it (constant features get unit scale).
    Standardize,
    /// Pass-through.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Preprocessor {
    pub mode: PreprocessMode,
    pub schema_version: String,
    pub input_dim: usize,
    pub kept_indices: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

fn column_stats(rows: &[Vec<f64>], j: usize) -> (f64, f64) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
    let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn fit_preprocessor(
    rows: &[Vec<f64>],
    schema_version: &str,
    mode: PreprocessMode,
) -> Result<Preprocessor> {
    if rows.len() < 2 {
        return Err(Error::invalid("preprocessor needs at least 2 rows"));
    }
    let dim = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: r.len(),
        });
    }
    let stats: Vec<(f64, f64)> = (0..dim).into_par_iter().map(|j| column_stats(rows, j)).collect();

    let (kept, means, stds) = match mode {
        PreprocessMode::Identity => ((0..dim).collect(), vec![], vec![]),
        PreprocessMode::Standardize => (
            (0..dim).collect(),
            stats.iter().map(|s| s.0).collect(),
            stats.iter().map(|s| if s.1 > 0.0 { s.1 } else { 1.0 }).collect(),
        ),
        PreprocessMode::Linear => {
            let n = rows.len() as f64;
            let candidates: Vec<usize> = (0..dim)
                .filter(|&j| {
                    let zeros = rows.iter().filter(|r| r[j] == 0.0).count() as f64;
                    stats[j].1 > 0.0 && zeros / n <= ZERO_FRACTION_LIMIT
                })
                .collect();
            let kept = drop_correlated(rows, &candidates, &stats);
            let means = kept.iter().map(|&j| stats[j].0).collect();
            let stds = kept.iter().map(|&j| stats[j].1).collect();
            (kept, means, stds)
        }
    };
    Ok(Preprocessor {
        mode,
        schema_version: schema_version.to_string(),
        input_dim: dim,
        kept_indices: kept,
        means,
        stds,
    })
}

pub fn pearson(rows: &[Vec<f64>], a: usize, b: usize) -> f64 {
    let (ma, sa) = column_stats(rows, a);
    let (mb, sb) = column_stats(rows, b);
    if sa == 0.0 || sb == 0.0 {
        return 0.0;
    }
    let cov = rows.iter().map(|r| (r[a] - ma) * (r[b] - mb)).sum::<f64>() / rows.len() as f64;
    cov / (sa * sb)
}

/// Scans candidates in order; a feature survives only if it is not
/// correlated above the limit with an earlier survivor.
fn drop_correlated(rows: &[Vec<f64>], candidates: &[usize], stats: &[(f64, f64)]) -> Vec<usize> {
    let n = rows.len() as f64;
    // standardized columns, one contiguous vector each
    let z: Vec<Vec<f64>> = candidates
        .par_iter()
        .map(|&j| {
            let (m, s) = stats[j];
            rows.iter().map(|r| (r[j] - m) / s).collect()
        })
        .collect();
    let mut survivors: Vec<usize> = Vec::new();
    for k in 0..candidates.len() {
        let correlated = survivors.par_iter().any(|&s| {
            let c = z[k].iter().zip(&z[s]).map(|(x, y)| x * y).sum::<f64>() / n;
            c.abs() > CORRELATION_LIMIT
        });
        if !correlated {
            survivors.push(k);
        }
    }
    survivors.into_iter().map(|k| candidates[k]).collect()
}

impl Preprocessor {
    pub fn output_dim(&self) -> usize {
        self.kept_indices.len()
    }

    /// Selects kept coordinates and standardizes them.
    pub fn apply_slice(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: v.len(),
            });
        }
        Ok(match self.mode {
            PreprocessMode::Identity => v.to_vec(),
            _ => self
                .kept_indices
                .iter()
                .zip(self.means.iter().zip(&self.stds))
                .map(|(&j, (m, s))| (v[j] - m) / s)
                .collect(),
        })
    }

    pub fn apply(&self, v: &FeatureVector) -> Result<Vec<f64>> {
        if *v.schema_version != self.schema_version {
            return Err(Error::SchemaMismatch {
                expected: self.schema_version.clone(),
                actual: v.schema_version.to_string(),
            });
        }
        self.apply_slice(&v.values)
    }

    pub fn apply_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply_slice(r)).collect()
    }

    pub fn kept_names<'s>(&self, schema: &'s FeatureSchema) -> Vec<&'s str> {
        self.kept_indices.iter().map(|&j| schema.names[j].as_str()).collect()
    }
}
