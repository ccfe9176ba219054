//! Command implementations behind the `clickbait` binary, plus the HTTP
//! service. Kept in a library so tests can drive them without a subprocess.

pub mod server;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clickbait_core::app::{
    load_model, save_model, split_matrix, train_bundle, ModelType, ScoreRequest, ScoreResponse, Scorer,
    TrainSettings,
};
use clickbait_core::corpus::{
    eda_group_table, merge_corpus, parse_instances, parse_truth, read_corpus_csv, write_corpus_csv,
    write_eda_csv, Grouper, LabeledInstance, MergeReport, ParseOptions,
};
use clickbait_core::embed::{load_embeddings, EmbeddingTable};
use clickbait_core::eval::EvalReport;
use clickbait_core::features::{featurize_corpus, FeatureMatrix, FeatureSchema, Featurizer};
use clickbait_core::nlp::NlpResources;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_EMBEDDING_DIM: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestSummary {
    pub instances: usize,
    pub truths: usize,
    pub skipped_lines: usize,
    pub merged: usize,
    pub valid_text: usize,
    pub clickbait: usize,
    pub report: MergeReport,
}

/// Parses and joins the two JSONL files and writes the merged corpus CSV.
pub fn ingest(instances: &Path, truth: &Path, out: &Path, lenient: bool) -> Result<IngestSummary> {
    let opts = ParseOptions { lenient };
    let inst = parse_instances(instances, opts)?;
    let tr = parse_truth(truth, opts)?;
    for (line, why) in inst.skipped.iter().chain(&tr.skipped) {
        log::warn!("skipped line {line}: {why}");
    }
    let skipped_lines = inst.skipped.len() + tr.skipped.len();
    let (n_inst, n_truth) = (inst.records.len(), tr.records.len());
    let (data, report) = merge_corpus(inst.records, tr.records)?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_corpus_csv(&data, BufWriter::new(file))?;
    Ok(IngestSummary {
        instances: n_inst,
        truths: n_truth,
        skipped_lines,
        merged: data.len(),
        valid_text: data.iter().filter(|r| r.has_valid_text()).count(),
        clickbait: data.iter().filter(|r| r.label == 1).count(),
        report,
    })
}

pub fn read_corpus(path: &Path) -> Result<Vec<LabeledInstance>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_corpus_csv(BufReader::new(file))?)
}

/// Writes the grouped clickbait table as CSV to `out`.
pub fn eda(corpus: &Path, group: Grouper, out: impl Write) -> Result<()> {
    let data = read_corpus(corpus)?;
    let table = eda_group_table(&data, group);
    if table.unknown > 0 {
        log::warn!("{} rows have no usable {group:?} value", table.unknown);
    }
    if table.beyond_cap > 0 {
        log::info!("{} rows fall beyond the table cap", table.beyond_cap);
    }
    write_eda_csv(&table.rows, group_header(group), out)?;
    Ok(())
}

fn group_header(g: Grouper) -> &'static str {
    match g {
        Grouper::ImageCount => "images",
        Grouper::Weekday => "weekday",
        Grouper::KeywordCount => "targetKeywords",
        Grouper::CaptionCount => "targetCaptions",
    }
}

/// Where the schema JSON for a feature CSV lives.
pub fn schema_path(features: &Path) -> PathBuf {
    let mut s = features.as_os_str().to_owned();
    s.push(".schema.json");
    PathBuf::from(s)
}

#[derive(Debug, Clone, Default)]
pub struct FeaturizeOptions {
    pub dim: usize,
    /// Featurize only this many rows, drawn at random with `sample_seed`.
    pub sample: Option<usize>,
    pub sample_seed: u64,
    /// Drop rows with an empty post or target title.
    pub valid_only: bool,
}

pub fn featurize(corpus: &Path, embeddings: &Path, out: &Path, opts: &FeaturizeOptions) -> Result<FeatureMatrix> {
    let mut data = read_corpus(corpus)?;
    if opts.valid_only {
        let before = data.len();
        data.retain(|r| r.has_valid_text());
        log::info!("validity filter kept {} of {before} rows", data.len());
    }
    if let Some(n) = opts.sample {
        if n < data.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.sample_seed);
            let mut idx = rand::seq::index::sample(&mut rng, data.len(), n).into_vec();
            idx.sort_unstable();
            data = idx.into_iter().map(|i| data[i].clone()).collect();
        }
    }
    let table = load_embeddings(embeddings, opts.dim)?;
    let nlp = NlpResources::bundled();
    let matrix = featurize_corpus(&data, &Featurizer::new(&table, &nlp))?;
    write_features(&matrix, out)?;
    Ok(matrix)
}

pub fn write_features(m: &FeatureMatrix, out: &Path) -> Result<()> {
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    m.write_csv(BufWriter::new(file))?;
    std::fs::write(schema_path(out), m.schema.to_json()?)?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let sp = schema_path(path);
    let schema = FeatureSchema::from_json(
        &std::fs::read_to_string(&sp).with_context(|| format!("reading {}", sp.display()))?,
    )?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(FeatureMatrix::read_csv(BufReader::new(file), schema)?)
}

#[derive(Debug, Clone, Copy)]
pub struct SplitOptions {
    pub seed: u64,
    pub train_fraction: f64,
}

pub fn train(features: &Path, kind: ModelType, seed: u64, split: SplitOptions, out: &Path) -> Result<()> {
    let m = read_features(features)?;
    let (train, _) = split_matrix(&m, split.train_fraction, split.seed)?;
    let mut bundle = train_bundle(&train, &TrainSettings::new(kind, seed))?;
    bundle.metadata.split_seed = split.seed;
    bundle.metadata.train_fraction = split.train_fraction;
    save_model(&bundle, out)?;
    Ok(())
}

/// Scores the held-out part of `features`, recomputing the split the model
/// was trained with.
pub fn evaluate(model: &Path, features: &Path) -> Result<EvalReport> {
    let bundle = load_model(model)?;
    let m = read_features(features)?;
    let md = &bundle.metadata;
    if md.train_fraction <= 0.0 {
        bail!("model file records no train/test split");
    }
    let (_, test) = split_matrix(&m, md.train_fraction, md.split_seed)?;
    Ok(bundle.evaluate(&test)?)
}

pub fn load_scorer(model: &Path, embeddings: &Path) -> Result<Scorer> {
    let bundle = load_model(model).with_context(|| format!("loading model {}", model.display()))?;
    let table = load_embeddings(embeddings, bundle.schema.embedding_dim)
        .with_context(|| format!("loading embeddings {}", embeddings.display()))?;
    scorer_from(bundle, table)
}

pub fn scorer_from(bundle: clickbait_core::app::ModelBundle, table: EmbeddingTable) -> Result<Scorer> {
    Ok(Scorer::new(bundle, table, NlpResources::bundled())?)
}

/// `req` is either inline JSON or a path to a JSON file.
pub fn parse_request(req: &str) -> Result<ScoreRequest> {
    let text = if req.trim_start().starts_with('{') {
        req.to_string()
    } else {
        std::fs::read_to_string(req).with_context(|| format!("reading request {req}"))?
    };
    Ok(serde_json::from_str(&text)?)
}

pub fn predict(scorer: &Scorer, req: &ScoreRequest) -> Result<ScoreResponse> {
    Ok(scorer.score(req)?)
}
