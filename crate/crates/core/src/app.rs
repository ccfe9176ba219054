//! Model bundles, persistence, and single-request scoring.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::split_indices;
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport, Scored, DEFAULT_THRESHOLD};
use crate::features::{
    fit_preprocessor, FeatureMatrix, FeatureSchema, FeatureVector, Featurizer, PreprocessMode,
    Preprocessor, TextFields,
};
use crate::models::forest::train_forest;
use crate::models::logistic::train_logistic;
use crate::models::mlp::train_mlp;
use crate::models::{ForestConfig, ForestModel, LogisticConfig, LogisticModel, MlpConfig, MlpModel};
use crate::nlp::NlpResources;

pub const FORMAT_VERSION: u64 = 1;
pub const CLICKBAIT_LABEL: &str = "clickbait";
pub const NO_CLICKBAIT_LABEL: &str = "no-clickbait";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelType {
    Lr,
    Rf,
    Mlp,
}

impl ModelType {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelType::Lr => "lr",
            ModelType::Rf => "rf",
            ModelType::Mlp => "mlp",
        }
    }

    pub fn preprocess_mode(self) -> PreprocessMode {
        match self {
            ModelType::Lr => PreprocessMode::Linear,
            ModelType::Rf => PreprocessMode::Identity,
            ModelType::Mlp => PreprocessMode::Standardize,
        }
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" | "logistic" => Ok(ModelType::Lr),
            "rf" | "forest" => Ok(ModelType::Rf),
            "mlp" | "dnn" => Ok(ModelType::Mlp),
            other => Err(Error::invalid(format!("unknown model type {other:?} (lr, rf, mlp)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Logistic(LogisticModel),
    Forest(ForestModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn model_type(&self) -> ModelType {
        match self {
            Model::Logistic(_) => ModelType::Lr,
            Model::Forest(_) => ModelType::Rf,
            Model::Mlp(_) => ModelType::Mlp,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Model::Logistic(m) => m.weights.len(),
            Model::Forest(m) => m.feature_count,
            Model::Mlp(m) => m.input_dim,
        }
    }

    /// Probability of clickbait for an already preprocessed row.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            Model::Logistic(m) => m.predict(x),
            Model::Forest(m) => m.predict(x),
            Model::Mlp(m) => m.predict(x),
        }
    }

    fn parameters(&self) -> Result<serde_json::Value> {
        Ok(match self {
            Model::Logistic(m) => serde_json::to_value(m)?,
            Model::Forest(m) => serde_json::to_value(m)?,
            Model::Mlp(m) => serde_json::to_value(m)?,
        })
    }

    fn from_parameters(kind: ModelType, v: serde_json::Value) -> Result<Self> {
        Ok(match kind {
            ModelType::Lr => Model::Logistic(serde_json::from_value(v)?),
            ModelType::Rf => {
                let m: ForestModel = serde_json::from_value(v)?;
                m.validate()?;
                Model::Forest(m)
            }
            ModelType::Mlp => {
                let m: MlpModel = serde_json::from_value(v)?;
                m.validate()?;
                Model::Mlp(m)
            }
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelMetadata {
    pub split_seed: u64,
    pub train_fraction: f64,
    pub train_rows: usize,
    #[serde(default)]
    pub seed: u64,
}

/// A trained model together with everything needed to score raw text.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub model: Model,
    pub schema: FeatureSchema,
    pub preprocessor: Preprocessor,
    pub metadata: ModelMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Envelope {
    format_version: u64,
    model_type: ModelType,
    feature_schema: FeatureSchema,
    preprocessor: Preprocessor,
    parameters: serde_json::Value,
    #[serde(default)]
    metadata: ModelMetadata,
}

impl ModelBundle {
    pub fn model_type(&self) -> ModelType {
        self.model.model_type()
    }

    fn check(&self) -> Result<()> {
        if self.preprocessor.schema_version != self.schema.version {
            return Err(Error::SchemaMismatch {
                expected: self.schema.version.clone(),
                actual: self.preprocessor.schema_version.clone(),
            });
        }
        if self.preprocessor.input_dim != self.schema.len() {
            return Err(Error::ModelFormat(format!(
                "preprocessor takes {} features, schema has {}",
                self.preprocessor.input_dim,
                self.schema.len()
            )));
        }
        if self.model.input_dim() != self.preprocessor.output_dim() {
            return Err(Error::ModelFormat(format!(
                "model takes {} inputs, preprocessor yields {}",
                self.model.input_dim(),
                self.preprocessor.output_dim()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let env = Envelope {
            format_version: FORMAT_VERSION,
            model_type: self.model_type(),
            feature_schema: self.schema.clone(),
            preprocessor: self.preprocessor.clone(),
            parameters: self.model.parameters()?,
            metadata: self.metadata.clone(),
        };
        Ok(serde_json::to_string(&env)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("formatVersion").and_then(|v| v.as_u64()) {
            Some(FORMAT_VERSION) => {}
            Some(v) => return Err(Error::ModelFormat(format!("unsupported formatVersion {v}"))),
            None => return Err(Error::ModelFormat("missing formatVersion".into())),
        }
        let env: Envelope = serde_json::from_value(value)?;
        let bundle = ModelBundle {
            model: Model::from_parameters(env.model_type, env.parameters)?,
            schema: env.feature_schema,
            preprocessor: env.preprocessor,
            metadata: env.metadata,
        };
        bundle.check()?;
        Ok(bundle)
    }

    /// Scores a full-length raw feature vector.
    pub fn predict_raw(&self, values: &[f64]) -> Result<f64> {
        let x = self.preprocessor.apply_slice(values)?;
        self.model.predict(&x)
    }

    pub fn predict_vector(&self, v: &FeatureVector) -> Result<f64> {
        let x = self.preprocessor.apply(v)?;
        self.model.predict(&x)
    }

    pub fn predict_matrix(&self, m: &FeatureMatrix) -> Result<Vec<f64>> {
        if m.schema.version != self.schema.version {
            return Err(Error::SchemaMismatch {
                expected: self.schema.version.clone(),
                actual: m.schema.version.clone(),
            });
        }
        m.rows.par_iter().map(|r| self.predict_raw(r)).collect()
    }

    pub fn evaluate(&self, m: &FeatureMatrix) -> Result<EvalReport> {
        let probs = self.predict_matrix(m)?;
        let scored: Vec<Scored> = probs
            .iter()
            .zip(&m.labels)
            .zip(&m.truth_means)
            .map(|((&p, &label), &tm)| Scored {
                probability: p,
                label,
                truth_mean: tm.is_finite().then_some(tm),
            })
            .collect();
        evaluate(&scored, DEFAULT_THRESHOLD)
    }
}

pub fn save_model(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, bundle.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelBundle> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelBundle::from_json(&text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    pub kind: ModelType,
    pub logistic: LogisticConfig,
    pub forest: ForestConfig,
    pub mlp: MlpConfig,
}

impl TrainSettings {
    /// Defaults for `kind`, with `seed` driving every random choice.
    pub fn new(kind: ModelType, seed: u64) -> Self {
        TrainSettings {
            kind,
            logistic: LogisticConfig::default(),
            forest: ForestConfig {
                seed,
                ..Default::default()
            },
            mlp: MlpConfig {
                seed,
                ..Default::default()
            },
        }
    }

    fn seed(&self) -> u64 {
        match self.kind {
            ModelType::Lr => 0,
            ModelType::Rf => self.forest.seed,
            ModelType::Mlp => self.mlp.seed,
        }
    }
}

/// Fits the preprocessor and model on `train`.
pub fn train_bundle(train: &FeatureMatrix, settings: &TrainSettings) -> Result<ModelBundle> {
    let pre = fit_preprocessor(&train.rows, &train.schema.version, settings.kind.preprocess_mode())?;
    let x = pre.apply_rows(&train.rows)?;
    let y = &train.labels;
    let model = match settings.kind {
        ModelType::Lr => Model::Logistic(train_logistic(&x, y, &settings.logistic)?),
        ModelType::Rf => Model::Forest(train_forest(&x, y, &settings.forest)?),
        ModelType::Mlp => Model::Mlp(train_mlp(&x, y, &settings.mlp)?),
    };
    Ok(ModelBundle {
        model,
        schema: train.schema.clone(),
        preprocessor: pre,
        metadata: ModelMetadata {
            train_rows: train.len(),
            seed: settings.seed(),
            ..Default::default()
        },
    })
}

/// Deterministic train/test split of a feature matrix.
pub fn split_matrix(m: &FeatureMatrix, train_fraction: f64, seed: u64) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let (train, test) = split_indices(m.len(), train_fraction, seed)?;
    Ok((m.subset(&train), m.subset(&test)))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoreRequest {
    pub post_text: String,
    #[serde(default)]
    pub target_title: String,
    #[serde(default)]
    pub target_description: String,
    #[serde(default)]
    pub target_paragraphs: Vec<String>,
    #[serde(default)]
    pub target_keywords: String,
    #[serde(default)]
    pub target_captions: Vec<String>,
    #[serde(default)]
    pub num_images: Option<usize>,
    #[serde(default)]
    pub num_paragraphs: Option<usize>,
    /// Return the raw feature values alongside the score.
    #[serde(default)]
    pub echo_features: bool,
}

impl ScoreRequest {
    pub fn validate(&self) -> Result<()> {
        if self.post_text.trim().is_empty() {
            return Err(Error::Validation {
                field: "postText".into(),
                message: "must not be empty".into(),
            });
        }
        Ok(())
    }

    pub fn text_fields(&self) -> TextFields {
        TextFields {
            post: self.post_text.clone(),
            captions: self.target_captions.join(" "),
            description: self.target_description.clone(),
            keywords: self.target_keywords.clone(),
            paragraphs: self.target_paragraphs.join(" "),
            title: self.target_title.clone(),
            caption_count: self.target_captions.len(),
            paragraph_count: self.num_paragraphs.unwrap_or(self.target_paragraphs.len()),
            image_count: self.num_images.unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoreResponse {
    pub probability: f64,
    pub label: String,
    pub model_type: ModelType,
    pub latency_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_echo: Option<BTreeMap<String, f64>>,
}

pub fn label_for(probability: f64) -> &'static str {
    if probability >= DEFAULT_THRESHOLD {
        CLICKBAIT_LABEL
    } else {
        NO_CLICKBAIT_LABEL
    }
}

/// Resident resources for scoring: read-only once built, safe to share
/// across threads.
pub struct Scorer {
    pub bundle: ModelBundle,
    pub table: EmbeddingTable,
    pub nlp: NlpResources,
}

impl Scorer {
    /// Checks that the embeddings and tagger reproduce the model's schema.
    pub fn new(bundle: ModelBundle, table: EmbeddingTable, nlp: NlpResources) -> Result<Self> {
        let live = FeatureSchema::new(table.dimension(), nlp.tagger.tagset());
        if live.version != bundle.schema.version {
            return Err(Error::SchemaMismatch {
                expected: bundle.schema.version.clone(),
                actual: live.version,
            });
        }
        Ok(Scorer { bundle, table, nlp })
    }

    pub fn featurizer(&self) -> Featurizer<'_> {
        Featurizer::new(&self.table, &self.nlp)
    }

    pub fn features(&self, req: &ScoreRequest) -> Result<FeatureVector> {
        req.validate()?;
        self.featurizer().assemble(&req.text_fields(), &self.bundle.schema)
    }

    pub fn score(&self, req: &ScoreRequest) -> Result<ScoreResponse> {
        let start = Instant::now();
        let fv = self.features(req)?;
        let probability = self.bundle.predict_vector(&fv)?;
        let feature_echo = req.echo_features.then(|| {
            self.bundle
                .schema
                .names
                .iter()
                .cloned()
                .zip(fv.values.iter().copied())
                .collect()
        });
        Ok(ScoreResponse {
            probability,
            label: label_for(probability).to_string(),
            model_type: self.bundle.model_type(),
            latency_ms: start.elapsed().as_secs_f64() * 1e3,
            feature_echo,
        })
    }
}
