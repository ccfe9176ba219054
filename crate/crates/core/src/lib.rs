//! Clickbait scoring engine.
//!
//! The crate is split along the pipeline:
//!
//! - [`corpus`]: JSONL ingestion, merge, label encoding, split and EDA tables.
//! - [`nlp`]: tokenizer, surface features, rule-based POS counts, lexicon sentiment.
//! - [`embed`]: pretrained word vectors, sentence vectors, similarity and
//!   word mover's distance backed by an exact transportation solver.
//! - [`features`]: the named per-instance feature vector and preprocessing.
//! - [`models`]: logistic regression, random forest and a small MLP.
//! - [`eval`]: classification metrics and ROC/AUC.
//! - [`app`]: request scoring and model persistence shared by the CLI and
//!   the HTTP service.

pub mod app;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod nlp;

pub use error::{Error, Result};
