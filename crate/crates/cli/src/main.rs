use std::io::{Read, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use clickbait_cli::{self as cli, FeaturizeOptions, SplitOptions, DEFAULT_EMBEDDING_DIM};
use clickbait_core::app::ModelType;
use clickbait_core::corpus::{Grouper, DEFAULT_SPLIT_SEED, DEFAULT_TRAIN_FRACTION};

#[derive(Parser)]
#[command(name = "clickbait", version, about = "Train, evaluate and serve clickbait classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Resources {
    /// Trained model file.
    #[arg(long, env = "CLICKBAIT_MODEL")]
    model: PathBuf,
    /// Word vectors in GloVe text format.
    #[arg(long, env = "CLICKBAIT_EMBEDDINGS")]
    embeddings: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Join instances.jsonl and truth.jsonl into a labeled corpus CSV.
    Ingest {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Skip malformed lines instead of stopping.
        #[arg(long)]
        lenient: bool,
    },
    /// Percentage of clickbait posts per group.
    Eda {
        #[arg(long)]
        corpus: PathBuf,
        /// images, weekday, keywords or captions
        #[arg(long)]
        group: Grouper,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the feature matrix for a corpus.
    Featurize {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, env = "CLICKBAIT_EMBEDDINGS")]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EMBEDDING_DIM)]
        dim: usize,
        /// Use a random subset of this many rows.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 1)]
        sample_seed: u64,
        /// Keep only rows with a post and a target title.
        #[arg(long)]
        valid_only: bool,
    },
    Train {
        #[arg(long)]
        features: PathBuf,
        /// lr, rf or mlp
        #[arg(long)]
        model: ModelType,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SPLIT_SEED)]
        split_seed: u64,
        #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
        train_fraction: f64,
    },
    /// Score the held-out split and write a JSON report.
    Evaluate {
        #[arg(long, env = "CLICKBAIT_MODEL")]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a one-row metrics table CSV.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Also write ROC points as CSV.
        #[arg(long)]
        roc: Option<PathBuf>,
    },
    /// Score one request, given inline, as a file, or on stdin.
    Predict {
        #[command(flatten)]
        resources: Resources,
        #[arg(long, conflicts_with = "stdin", required_unless_present = "stdin")]
        json: Option<String>,
        #[arg(long)]
        stdin: bool,
    },
    /// Run the HTTP scoring service.
    Serve {
        #[command(flatten)]
        resources: Resources,
        #[arg(long, env = "CLICKBAIT_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Ingest { instances, truth, out, lenient } => {
            let start = Instant::now();
            let s = cli::ingest(&instances, &truth, &out, lenient)?;
            println!("instances {}  truth records {}  skipped lines {}", s.instances, s.truths, s.skipped_lines);
            println!(
                "merged {} ({} clickbait, {} no-clickbait); unmatched instances {}, truths {}",
                s.merged,
                s.clickbait,
                s.merged - s.clickbait,
                s.report.unmatched_instances,
                s.report.unmatched_truths
            );
            println!("rows with valid text {}", s.valid_text);
            log::info!("ingest took {:.1?}", start.elapsed());
        }
        Command::Eda { corpus, group, out } => match out {
            Some(p) => cli::eda(&corpus, group, std::fs::File::create(&p)?)?,
            None => cli::eda(&corpus, group, std::io::stdout().lock())?,
        },
        Command::Featurize { corpus, embeddings, out, dim, sample, sample_seed, valid_only } => {
            let start = Instant::now();
            let opts = FeaturizeOptions { dim, sample, sample_seed, valid_only };
            let m = cli::featurize(&corpus, &embeddings, &out, &opts)?;
            println!("{} rows x {} features in {:.1?}", m.len(), m.schema.len(), start.elapsed());
        }
        Command::Train { features, model, out, seed, split_seed, train_fraction } => {
            let start = Instant::now();
            let split = SplitOptions { seed: split_seed, train_fraction };
            cli::train(&features, model, seed, split, &out)?;
            println!("trained {model} in {:.1?}, saved to {}", start.elapsed(), out.display());
        }
        Command::Evaluate { model, features, out, table, roc } => {
            let report = cli::evaluate(&model, &features)?;
            std::fs::write(&out, report.to_json()?)?;
            if let Some(p) = table {
                let kind = clickbait_core::app::load_model(&model)?.model_type();
                report.write_table_csv(std::fs::File::create(&p)?, kind.as_str(), "test")?;
            }
            if let Some(p) = roc {
                report.write_roc_csv(std::fs::File::create(&p)?)?;
            }
            println!(
                "test rows {}  accuracy {:.4}  auc {}",
                report.samples,
                report.accuracy,
                report.auc.map_or("n/a".into(), |a| format!("{a:.4}"))
            );
        }
        Command::Predict { resources, json, stdin } => {
            let req = if stdin {
                let mut s = String::new();
                std::io::stdin().read_to_string(&mut s)?;
                serde_json::from_str(&s).context("parsing request from stdin")?
            } else {
                cli::parse_request(json.as_deref().unwrap_or_default())?
            };
            let scorer = cli::load_scorer(&resources.model, &resources.embeddings)?;
            let resp = cli::predict(&scorer, &req)?;
            let mut out = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, &resp)?;
            writeln!(out)?;
        }
        Command::Serve { resources, port, host } => {
            let start = Instant::now();
            let scorer = cli::load_scorer(&resources.model, &resources.embeddings)?;
            log::info!(
                "loaded {} model and {} word vectors in {:.1?}",
                scorer.bundle.model_type(),
                scorer.table.len(),
                start.elapsed()
            );
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(clickbait_cli::server::serve(Arc::new(scorer), SocketAddr::new(host, port)))?;
        }
    }
    Ok(())
}
