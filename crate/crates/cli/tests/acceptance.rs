//! Acceptance suite. Prints one PASS / FAIL / BLOCKED line per criterion
//! and exits non-zero if anything failed. Criteria that need the public
//! corpus or pretrained vectors read their locations from
//! `CLICKBAIT_CORPUS_DIR` (holding `instances.jsonl` and `truth.jsonl`) and
//! `CLICKBAIT_GLOVE`, and report BLOCKED when those are not set.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clickbait_cli::{FeaturizeOptions, SplitOptions};
use clickbait_core::app::{
    load_model, save_model, split_matrix, train_bundle, ModelType, ScoreRequest, ScoreResponse, Scorer,
    TrainSettings,
};
use clickbait_core::corpus::{eda_group_table, merge_corpus, Grouper, GroupKey, LabeledInstance};
use clickbait_core::embed::{nbow, wmd, wmd_with, EmbeddingTable, WmdOptions};
use clickbait_core::eval::{auc, roc_curve, trapezoid_area, Scored};
use clickbait_core::features::{featurize_corpus, FeatureMatrix, Featurizer};
use clickbait_core::models::balanced_class_weights;
use clickbait_core::models::mlp::{build_mlp, gradient_check, GradCheckOptions};
use clickbait_core::models::{ForestConfig, MlpConfig};
use clickbait_core::nlp::NlpResources;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Blocked(String),
}

use Outcome::*;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn corpus_dir() -> Option<PathBuf> {
    std::env::var_os("CLICKBAIT_CORPUS_DIR").map(PathBuf::from)
}

fn glove() -> Option<PathBuf> {
    std::env::var_os("CLICKBAIT_GLOVE").map(PathBuf::from)
}

fn load_corpus(dir: &Path, out: &Path) -> anyhow::Result<Vec<LabeledInstance>> {
    clickbait_cli::ingest(&dir.join("instances.jsonl"), &dir.join("truth.jsonl"), out, false)?;
    clickbait_cli::read_corpus(out)
}

// (group, clickbait, no-clickbait, percent)
type Cell = (&'static str, usize, usize, f64);

const IMAGES: &[Cell] = &[
    ("0", 2827, 7241, 28.08),
    ("1", 2601, 8852, 22.71),
    ("2", 53, 249, 17.55),
    ("3", 16, 47, 25.40),
    ("4", 26, 85, 23.42),
];

const WEEKDAYS: &[Cell] = &[
    ("Monday", 743, 2283, 24.55),
    ("Tuesday", 712, 2302, 23.62),
    ("Wednesday", 699, 2360, 22.85),
    ("Thursday", 830, 2536, 24.66),
    ("Friday", 848, 2494, 25.37),
    ("Saturday", 896, 2280, 28.21),
    ("Sunday", 795, 2219, 26.38),
];

const KEYWORDS: &[Cell] = &[
    ("0", 2124, 5912, 26.43),
    ("1", 127, 290, 30.46),
    ("2", 335, 937, 26.34),
    ("3", 229, 833, 21.56),
    ("4", 387, 1151, 25.16),
    ("5", 452, 1296, 25.86),
    ("6", 396, 1365, 22.49),
    ("7", 353, 1119, 23.98),
    ("8", 262, 797, 24.74),
    ("9", 185, 528, 25.95),
    ("10", 171, 430, 28.45),
];

const CAPTIONS: &[Cell] = &[
    ("0", 868, 2090, 29.34),
    ("1", 1168, 4849, 19.41),
    ("2", 564, 1937, 22.55),
    ("3", 427, 1408, 23.27),
    ("4", 285, 770, 27.01),
    ("5", 182, 564, 24.40),
    ("6", 179, 703, 20.29),
    ("7", 108, 326, 24.88),
    ("8", 89, 431, 17.12),
    ("9", 62, 191, 24.51),
    ("10", 101, 279, 26.58),
];

fn compare_table(data: &[LabeledInstance], g: Grouper, want: &[Cell]) -> Vec<String> {
    let table = eda_group_table(data, g);
    let mut problems = Vec::new();
    if table.rows.len() != want.len() {
        problems.push(format!("{g:?}: {} rows, expected {}", table.rows.len(), want.len()));
    }
    for &(key, cb, ncb, pct) in want {
        let row = table.rows.iter().find(|r| match &r.group_key {
            GroupKey::Count(n) => n.to_string() == key,
            GroupKey::Label(s) => s == key,
        });
        match row {
            None => problems.push(format!("{g:?} {key}: missing")),
            Some(r) => {
                if (r.clickbait_count, r.non_clickbait_count) != (cb, ncb) || (r.clickbait_pct - pct).abs() > 0.005 {
                    problems.push(format!(
                        "{g:?} {key}: {} / {} / {:.2}%, expected {cb} / {ncb} / {pct:.2}%",
                        r.clickbait_count, r.non_clickbait_count, r.clickbait_pct
                    ));
                }
            }
        }
    }
    problems
}

fn corpus_reproduction() -> Outcome {
    let Some(dir) = corpus_dir() else {
        return Blocked("set CLICKBAIT_CORPUS_DIR to the Clickbait Challenge 2017 training data".into());
    };
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let data = match load_corpus(&dir, &tmp.path().join("corpus.csv")) {
        Ok(d) => d,
        Err(e) => return Fail(format!("ingest failed: {e:#}")),
    };
    let cb = data.iter().filter(|r| r.label == 1).count();
    let mut problems = Vec::new();
    if (data.len(), data.len() - cb, cb) != (21_997, 16_474, 5_523) {
        problems.push(format!("counts {} = {} + {}", data.len(), data.len() - cb, cb));
    }
    for (g, want) in [
        (Grouper::ImageCount, IMAGES),
        (Grouper::Weekday, WEEKDAYS),
        (Grouper::KeywordCount, KEYWORDS),
        (Grouper::CaptionCount, CAPTIONS),
    ] {
        problems.extend(compare_table(&data, g, want));
    }
    let took = start.elapsed();
    if took > Duration::from_secs(120) {
        problems.push(format!("took {took:.1?}"));
    }
    if problems.is_empty() {
        Pass(format!("21,997 rows, all four group tables match, {took:.1?}"))
    } else {
        Fail(problems.join("; "))
    }
}

fn class_weights() -> Outcome {
    let mut labels = vec![0u8; 16_474];
    labels.extend(std::iter::repeat(1u8).take(5_523));
    let (w0, w1) = balanced_class_weights(&labels).unwrap();
    let mut ok = (w0 - 0.6676).abs() < 1e-3 && (w1 - 1.9914).abs() < 1e-3;
    let mut detail = format!("({w0:.4}, {w1:.4}) from 16,474 / 5,523");
    if let Some(dir) = corpus_dir() {
        let tmp = tempfile::tempdir().unwrap();
        match load_corpus(&dir, &tmp.path().join("corpus.csv")) {
            Ok(data) => {
                let y: Vec<u8> = data.iter().map(|r| r.label).collect();
                let (c0, c1) = balanced_class_weights(&y).unwrap();
                ok &= (c0 - 0.6676).abs() < 1e-3 && (c1 - 1.9914).abs() < 1e-3;
                detail += &format!("; corpus labels give ({c0:.4}, {c1:.4})");
            }
            Err(e) => return Fail(format!("ingest failed: {e:#}")),
        }
    }
    check(ok, detail)
}

fn mlp_audit() -> Outcome {
    let c = build_mlp(383, 0).unwrap().param_counts();
    let layers: Vec<usize> = c.per_layer.iter().map(|(_, n)| *n).collect();
    check(
        (c.total, c.trainable, c.non_trainable) == (36_502, 35_802, 700)
            && layers == [19_200, 200, 15_300, 1_200, 602],
        format!("total {} trainable {} non-trainable {} per layer {layers:?}", c.total, c.trainable, c.non_trainable),
    )
}

fn gradient_verification() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x: Vec<Vec<f64>> = (0..8).map(|_| (0..383).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let y = [0u8, 1, 0, 1, 1, 0, 0, 1];
    let m = build_mlp(383, 5).unwrap();
    let clean = gradient_check(&m, &x, &y, &GradCheckOptions::default()).unwrap();
    let faulty = gradient_check(&m, &x, &y, &GradCheckOptions { fault_scale: 2.0, ..Default::default() }).unwrap();
    let took = start.elapsed();
    check(
        clean.max_relative_error < 1e-4 && faulty.max_relative_error > 1e-2 && took < Duration::from_secs(60),
        format!(
            "max relative error {:.2e} over {} parameters, x2 fault gives {:.2e}, {took:.1?}",
            clean.max_relative_error, clean.checked, faulty.max_relative_error
        ),
    )
}

fn wmd_oracle() -> Outcome {
    let start = Instant::now();
    let vocab: Vec<String> = (0..8).map(|i| format!("w{i}")).collect();
    let mut worst = 0.0f64;
    let mut invariants = true;
    for inst in 0..100u64 {
        let table = support::random_table(&vocab, 3, 1000 + inst);
        let mut rng = ChaCha8Rng::seed_from_u64(inst);
        let mut doc = || {
            let k = rng.gen_range(1..=4);
            let mut toks: Vec<&str> = Vec::new();
            let picked: Vec<&String> = vocab.choose_multiple(&mut rng, k).collect();
            for w in picked {
                toks.extend(std::iter::repeat(w.as_str()).take(rng.gen_range(1..=3)));
            }
            toks.shuffle(&mut rng);
            nbow(&toks.into_iter().collect(), &table)
        };
        let (a, b) = (doc(), doc());
        let mut cost = Vec::new();
        for &i in a.ids() {
            for &j in b.ids() {
                cost.push(support::euclidean(table.vector_by_id(i), table.vector_by_id(j)));
            }
        }
        let want = support::bfs_min_cost(a.weights(), b.weights(), &cost);
        let got = wmd(&a, &b, &table).unwrap();
        let plain = wmd_with(&a, &b, &table, WmdOptions { prefilter: false }).unwrap();
        worst = worst.max((got - want).abs()).max((plain - want).abs());
        invariants &= (wmd(&b, &a, &table).unwrap() - got).abs() < 1e-9 && wmd(&a, &a, &table).unwrap() < 1e-9;
    }
    let took = start.elapsed();
    check(
        worst < 1e-9 && invariants && took < Duration::from_secs(60),
        format!("worst gap {worst:.1e} on 100 instances, symmetry and identity hold: {invariants}, {took:.1?}"),
    )
}

fn metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(2..60);
        let coarse = rng.gen_bool(0.5);
        let mut s: Vec<Scored> = (0..n)
            .map(|_| {
                let p = if coarse { rng.gen_range(0..=10) as f64 / 10.0 } else { rng.gen() };
                Scored::new(p, rng.gen_range(0..=1))
            })
            .collect();
        s[0].label = 0;
        s[1].label = 1;
        let a = auc(&s).unwrap();
        worst = worst.max((a - trapezoid_area(&roc_curve(&s).unwrap())).abs());
        let k = rng.gen_range(0.2..5.0);
        let mapped: Vec<Scored> = s.iter().map(|r| Scored::new(r.probability.powf(k), r.label)).collect();
        worst = worst.max((a - auc(&mapped).unwrap()).abs());
        let flipped: Vec<Scored> = s.iter().map(|r| Scored::new(r.probability, 1 - r.label)).collect();
        worst = worst.max((a + auc(&flipped).unwrap() - 1.0).abs());
    }
    let hand: Vec<Scored> = [(0.1, 0), (0.4, 0), (0.35, 1), (0.8, 1)]
        .iter()
        .map(|&(p, y)| Scored::new(p, y))
        .collect();
    let h = auc(&hand).unwrap();
    check(
        worst < 1e-12 && h == 0.75,
        format!("worst identity gap {worst:.1e} over 1,000 sets, hand example {h}"),
    )
}

fn end_to_end() -> Outcome {
    let (Some(dir), Some(vectors)) = (corpus_dir(), glove()) else {
        return Blocked("needs CLICKBAIT_CORPUS_DIR and CLICKBAIT_GLOVE (50-d GloVe text file)".into());
    };
    let run = || -> anyhow::Result<Outcome> {
        let tmp = tempfile::tempdir()?;
        let corpus = tmp.path().join("corpus.csv");
        load_corpus(&dir, &corpus)?;
        let sample = std::env::var("CLICKBAIT_SAMPLE").ok().map(|s| s.parse()).transpose()?;
        let features = tmp.path().join("features.csv");
        let start = Instant::now();
        let opts = FeaturizeOptions { dim: 50, sample, sample_seed: 1, valid_only: false };
        clickbait_cli::featurize(&corpus, &vectors, &features, &opts)?;
        let featurize_time = start.elapsed();
        let split = SplitOptions { seed: 1, train_fraction: 0.67 };
        let mut r = Vec::new();
        for kind in [ModelType::Lr, ModelType::Rf, ModelType::Mlp] {
            let model = tmp.path().join(format!("{kind}.json"));
            clickbait_cli::train(&features, kind, 1, split, &model)?;
            r.push(clickbait_cli::evaluate(&model, &features)?);
        }
        let (lr_auc, rf_auc, mlp_auc) = (r[0].auc.unwrap_or(0.0), r[1].auc.unwrap_or(0.0), r[2].auc.unwrap_or(0.0));
        let mut ok = lr_auc >= 0.80 && r[0].accuracy >= 0.74 && rf_auc >= 0.78 && mlp_auc >= lr_auc - 0.05;
        let limit = if sample.is_some() { 15 * 60 } else { 4 * 3600 };
        ok &= start.elapsed() < Duration::from_secs(limit);
        Ok(check(
            ok,
            format!(
                "LR auc {lr_auc:.3} acc {:.3}; RF auc {rf_auc:.3}; MLP auc {mlp_auc:.3}; featurize {featurize_time:.1?}, total {:.1?}",
                r[0].accuracy,
                start.elapsed()
            ),
        ))
    };
    run().unwrap_or_else(|e| Fail(format!("{e:#}")))
}

struct Synthetic {
    table: EmbeddingTable,
    matrix: FeatureMatrix,
}

fn synthetic() -> Synthetic {
    let (inst, truth) = support::synthetic_corpus(400, 5);
    let (data, _) = merge_corpus(inst, truth).unwrap();
    let table = support::synthetic_table(50, 2);
    let nlp = NlpResources::bundled();
    let matrix = featurize_corpus(&data, &Featurizer::new(&table, &nlp)).unwrap();
    Synthetic { table, matrix }
}

fn quick_settings(kind: ModelType) -> TrainSettings {
    let mut s = TrainSettings::new(kind, 3);
    s.forest = ForestConfig { tree_count: 30, seed: 3, ..Default::default() };
    s.mlp = MlpConfig { epochs: 8, seed: 3, learning_rate: 0.003, ..Default::default() };
    s
}

/// The synthetic vocabulary plus `extra` random words, all 50-d.
fn large_table(base: &EmbeddingTable, extra: usize) -> (EmbeddingTable, Vec<String>) {
    let mut t = base.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let words: Vec<String> = (0..extra).map(|i| format!("tok{i}")).collect();
    for w in &words {
        let v: Vec<f32> = (0..50).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        t.insert(w, &v).unwrap();
    }
    (t, words)
}

fn long_request(rng: &mut ChaCha8Rng, words: &[String]) -> ScoreRequest {
    let mut text = |n: usize| -> String {
        (0..n).map(|_| words[rng.gen_range(0..words.len())].as_str()).collect::<Vec<_>>().join(" ")
    };
    ScoreRequest {
        post_text: text(15),
        target_title: text(12),
        target_description: text(40),
        target_paragraphs: vec![text(250), text(250)],
        target_keywords: text(10).replace(' ', ","),
        target_captions: vec![text(20), text(20)],
        num_images: Some(1),
        ..Default::default()
    }
}

fn warm_latency(syn: &Synthetic) -> Outcome {
    let (train, _) = split_matrix(&syn.matrix, 0.67, 1).unwrap();
    let bundle = train_bundle(&train, &quick_settings(ModelType::Lr)).unwrap();
    let (table, words) = large_table(&syn.table, 50_000);
    let scorer = Arc::new(Scorer::new(bundle, table, NlpResources::bundled()).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let requests: Vec<ScoreRequest> = (0..100).map(|_| long_request(&mut rng, &words)).collect();

    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move {
            axum::serve(listener, clickbait_cli::server::router(scorer)).await.unwrap();
        });
        let client = reqwest::Client::new();
        let url = format!("http://{addr}/score");

        let health: serde_json::Value =
            client.get(format!("http://{addr}/health")).send().await.unwrap().json().await.unwrap();
        if health["status"] != "ok" {
            return Fail(format!("health said {health}"));
        }

        let mut times = Vec::new();
        let mut serial = Vec::new();
        for r in &requests {
            let t = Instant::now();
            let resp = client.post(&url).json(r).send().await.unwrap();
            let status = resp.status();
            let body: ScoreResponse = match resp.json().await {
                Ok(b) => b,
                Err(e) => return Fail(format!("status {status}: {e}")),
            };
            times.push(t.elapsed());
            serial.push(body);
        }
        times.sort();
        let p95 = times[94];

        let handles: Vec<_> = requests
            .iter()
            .cloned()
            .map(|r| {
                let (client, url) = (client.clone(), url.clone());
                tokio::spawn(async move { client.post(&url).json(&r).send().await?.json::<ScoreResponse>().await })
            })
            .collect();
        let mut same = true;
        for (h, s) in handles.into_iter().zip(&serial) {
            let p = h.await.unwrap().unwrap();
            same &= p.probability.to_bits() == s.probability.to_bits() && p.label == s.label;
        }
        check(
            p95 < Duration::from_secs(1) && same,
            format!(
                "p95 {p95:.1?} (max {:.1?}) over 100 requests with 500-word paragraphs; 100 parallel match serial: {same}",
                times[99]
            ),
        )
    })
}

fn persistence(syn: &Synthetic) -> Outcome {
    let (train, _) = split_matrix(&syn.matrix, 0.67, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dim = syn.matrix.schema.len();
    let inputs: Vec<Vec<f64>> = (0..100).map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
    let mut notes = Vec::new();
    let mut ok = true;
    for kind in [ModelType::Lr, ModelType::Rf, ModelType::Mlp] {
        let bundle = train_bundle(&train, &quick_settings(kind)).unwrap();
        let path = dir.path().join(format!("{kind}.json"));
        save_model(&bundle, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        let same = inputs
            .iter()
            .all(|x| bundle.predict_raw(x).unwrap().to_bits() == loaded.predict_raw(x).unwrap().to_bits());
        ok &= same;
        notes.push(format!("{kind} {}", if same { "identical" } else { "DIFFERS" }));
    }
    check(ok, format!("{} on 100 random inputs", notes.join(", ")))
}

fn main() {
    let syn = synthetic();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("corpus reproduction", Box::new(corpus_reproduction)),
        ("balanced class weights", Box::new(class_weights)),
        ("MLP architecture audit", Box::new(mlp_audit)),
        ("gradient verification", Box::new(gradient_verification)),
        ("WMD oracle equivalence", Box::new(wmd_oracle)),
        ("metric identities", Box::new(metric_identities)),
        ("end-to-end model quality", Box::new(end_to_end)),
        ("warm-service latency", Box::new(|| warm_latency(&syn))),
        ("persistence", Box::new(|| persistence(&syn))),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Fail(format!("panicked: {msg}"))
        });
        match outcome {
            Pass(d) => println!("PASS    {name}: {d}"),
            Fail(d) => {
                failed += 1;
                println!("FAIL    {name}: {d}")
            }
            Blocked(d) => println!("BLOCKED {name}: {d}"),
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
