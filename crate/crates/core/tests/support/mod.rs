//! Shared test oracles and synthetic data.
#![allow(dead_code)]

use std::io::Write;
use std::path::Path;

use clickbait_core::corpus::{recompute_truth_stats, Instance, TruthClass, TruthRecord};
use clickbait_core::embed::EmbeddingTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum transport cost by enumerating every basis of `m + n - 1` cells,
/// solving the constraint system on it, and keeping the cheapest
/// non-negative solution.
pub fn bfs_min_cost(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    let k = m + n - 1;
    let cells: Vec<usize> = (0..m * n).collect();
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(k);
    combinations(&cells, k, 0, &mut chosen, &mut |basis| {
        if let Some(x) = solve_basis(basis, supply, demand, m, n) {
            if x.iter().all(|&v| v >= -1e-12) {
                let c: f64 = basis.iter().zip(&x).map(|(&cell, &v)| cost[cell] * v).sum();
                best = best.min(c);
            }
        }
    });
    best
}

fn combinations(items: &[usize], k: usize, start: usize, chosen: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if chosen.len() == k {
        f(chosen);
        return;
    }
    for i in start..items.len() {
        if items.len() - i < k - chosen.len() {
            break;
        }
        chosen.push(items[i]);
        combinations(items, k, i + 1, chosen, f);
        chosen.pop();
    }
}

/// Gaussian elimination on the `(m + n) x k` row/column-sum system.
/// `None` when the cells do not determine a unique, consistent flow.
fn solve_basis(basis: &[usize], supply: &[f64], demand: &[f64], m: usize, n: usize) -> Option<Vec<f64>> {
    let k = basis.len();
    let rows = m + n;
    let mut a = vec![vec![0.0; k + 1]; rows];
    for (c, &cell) in basis.iter().enumerate() {
        a[cell / n][c] = 1.0;
        a[m + cell % n][c] = 1.0;
    }
    for i in 0..m {
        a[i][k] = supply[i];
    }
    for j in 0..n {
        a[m + j][k] = demand[j];
    }
    let mut r = 0;
    for c in 0..k {
        let p = (r..rows).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(r, p);
        for i in 0..rows {
            if i != r && a[i][c] != 0.0 {
                let f = a[i][c] / a[r][c];
                for j in c..=k {
                    a[i][j] -= f * a[r][j];
                }
            }
        }
        r += 1;
    }
    if a[r..].iter().any(|row| row[k].abs() > 1e-9) {
        return None;
    }
    Some((0..k).map(|c| a[c][k] / a[c][c]).collect())
}

pub fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn random_table(words: &[String], dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = EmbeddingTable::new(dim);
    for w in words {
        let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        t.insert(w, &v).unwrap();
    }
    t
}

pub const BAIT_WORDS: &[&str] = &[
    "you", "won't", "believe", "this", "shocking", "amazing", "secret", "reasons", "things", "why",
    "what", "happened", "next", "incredible", "these", "photos", "will", "make", "cry", "best",
    "ever", "just", "literally", "insane", "weird", "trick",
];

pub const NEWS_WORDS: &[&str] = &[
    "government", "announces", "report", "economy", "minister", "election", "court", "ruling",
    "budget", "police", "investigation", "markets", "council", "talks", "trade", "agreement",
    "parliament", "inflation", "official", "statement", "crisis", "energy", "policy", "vote",
    "president", "summit",
];

pub const SHARED_WORDS: &[&str] = &["the", "a", "of", "to", "in", "and", "is", "on", "for", "new"];

pub fn vocabulary() -> Vec<String> {
    BAIT_WORDS
        .iter()
        .chain(NEWS_WORDS)
        .chain(SHARED_WORDS)
        .map(|s| s.to_string())
        .collect()
}

/// Word vectors where bait and news words sit on opposite sides of one
/// axis, plus noise.
pub fn synthetic_table(dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = EmbeddingTable::new(dim);
    for (group, words) in [(1.0f32, BAIT_WORDS), (-1.0, NEWS_WORDS), (0.0, SHARED_WORDS)] {
        for w in words {
            let mut v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-0.5f32..0.5)).collect();
            v[0] += group;
            t.insert(w, &v).unwrap();
        }
    }
    t
}

fn sentence(rng: &mut ChaCha8Rng, primary: &[&str], len: std::ops::Range<usize>, purity: f64) -> String {
    let len = rng.gen_range(len);
    (0..len)
        .map(|_| {
            let r: f64 = rng.gen();
            if r < purity {
                primary[rng.gen_range(0..primary.len())]
            } else if r < purity + (1.0 - purity) / 2.0 {
                SHARED_WORDS[rng.gen_range(0..SHARED_WORDS.len())]
            } else {
                let all = [BAIT_WORDS, NEWS_WORDS];
                let pool = all[rng.gen_range(0..2)];
                pool[rng.gen_range(0..pool.len())]
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

const DAYS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];

/// A labeled toy corpus where clickbait posts draw mostly from the bait
/// vocabulary. Roughly a quarter of the rows are clickbait.
pub fn synthetic_corpus(n: usize, seed: u64) -> (Vec<Instance>, Vec<TruthRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = Vec::with_capacity(n);
    let mut truths = Vec::with_capacity(n);
    for i in 0..n {
        let bait = rng.gen_bool(0.27);
        let post_words = if bait { BAIT_WORDS } else { NEWS_WORDS };
        let mut post = sentence(&mut rng, post_words, 4..12, 0.75);
        if bait && rng.gen_bool(0.4) {
            post = format!("{} {post}?", rng.gen_range(3..20));
        }
        let id = format!("{}", 800_000_000_000u64 + i as u64);
        let paragraphs = (0..rng.gen_range(1..5))
            .map(|_| sentence(&mut rng, NEWS_WORDS, 8..25, 0.6))
            .collect();
        let captions = (0..rng.gen_range(0..3))
            .map(|_| sentence(&mut rng, NEWS_WORDS, 5..6, 0.5))
            .collect();
        let media = if rng.gen_bool(0.3) {
            vec![format!("media/photo_{i}.jpg")]
        } else {
            vec![]
        };
        instances.push(Instance {
            id: id.clone(),
            post_text: vec![post],
            post_timestamp: format!(
                "{} Jun {:02} {:02}:{:02}:00 +0000 2017",
                // 1 June 2017 was a Thursday
                DAYS[(3 + i % 28) % 7],
                1 + i % 28,
                rng.gen_range(0..24),
                rng.gen_range(0..60)
            ),
            post_media: media,
            target_title: sentence(&mut rng, NEWS_WORDS, 5..10, 0.8),
            target_description: sentence(&mut rng, NEWS_WORDS, 8..16, 0.7),
            target_keywords: (0..rng.gen_range(0..4))
                .map(|_| NEWS_WORDS[rng.gen_range(0..NEWS_WORDS.len())])
                .collect::<Vec<_>>()
                .join(","),
            target_paragraphs: paragraphs,
            target_captions: captions,
        });

        let scale = [0.0, 0.33, 0.66, 1.0];
        let judgments: Vec<f64> = (0..5)
            .map(|_| {
                let k = if bait { rng.gen_range(2..4) } else { rng.gen_range(0..2) };
                scale[k]
            })
            .collect();
        let stats = recompute_truth_stats(&judgments).unwrap();
        truths.push(TruthRecord {
            id,
            truth_judgments: judgments,
            truth_mean: stats.mean,
            truth_median: stats.median,
            truth_mode: stats.mode,
            truth_class: if stats.mean >= 0.5 {
                TruthClass::Clickbait
            } else {
                TruthClass::NoClickbait
            },
        });
    }
    (instances, truths)
}

pub fn write_jsonl<T: serde::Serialize>(path: &Path, rows: &[T]) {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    for r in rows {
        serde_json::to_writer(&mut f, r).unwrap();
        f.write_all(b"\n").unwrap();
    }
    f.flush().unwrap();
}

/// Writes `table` in the whitespace-separated text format.
pub fn write_vectors(path: &Path, table: &EmbeddingTable) {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    for id in 0..table.len() {
        let v: Vec<String> = table.vector_by_id(id).iter().map(|x| x.to_string()).collect();
        writeln!(f, "{} {}", table.word(id), v.join(" ")).unwrap();
    }
    f.flush().unwrap();
}
