use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::check_xy;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ForestConfig {
    pub tree_count: usize,
    pub max_depth: usize,
    pub max_features_per_split: usize,
    pub min_samples_split: usize,
    pub seed: u64,
    /// Draw a bootstrap sample per tree (disable for single-tree tests).
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            tree_count: 200,
            max_depth: 7,
            max_features_per_split: 19,
            min_samples_split: 2,
            seed: 1,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "type")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        samples: usize,
        /// Sample-weighted Gini decrease of this split.
        gain: f64,
    },
    Leaf {
        /// `[p(class 0), p(class 1)]`
        probs: [f64; 2],
        samples: usize,
    },
}

/// Binary tree stored as a flat node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_probs(&self, x: &[f64]) -> [f64; 2] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { probs, .. } => return *probs,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ForestModel {
    pub config: ForestConfig,
    pub feature_count: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Mean over trees of the leaf's class-1 frequency.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_count {
            return Err(Error::DimensionMismatch {
                expected: self.feature_count,
                actual: x.len(),
            });
        }
        if self.trees.is_empty() {
            return Err(Error::invalid("forest has no trees"));
        }
        let sum: f64 = self.trees.iter().map(|t| t.leaf_probs(x)[1]).sum();
        Ok(sum / self.trees.len() as f64)
    }

    /// Mean decrease in impurity: per tree, the sample-weighted Gini
    /// decrease per feature normalized to 1, then averaged over trees and
    /// normalized again. All zeros when no tree has a split.
    pub fn importances(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.feature_count];
        for tree in &self.trees {
            let mut per = vec![0.0; self.feature_count];
            for node in &tree.nodes {
                if let Node::Split { feature, gain, .. } = node {
                    per[*feature] += gain;
                }
            }
            let s: f64 = per.iter().sum();
            if s > 0.0 {
                for (t, p) in total.iter_mut().zip(&per) {
                    *t += p / s;
                }
            }
        }
        let s: f64 = total.iter().sum();
        if s > 0.0 {
            total.iter_mut().for_each(|t| *t /= s);
        }
        total
    }
}

impl ForestModel {
    /// Structural checks for a deserialized model.
    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::ModelFormat("forest has no trees".into()));
        }
        for (t, tree) in self.trees.iter().enumerate() {
            let n = tree.nodes.len();
            if n == 0 {
                return Err(Error::ModelFormat(format!("tree {t} is empty")));
            }
            for (i, node) in tree.nodes.iter().enumerate() {
                let ok = match node {
                    // children are always written after their parent
                    Node::Split {
                        feature, left, right, ..
                    } => *feature < self.feature_count && *left > i && *right > i && *left < n && *right < n,
                    Node::Leaf { probs, .. } => probs.iter().all(|p| (0.0..=1.0).contains(p)),
                };
                if !ok {
                    return Err(Error::ModelFormat(format!("tree {t} node {i} is malformed")));
                }
            }
        }
        Ok(())
    }
}

fn gini(c0: f64, c1: f64) -> f64 {
    let n = c0 + c1;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (c0 / n, c1 / n);
    1.0 - p0 * p0 - p1 * p1
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    cfg: &'a ForestConfig,
    n_features: usize,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> (f64, f64) {
        let c1 = idx.iter().filter(|&&i| self.y[i] == 1).count();
        ((idx.len() - c1) as f64, c1 as f64)
    }

    fn leaf(&mut self, c0: f64, c1: f64, samples: usize) -> usize {
        let n = c0 + c1;
        self.nodes.push(Node::Leaf {
            probs: [c0 / n, c1 / n],
            samples,
        });
        self.nodes.len() - 1
    }

    fn build(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let (c0, c1) = self.counts(idx);
        if depth >= self.cfg.max_depth
            || c0 == 0.0
            || c1 == 0.0
            || idx.len() < self.cfg.min_samples_split.max(2)
        {
            return self.leaf(c0, c1, idx.len());
        }

        let k = self.cfg.max_features_per_split.clamp(1, self.n_features);
        let mut features = sample(rng, self.n_features, k).into_vec();
        features.sort_unstable();

        let parent = idx.len() as f64 * gini(c0, c1);
        let mut best: Option<BestSplit> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for &f in &features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let (mut l0, mut l1) = (0.0, 0.0);
            for w in 0..order.len() - 1 {
                if self.y[order[w]] == 1 {
                    l1 += 1.0;
                } else {
                    l0 += 1.0;
                }
                let (lo, hi) = (self.x[order[w]][f], self.x[order[w + 1]][f]);
                if lo == hi {
                    continue;
                }
                let (r0, r1) = (c0 - l0, c1 - l1);
                let gain = parent - (l0 + l1) * gini(l0, l1) - (r0 + r1) * gini(r0, r1);
                // strict: ties keep the lower feature, then the lower threshold
                if gain > best.map_or(1e-12, |b| b.gain) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }

        let Some(split) = best else {
            return self.leaf(c0, c1, idx.len());
        };

        let mut cut = 0;
        for i in 0..idx.len() {
            if self.x[idx[i]][split.feature] <= split.threshold {
                idx.swap(i, cut);
                cut += 1;
            }
        }
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf {
            probs: [0.0, 0.0],
            samples: 0,
        });
        let (left_idx, right_idx) = idx.split_at_mut(cut);
        let left = self.build(left_idx, depth + 1, rng);
        let right = self.build(right_idx, depth + 1, rng);
        self.nodes[me] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            samples: idx.len(),
            gain: split.gain,
        };
        me
    }
}

fn build_tree(x: &[Vec<f64>], y: &[u8], cfg: &ForestConfig, n_features: usize, tree_index: usize) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(tree_index as u64));
    let n = x.len();
    let mut idx: Vec<usize> = if cfg.bootstrap {
        (0..n).map(|_| rng.gen_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut b = Builder {
        x,
        y,
        cfg,
        n_features,
        nodes: Vec::new(),
    };
    b.build(&mut idx, 0, &mut rng);
    Tree { nodes: b.nodes }
}

/// Trees are built in parallel; each tree's randomness comes only from its
/// own seed (`seed + tree index`), so the result does not depend on thread
/// scheduling.
pub fn train_forest(x: &[Vec<f64>], y: &[u8], cfg: &ForestConfig) -> Result<ForestModel> {
    let n_features = check_xy(x, y)?;
    if x.len() < 2 {
        return Err(Error::invalid("forest training needs at least 2 rows"));
    }
    if cfg.tree_count == 0 || n_features == 0 {
        return Err(Error::invalid("forest needs at least one tree and one feature"));
    }
    let trees = (0..cfg.tree_count)
        .into_par_iter()
        .map(|t| build_tree(x, y, cfg, n_features, t))
        .collect();
    Ok(ForestModel {
        config: *cfg,
        feature_count: n_features,
        trees,
    })
}
