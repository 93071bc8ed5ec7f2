//! Regression random forest: CART with bootstrap resampling and feature
//! subsampling at every node. Leaves keep their in-bag responses so that
//! donor-based imputation can draw individual training values instead of
//! leaf means.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; defaults to max(1, p/3).
    pub mtry: Option<usize>,
    /// Minimum leaf size; a node splits only if both children reach it.
    pub min_node: usize,
    pub max_depth: Option<usize>,
    /// Test hook: disable bootstrap resampling.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            mtry: None,
            min_node: 5,
            max_depth: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        start: u32,
        len: u32,
        mean: f64,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
    /// In-bag responses, arranged so every leaf owns a contiguous range.
    values: Vec<f64>,
}

impl Tree {
    fn leaf(&self, x: &[f64]) -> (&[f64], f64) {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                Node::Leaf { start, len, mean } => {
                    let s = *start as usize;
                    return (&self.values[s..s + *len as usize], *mean);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FittedForest {
    trees: Vec<Tree>,
    n_features: usize,
}

struct Builder<'a> {
    features: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a ForestParams,
    mtry: usize,
}

impl Builder<'_> {
    /// Recursively split `idx` (indices into the bootstrap sample row set),
    /// appending nodes to the tree. Returns the new node's index.
    fn build<R: Rng>(&self, tree: &mut Tree, idx: &mut [usize], depth: usize, rng: &mut R) -> u32 {
        let k = idx.len();
        let (sum, min_y, max_y) = idx.iter().fold((0.0, f64::INFINITY, f64::NEG_INFINITY), |acc, &i| {
            let v = self.y[i];
            (acc.0 + v, acc.1.min(v), acc.2.max(v))
        });
        let mean = sum / k as f64;

        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        let pure = min_y == max_y;
        let splittable = depth_ok && !pure && k >= 2 * self.params.min_node;

        let best = if splittable {
            self.best_split(idx, rng)
        } else {
            None
        };

        match best {
            Some((feature, threshold)) => {
                let node_at = tree.nodes.len() as u32;
                tree.nodes.push(Node::Leaf {
                    start: 0,
                    len: 0,
                    mean: 0.0,
                }); // placeholder
                let split_at =
                    partition(idx, |&i| self.features[feature][i] <= threshold);
                let (lo, hi) = idx.split_at_mut(split_at);
                let left = self.build(tree, lo, depth + 1, rng);
                let right = self.build(tree, hi, depth + 1, rng);
                tree.nodes[node_at as usize] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                node_at
            }
            None => {
                let start = tree.values.len() as u32;
                tree.values.extend(idx.iter().map(|&i| self.y[i]));
                let node_at = tree.nodes.len() as u32;
                tree.nodes.push(Node::Leaf {
                    start,
                    len: k as u32,
                    mean,
                });
                node_at
            }
        }
    }

    /// Best (feature, threshold) by summed child SSE over mtry candidate
    /// features drawn in a shuffled order; ties keep the first candidate.
    fn best_split<R: Rng>(&self, idx: &[usize], rng: &mut R) -> Option<(usize, f64)> {
        let p = self.features.len();
        let mut cand: Vec<usize> = (0..p).collect();
        cand.shuffle(rng);
        cand.truncate(self.mtry);

        let k = idx.len();
        let min_node = self.params.min_node;
        let mut best: Option<(usize, f64)> = None;
        let mut best_cost = f64::INFINITY;
        let mut sorted = idx.to_vec();
        for &f in &cand {
            let col = &self.features[f];
            sorted.copy_from_slice(idx);
            sorted.sort_unstable_by(|&a, &b| col[a].total_cmp(&col[b]));
            let total: f64 = sorted.iter().map(|&i| self.y[i]).sum();
            let total_sq: f64 = sorted.iter().map(|&i| self.y[i] * self.y[i]).sum();
            let mut sum_l = 0.0;
            let mut sq_l = 0.0;
            for split in 1..k {
                let yi = self.y[sorted[split - 1]];
                sum_l += yi;
                sq_l += yi * yi;
                if split < min_node || k - split < min_node {
                    continue;
                }
                let a = col[sorted[split - 1]];
                let b = col[sorted[split]];
                if a == b {
                    continue;
                }
                let nl = split as f64;
                let nr = (k - split) as f64;
                let cost =
                    (sq_l - sum_l * sum_l / nl) + (total_sq - sq_l - (total - sum_l).powi(2) / nr);
                if cost < best_cost {
                    best_cost = cost;
                    best = Some((f, 0.5 * (a + b)));
                }
            }
        }
        best
    }
}

/// Stable partition in place; returns the count of elements satisfying the
/// predicate, which end up in the prefix.
fn partition<T: Copy, F: Fn(&T) -> bool>(xs: &mut [T], pred: F) -> usize {
    let mut hits: Vec<T> = Vec::with_capacity(xs.len());
    let mut rest: Vec<T> = Vec::new();
    for &x in xs.iter() {
        if pred(&x) {
            hits.push(x);
        } else {
            rest.push(x);
        }
    }
    let at = hits.len();
    hits.extend_from_slice(&rest);
    xs.copy_from_slice(&hits);
    at
}

/// Fit a forest on column-major features and a response vector.
pub fn fit<R: Rng>(
    features: &[Vec<f64>],
    y: &[f64],
    params: &ForestParams,
    rng: &mut R,
) -> Result<FittedForest> {
    let p = features.len();
    let n = y.len();
    if p == 0 {
        return Err(Error::Parameter("at least one feature required".into()));
    }
    if n < 2 {
        return Err(Error::Parameter(format!("need n >= 2 rows, got {n}")));
    }
    if features.iter().any(|c| c.len() != n) {
        return Err(Error::Parameter("feature columns must have length n".into()));
    }
    if params.n_trees == 0 || params.min_node == 0 {
        return Err(Error::Parameter(
            "n_trees and min_node must be at least 1".into(),
        ));
    }
    let mtry = params.mtry.unwrap_or_else(|| (p / 3).max(1)).min(p).max(1);
    let builder = Builder {
        features,
        y,
        params,
        mtry,
    };
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let mut idx: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut tree = Tree {
            nodes: Vec::new(),
            values: Vec::new(),
        };
        builder.build(&mut tree, &mut idx, 0, rng);
        trees.push(tree);
    }
    Ok(FittedForest {
        trees,
        n_features: p,
    })
}

impl FittedForest {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Average over trees of the in-bag mean response in x's leaf.
    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.leaf(x).1).sum();
        sum / self.trees.len() as f64
    }

    /// Pick one tree uniformly, find x's leaf and return one in-bag
    /// response drawn uniformly from it.
    pub fn donor_draw<R: Rng>(&self, x: &[f64], rng: &mut R) -> f64 {
        let tree = &self.trees[rng.random_range(0..self.trees.len())];
        let (donors, _) = tree.leaf(x);
        donors[rng.random_range(0..donors.len())]
    }
}
