//! Random forest: bootstrap samples, Gini splits over `mtry` candidate
//! features, hard leaf-majority votes averaged across trees. Deterministic in
//! the seed; trees train in parallel with per-tree derived seeds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_trees: usize,
    pub nodesize: usize,
    pub mtry: usize,
    pub seed: u64,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_trees: 900,
            nodesize: 5,
            mtry: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Training sample counts per class at this leaf.
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn vote(&self, row: &[f64]) -> u8 {
        match self {
            Node::Leaf { counts } => u8::from(counts[1] > counts[0]),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.vote(row)
                } else {
                    right.vote(row)
                }
            }
        }
    }

    fn leaves(&self, out: &mut Vec<[usize; 2]>) {
        match self {
            Node::Leaf { counts } => out.push(*counts),
            Node::Split { left, right, .. } => {
                left.leaves(out);
                right.leaves(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    pub params: RfParams,
    pub n_features: usize,
    pub trees: Vec<Node>,
}

impl RfModel {
    /// Fraction of trees voting class 1.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let ones: usize = self.trees.iter().map(|t| t.vote(row) as usize).sum();
        ones as f64 / self.trees.len() as f64
    }

    pub fn leaf_counts(&self) -> Vec<[usize; 2]> {
        let mut out = Vec::new();
        for t in &self.trees {
            t.leaves(&mut out);
        }
        out
    }
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

/// Best Gini split among the candidate features; ties resolved toward the
/// lowest feature index, then the lowest threshold. Children must each keep
/// at least `nodesize` samples.
fn best_split(
    x: &[Vec<f64>],
    y: &[u8],
    idx: &[usize],
    candidates: &[usize],
    nodesize: usize,
) -> Option<SplitChoice> {
    let n = idx.len();
    let mut best: Option<SplitChoice> = None;
    for &f in candidates {
        let mut order: Vec<usize> = idx.to_vec();
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let total = order.iter().fold([0usize; 2], |mut c, &i| {
            c[y[i] as usize] += 1;
            c
        });
        let mut left = [0usize; 2];
        for k in 0..n - 1 {
            left[y[order[k]] as usize] += 1;
            let (a, b) = (x[order[k]][f], x[order[k + 1]][f]);
            if a == b {
                continue;
            }
            let nl = k + 1;
            let nr = n - nl;
            if nl < nodesize || nr < nodesize {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let imp = (nl as f64 * gini(left) + nr as f64 * gini(right)) / n as f64;
            let threshold = (a + b) / 2.0;
            let better = match &best {
                None => true,
                Some(cur) => {
                    imp < cur.impurity - 1e-12
                        || ((imp - cur.impurity).abs() <= 1e-12
                            && (f < cur.feature
                                || (f == cur.feature && threshold < cur.threshold)))
                }
            };
            if better {
                best = Some(SplitChoice {
                    feature: f,
                    threshold,
                    impurity: imp,
                });
            }
        }
    }
    best
}

fn grow(
    x: &[Vec<f64>],
    y: &[u8],
    idx: Vec<usize>,
    params: &RfParams,
    rng: &mut ChaCha8Rng,
) -> Node {
    let counts = idx.iter().fold([0usize; 2], |mut c, &i| {
        c[y[i] as usize] += 1;
        c
    });
    let pure = counts[0] == 0 || counts[1] == 0;
    if pure || idx.len() < 2 * params.nodesize {
        return Node::Leaf { counts };
    }
    let p = x[0].len();
    // mtry features sampled without replacement, then sorted so candidate
    // evaluation order matches the tie-break rule
    let mut pool: Vec<usize> = (0..p).collect();
    let mut candidates = Vec::with_capacity(params.mtry);
    for _ in 0..params.mtry.min(p) {
        let j = rng.gen_range(0..pool.len());
        candidates.push(pool.swap_remove(j));
    }
    candidates.sort_unstable();
    match best_split(x, y, &idx, &candidates, params.nodesize) {
        None => Node::Leaf { counts },
        Some(choice) => {
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
                .into_iter()
                .partition(|&i| x[i][choice.feature] <= choice.threshold);
            Node::Split {
                feature: choice.feature,
                threshold: choice.threshold,
                left: Box::new(grow(x, y, left_idx, params, rng)),
                right: Box::new(grow(x, y, right_idx, params, rng)),
            }
        }
    }
}

fn tree_seed(seed: u64, tree: usize) -> u64 {
    seed.wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(tree as u64)
        .wrapping_mul(0xd1b54a32d192ed03)
}

pub fn rf_train(x: &[Vec<f64>], y: &[u8], params: RfParams) -> Result<RfModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Training(format!(
            "{} rows vs {} labels",
            x.len(),
            y.len()
        )));
    }
    let p = x[0].len();
    if params.mtry == 0 || params.mtry > p {
        return Err(Error::Training(format!(
            "mtry = {} outside [1, {p}]",
            params.mtry
        )));
    }
    if params.n_trees == 0 || params.nodesize == 0 {
        return Err(Error::Training("n_trees and nodesize must be positive".into()));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::Training("labels must be 0/1".into()));
    }
    let n = x.len();
    let trees: Vec<Node> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(params.seed, t));
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            grow(x, y, idx, &params, &mut rng)
        })
        .collect();
    Ok(RfModel {
        params,
        n_features: p,
        trees,
    })
}
