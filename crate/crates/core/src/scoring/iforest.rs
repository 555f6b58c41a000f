use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use super::{canonical_rows, check_rows, Family, FittedModel, ScoreModel};
use crate::error::Result;
use crate::rng::{self, ChaCha8Rng};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average path length of an unsuccessful search in a binary search tree
/// built from `n` points.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let m = (n - 1) as f64;
            2.0 * (libm::log(m) + EULER_GAMMA) - 2.0 * m / n as f64
        }
    }
}

/// Isolation forest. The score is `-2^(-E[h(x)] / c(s))`, so larger means
/// harder to isolate (more normal).
///
/// The tree RNG is seeded from a hash of the canonically ordered training
/// rows combined with `seed`: refitting on a permutation of the same rows
/// gives the same forest, while distinct seeds give independent forests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsolationForest {
    pub trees: usize,
    pub subsample: usize,
    pub seed: u64,
}

impl Default for IsolationForest {
    fn default() -> Self {
        IsolationForest {
            trees: 100,
            subsample: 64,
            seed: 0,
        }
    }
}

impl IsolationForest {
    pub fn with_seed(seed: u64) -> Self {
        IsolationForest {
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { size: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn build(rows: &[&[f64]], height_limit: usize, r: &mut ChaCha8Rng) -> Tree {
        let mut t = Tree { nodes: Vec::new() };
        let idx: Vec<usize> = (0..rows.len()).collect();
        t.grow(rows, idx, 0, height_limit, r);
        t
    }

    fn grow(&mut self, rows: &[&[f64]], idx: Vec<usize>, depth: usize, limit: usize, r: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { size: idx.len() });
        if depth >= limit || idx.len() <= 1 {
            return id;
        }
        let d = rows[idx[0]].len();
        let ranges: Vec<(usize, f64, f64)> = (0..d)
            .filter_map(|j| {
                let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.min(rows[i][j]), hi.max(rows[i][j]))
                });
                (hi > lo).then_some((j, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }
        let (feature, lo, hi) = ranges[r.random_range(0..ranges.len())];
        let threshold = r.random_range(lo..hi);
        let (l, rr): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| rows[i][feature] < threshold);
        let left = self.grow(rows, l, depth + 1, limit, r);
        let right = self.grow(rows, rr, depth + 1, limit, r);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[node] {
                Node::Leaf { size } => return depth + average_path_length(size),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[feature] < threshold { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
struct ForestFit {
    trees: Vec<Tree>,
    norm: f64,
}

impl ScoreModel for IsolationForest {
    fn name(&self) -> String {
        if self.seed == 0 {
            "iforest".into()
        } else {
            format!("iforest(seed={})", self.seed)
        }
    }

    fn family(&self) -> Family {
        Family::OneClass
    }

    fn min_samples(&self) -> usize {
        2
    }

    fn fit(&self, target: &[&[f64]], _others: &[&[f64]]) -> Result<Arc<dyn FittedModel>> {
        check_rows(&self.name(), target, 2)?;
        let rows = canonical_rows(target);
        let data_hash = rng::hash_words(rows.iter().flat_map(|r| r.iter().map(|v| v.to_bits())));
        let mut r = rng::rng(data_hash ^ self.seed);
        let s = self.subsample.clamp(2, rows.len());
        let limit = libm::ceil(libm::log2(s as f64)) as usize;
        let trees = (0..self.trees.max(1))
            .map(|_| {
                let pick: Vec<&[f64]> = index::sample(&mut r, rows.len(), s).into_iter().map(|i| rows[i]).collect();
                Tree::build(&pick, limit, &mut r)
            })
            .collect();
        Ok(Arc::new(ForestFit {
            trees,
            norm: average_path_length(s),
        }))
    }
}

impl FittedModel for ForestFit {
    fn score(&self, x: &[f64]) -> f64 {
        let mean = self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64;
        -libm::exp2(-mean / self.norm)
    }
}
