//! Isolation Forest.

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quantile;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

pub const N_TREES: usize = 100;
pub const MAX_SUBSAMPLE: usize = 256;
const EULER_GAMMA: f64 = 0.5772156649;

/// Average unsuccessful-search path length of a binary search tree on `n`
/// points, used to normalise depths and to extend truncated leaves.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ITreeNode {
    Split {
        feature: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    /// Training-subsample rows that reached this leaf.
    Leaf { size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ITree {
    pub nodes: Vec<ITreeNode>,
}

impl ITree {
    /// `h(x)`: edges traversed plus `c(size)` at the leaf.
    pub fn path_length(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        let mut depth = 0.0;
        loop {
            match &self.nodes[at] {
                ITreeNode::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    at = if row[*feature] < *value { *left } else { *right };
                    depth += 1.0;
                }
                ITreeNode::Leaf { size } => return depth + average_path_length(*size),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    pub trees: Vec<ITree>,
    /// Subsample size ψ.
    pub subsample: usize,
    pub height_limit: usize,
    pub n_features: usize,
    pub seed: u64,
}

impl IsolationForest {
    /// Fits 100 trees, each on its own ψ-subsample drawn without
    /// replacement from a per-tree stream.
    pub fn fit(x: &Matrix, seed: u64) -> Result<Self> {
        if x.rows() < 2 || x.cols() == 0 {
            return Err(Error::invalid("isolation forest needs at least 2 rows and 1 column"));
        }
        let psi = x.rows().min(MAX_SUBSAMPLE);
        let height_limit = (psi as f64).log2().ceil() as usize;
        let trees = (0..N_TREES as u64)
            .into_par_iter()
            .map(|t| {
                let mut r = rng::rng(rng::derive(seed, t));
                let mut rows = index::sample(&mut r, x.rows(), psi).into_vec();
                rows.sort_unstable();
                grow(x, rows, height_limit, &mut r)
            })
            .collect();
        Ok(IsolationForest {
            trees,
            subsample: psi,
            height_limit,
            n_features: x.cols(),
            seed,
        })
    }

    /// Builds a forest from explicit trees (for audits and hand traces).
    pub fn from_trees(trees: Vec<ITree>, subsample: usize, n_features: usize) -> Self {
        IsolationForest {
            trees,
            subsample,
            height_limit: (subsample.max(1) as f64).log2().ceil() as usize,
            n_features,
            seed: 0,
        }
    }

    /// `s(x) = 2^(−E[h(x)] / c(ψ))`, in (0, 1); larger is more anomalous.
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_features {
            return Err(Error::invalid(format!(
                "isolation forest fitted on {} columns, got {}",
                self.n_features,
                x.cols()
            )));
        }
        let norm = average_path_length(self.subsample);
        Ok((0..x.rows())
            .into_par_iter()
            .map(|i| {
                let row = x.row(i);
                let mean = self.trees.iter().map(|t| t.path_length(row)).sum::<f64>() / self.trees.len() as f64;
                if norm > 0.0 {
                    2f64.powf(-mean / norm)
                } else {
                    0.5
                }
            })
            .collect())
    }
}

fn grow(x: &Matrix, rows: Vec<usize>, height_limit: usize, r: &mut rng::Rng) -> ITree {
    let mut nodes = Vec::new();
    let mut stack = vec![(rows, 0usize, usize::MAX, false)];
    while let Some((rows, depth, parent, is_right)) = stack.pop() {
        let id = nodes.len();
        if parent != usize::MAX {
            if let ITreeNode::Split { left, right, .. } = &mut nodes[parent] {
                if is_right {
                    *right = id;
                } else {
                    *left = id;
                }
            }
        }
        let leaf = ITreeNode::Leaf { size: rows.len() };
        if depth >= height_limit || rows.len() <= 1 {
            nodes.push(leaf);
            continue;
        }
        let splittable: Vec<(usize, f64, f64)> = (0..x.cols())
            .filter_map(|f| {
                let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.min(x[(i, f)]), hi.max(x[(i, f)]))
                });
                (hi > lo).then_some((f, lo, hi))
            })
            .collect();
        if splittable.is_empty() {
            nodes.push(leaf);
            continue;
        }
        let (feature, lo, hi) = splittable[r.random_range(0..splittable.len())];
        let value = split_value(lo, hi, r);
        let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[(i, feature)] < value);
        nodes.push(ITreeNode::Split {
            feature,
            value,
            left: usize::MAX,
            right: usize::MAX,
        });
        stack.push((right, depth + 1, id, true));
        stack.push((left, depth + 1, id, false));
    }
    ITree { nodes }
}

/// Uniform draw strictly inside `(lo, hi)`. When the range is only a few
/// ulps wide and no draw lands inside, `hi` is used: `x < hi` still
/// separates the node's rows.
fn split_value(lo: f64, hi: f64, r: &mut rng::Rng) -> f64 {
    for _ in 0..16 {
        let v = lo + r.random::<f64>() * (hi - lo);
        if v > lo && v < hi {
            return v;
        }
    }
    hi
}

/// Thresholded detections on held-out rows.
#[derive(Debug, Clone)]
pub struct Detection {
    pub threshold: f64,
    pub scores: Vec<f64>,
    pub predictions: Vec<bool>,
}

/// Threshold = `(1 − contamination)` quantile of the training scores;
/// `predicted = score > threshold`.
pub fn detect(
    model: &IsolationForest,
    train_scores: &[f64],
    x_test: &Matrix,
    contamination: f64,
) -> Result<Detection> {
    if !(contamination > 0.0 && contamination <= 0.5) {
        return Err(Error::invalid(format!("contamination {contamination} outside (0, 0.5]")));
    }
    if train_scores.is_empty() {
        return Err(Error::invalid("no training scores"));
    }
    let threshold = quantile(train_scores, 1.0 - contamination);
    let scores = model.score(x_test)?;
    let predictions = scores.iter().map(|&s| s > threshold).collect();
    Ok(Detection {
        threshold,
        scores,
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_length_normaliser() {
        assert_eq!(average_path_length(1), 0.0);
        assert_eq!(average_path_length(2), 1.0);
        let c3 = 2.0 * (2f64.ln() + EULER_GAMMA) - 4.0 / 3.0;
        assert!((average_path_length(3) - c3).abs() < 1e-15);
        // c(256) ≈ 10.2448
        assert!((average_path_length(256) - 10.244_770_920_8).abs() < 1e-6);
    }

    #[test]
    fn hand_traced_single_tree() {
        // split x<2.5 → left leaf {0,1} (size 2); right: split x<3.5 → {3}, {4}
        let tree = ITree {
            nodes: vec![
                ITreeNode::Split { feature: 0, value: 2.5, left: 1, right: 2 },
                ITreeNode::Leaf { size: 2 },
                ITreeNode::Split { feature: 0, value: 3.5, left: 3, right: 4 },
                ITreeNode::Leaf { size: 1 },
                ITreeNode::Leaf { size: 1 },
            ],
        };
        let forest = IsolationForest::from_trees(vec![tree], 4, 1);
        let x = Matrix::from_rows(&[[0.0], [1.0], [3.0], [10.0]]);
        let s = forest.score(&x).unwrap();
        let c4 = 2.0 * (3f64.ln() + EULER_GAMMA) - 1.5;
        // h = 1 + c(2) = 2 for the left pair, 2 for each right point
        let want = 2f64.powf(-2.0 / c4);
        for v in s {
            assert!((v - want).abs() < 1e-12);
        }
        // depth equal to c(ψ) gives exactly 0.5
        let flat = IsolationForest::from_trees(vec![ITree { nodes: vec![ITreeNode::Leaf { size: 4 }] }], 4, 1);
        assert!((flat.score(&x).unwrap()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_data_scores_identically() {
        let x = Matrix::from_rows(&vec![[1.0, 2.0]; 30]);
        let f = IsolationForest::fit(&x, 3).unwrap();
        let s = f.score(&x).unwrap();
        assert!(s.iter().all(|&v| v == s[0]));
        assert!(f.trees.iter().all(|t| t.nodes.len() == 1));
    }

    #[test]
    fn adjacent_float_range_still_splits() {
        let lo = 0.1f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let x = Matrix::from_rows(&[[lo], [hi], [lo], [hi]]);
        let f = IsolationForest::fit(&x, 5).unwrap();
        assert!(f.trees.iter().all(|t| matches!(t.nodes[0], ITreeNode::Split { value, .. } if value == hi)));
    }

    #[test]
    fn refit_is_identical() {
        let x = Matrix::from_rows(&(0..50).map(|i| [(i * 7 % 13) as f64, (i % 5) as f64]).collect::<Vec<_>>());
        let a = IsolationForest::fit(&x, 9).unwrap();
        let b = IsolationForest::fit(&x, 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.subsample, 50);
        assert_eq!(a.height_limit, 6);
    }

    #[test]
    fn width_mismatch_and_bad_contamination() {
        let x = Matrix::from_rows(&(0..10).map(|i| [i as f64]).collect::<Vec<_>>());
        let f = IsolationForest::fit(&x, 1).unwrap();
        assert!(f.score(&Matrix::zeros(2, 2)).is_err());
        let train = f.score(&x).unwrap();
        assert!(detect(&f, &train, &x, 0.0).is_err());
        assert!(detect(&f, &train, &x, 0.6).is_err());
        let d = detect(&f, &train, &x, 0.5).unwrap();
        assert_eq!(d.threshold, quantile(&train, 0.5));
    }
}
