use rand::Rng as _;
use rayon::prelude::*;

use super::tree::{fit_classification_tree, ClassLeaf, Tree};
use crate::linalg::Matrix;
use crate::rng;

pub const N_TREES: usize = 100;

/// Bagged Gini trees with √p candidate features per split.
#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<Tree<ClassLeaf>>,
    n_classes: usize,
    /// Mean over trees of each tree's normalised impurity decrease.
    pub importance: Vec<f64>,
}

impl RandomForest {
    pub fn fit(x: &Matrix, y: &[usize], n_classes: usize, seed: u64) -> Self {
        let n = x.rows();
        let p = x.cols();
        let max_features = (p as f64).sqrt().ceil() as usize;
        let fits: Vec<_> = (0..N_TREES as u64)
            .into_par_iter()
            .map(|t| {
                let mut r = rng::rng(rng::derive(seed, t));
                let boot: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
                fit_classification_tree(x, y, n_classes, boot, max_features, &mut r)
            })
            .collect();
        let mut importance = vec![0.0; p];
        for f in &fits {
            let total: f64 = f.importance.iter().sum();
            if total > 0.0 {
                for (acc, v) in importance.iter_mut().zip(&f.importance) {
                    *acc += v / total;
                }
            }
        }
        for v in &mut importance {
            *v /= N_TREES as f64;
        }
        RandomForest {
            trees: fits.into_iter().map(|f| f.tree).collect(),
            n_classes,
            importance,
        }
    }

    /// Mean of the leaf class frequencies over trees.
    pub fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>> {
        (0..x.rows())
            .into_par_iter()
            .map(|i| {
                let row = x.row(i);
                let mut acc = vec![0.0; self.n_classes];
                for t in &self.trees {
                    for (a, v) in acc.iter_mut().zip(t.leaf(row)) {
                        *a += v;
                    }
                }
                acc.iter().map(|a| a / self.trees.len() as f64).collect()
            })
            .collect()
    }
}
