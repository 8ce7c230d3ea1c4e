use rayon::prelude::*;

use super::tree::{fit_regression_tree, Tree};
use crate::linalg::Matrix;

pub const N_STAGES: usize = 100;
pub const MAX_DEPTH: usize = 3;
pub const LEARNING_RATE: f64 = 0.1;

/// Multinomial-deviance gradient boosting: one least-squares tree per class
/// per stage, Newton-step leaf values.
#[derive(Debug, Clone)]
pub struct GradientBoosting {
    init: Vec<f64>,
    stages: Vec<Vec<Tree<f64>>>,
    /// Summed impurity decrease over every tree.
    pub importance: Vec<f64>,
    /// Mean training deviance after each stage.
    pub train_deviance: Vec<f64>,
}

fn softmax(f: &[f64]) -> Vec<f64> {
    let max = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = f.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn deviance(scores: &[Vec<f64>], y: &[usize]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(y)
        .map(|(f, &c)| {
            let max = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + f.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - f[c]
        })
        .sum();
    total / y.len() as f64
}

impl GradientBoosting {
    pub fn fit(x: &Matrix, y: &[usize], n_classes: usize) -> Self {
        let n = x.rows();
        let k = n_classes as f64;
        let mut counts = vec![0.0f64; n_classes];
        for &c in y {
            counts[c] += 1.0;
        }
        // classes absent from y get a tiny prior instead of log(0)
        let init: Vec<f64> = counts.iter().map(|c| (c.max(1e-3) / n as f64).ln()).collect();
        let mut scores = vec![init.clone(); n];
        let mut stages = Vec::with_capacity(N_STAGES);
        let mut importance = vec![0.0; x.cols()];
        let mut train_deviance = Vec::with_capacity(N_STAGES);
        for _ in 0..N_STAGES {
            let probs: Vec<Vec<f64>> = scores.iter().map(|f| softmax(f)).collect();
            let fits: Vec<_> = (0..n_classes)
                .into_par_iter()
                .map(|c| {
                    let resid: Vec<f64> = (0..n)
                        .map(|i| (y[i] == c) as u8 as f64 - probs[i][c])
                        .collect();
                    fit_regression_tree(x, &resid, MAX_DEPTH, |rows| {
                        let num: f64 = rows.iter().map(|&r| resid[r]).sum();
                        let den: f64 = rows.iter().map(|&r| resid[r].abs() * (1.0 - resid[r].abs())).sum();
                        if den < 1e-150 {
                            0.0
                        } else {
                            (k - 1.0) / k * num / den
                        }
                    })
                })
                .collect();
            for (c, fit) in fits.iter().enumerate() {
                for (i, s) in scores.iter_mut().enumerate() {
                    if let super::tree::Node::Leaf(v) = fit.tree.nodes[fit.leaf_of_row[i]] {
                        s[c] += LEARNING_RATE * v;
                    }
                }
                for (acc, v) in importance.iter_mut().zip(&fit.importance) {
                    *acc += v;
                }
            }
            stages.push(fits.into_iter().map(|f| f.tree).collect());
            train_deviance.push(deviance(&scores, y));
        }
        GradientBoosting {
            init,
            stages,
            importance,
            train_deviance,
        }
    }

    fn raw_scores(&self, row: &[f64]) -> Vec<f64> {
        let mut f = self.init.clone();
        for stage in &self.stages {
            for (c, tree) in stage.iter().enumerate() {
                f[c] += LEARNING_RATE * tree.leaf(row);
            }
        }
        f
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>> {
        (0..x.rows())
            .into_par_iter()
            .map(|i| softmax(&self.raw_scores(x.row(i))))
            .collect()
    }
}
