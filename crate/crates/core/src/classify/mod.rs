//! Domain classifiers (random forest, gradient boosting, logistic
//! regression) and the importance ranks that feed the Borda consensus.

mod boost;
mod forest;
mod logistic;
pub mod metrics;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use boost::GradientBoosting;
pub use forest::RandomForest;
pub use logistic::{LogisticFit, LogisticRegression, GRAD_TOL, MAX_ITER};
pub use metrics::{evaluate_multiclass, MulticlassMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    RF,
    GB,
    LR,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::RF, ModelKind::GB, ModelKind::LR];
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::RF => "RF",
            ModelKind::GB => "GB",
            ModelKind::LR => "LR",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RF" => Ok(ModelKind::RF),
            "GB" => Ok(ModelKind::GB),
            "LR" => Ok(ModelKind::LR),
            _ => Err(Error::invalid(format!("unknown model `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
enum Params {
    RF(RandomForest),
    GB(GradientBoosting),
    LR(LogisticRegression),
}

/// A fitted classifier with its normalised feature importances.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub seed: u64,
    pub n_classes: usize,
    /// Non-negative, sums to 1.
    pub importance: Vec<f64>,
    params: Params,
}

pub const MIN_TRAIN_ROWS: usize = 20;

/// Trains `kind` on standardised features `x` with class labels `y`
/// (`0..n_classes`).
pub fn train_classifier(kind: ModelKind, x: &Matrix, y: &[usize], seed: u64) -> Result<TrainedModel> {
    if x.rows() != y.len() {
        return Err(Error::invalid("feature/label length mismatch"));
    }
    if x.rows() < MIN_TRAIN_ROWS {
        return Err(Error::invalid(format!(
            "need at least {MIN_TRAIN_ROWS} training rows, got {}",
            x.rows()
        )));
    }
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let mut present = vec![false; n_classes];
    for &c in y {
        present[c] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::invalid("training labels contain a single class"));
    }
    let (params, raw) = match kind {
        ModelKind::RF => {
            let m = RandomForest::fit(x, y, n_classes, seed);
            let imp = m.importance.clone();
            (Params::RF(m), imp)
        }
        ModelKind::GB => {
            let m = GradientBoosting::fit(x, y, n_classes);
            let imp = m.importance.clone();
            (Params::GB(m), imp)
        }
        ModelKind::LR => {
            let m = LogisticRegression::fit(x, y, n_classes)?.model;
            let imp = m.importance();
            (Params::LR(m), imp)
        }
    };
    Ok(TrainedModel {
        kind,
        seed,
        n_classes,
        importance: normalize(raw),
        params,
    })
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.into_iter().map(|x| x / total).collect()
    } else {
        let n = v.len() as f64;
        vec![1.0 / n; v.len()]
    }
}

impl TrainedModel {
    /// Class-probability rows.
    pub fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>> {
        match &self.params {
            Params::RF(m) => m.predict_proba(x),
            Params::GB(m) => m.predict_proba(x),
            Params::LR(m) => m.predict_proba(x),
        }
    }

    /// Training deviance after each boosting stage (GB only).
    pub fn deviance_trace(&self) -> Option<&[f64]> {
        match &self.params {
            Params::GB(m) => Some(&m.train_deviance),
            _ => None,
        }
    }

    pub fn logistic(&self) -> Option<&LogisticRegression> {
        match &self.params {
            Params::LR(m) => Some(m),
            _ => None,
        }
    }
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = k;
        }
    }
    best
}

/// Importance ranks: 1 = most important, exact ties by feature index.
pub fn importance_ranks(importance: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; importance.len()];
    for (r, &f) in order.iter().enumerate() {
        ranks[f] = (r + 1) as f64;
    }
    ranks
}

/// Seeded shuffle split into (train, test) row indices; each side sorted.
pub fn train_test_split(n: usize, test_frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut crate::rng::rng(seed));
    let n_test = ((n as f64) * test_frac).round() as usize;
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_follow_importance_with_index_ties() {
        let mut imp = vec![0.0; 12];
        imp[0] = 0.5;
        imp[1] = 0.3;
        imp[2] = 0.2;
        let r = importance_ranks(&imp);
        let want: Vec<f64> = (1..=12).map(|x| x as f64).collect();
        assert_eq!(r, want);
        assert_eq!(importance_ranks(&[1.0 / 12.0; 12]), want);
        let r = importance_ranks(&[0.1, 0.4, 0.1, 0.4]);
        assert_eq!(r, vec![3.0, 1.0, 4.0, 2.0]);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = Matrix::zeros(30, 2);
        let y = vec![1; 30];
        for kind in ModelKind::ALL {
            assert!(train_classifier(kind, &x, &y, 1).is_err());
        }
        assert!(train_classifier(ModelKind::RF, &Matrix::zeros(10, 2), &[0, 1, 0, 1, 0, 1, 0, 1, 0, 1], 1).is_err());
    }

    #[test]
    fn split_is_a_partition() {
        let (tr, te) = train_test_split(100, 0.2, 3);
        assert_eq!(te.len(), 20);
        let mut all = [tr, te].concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }
}
