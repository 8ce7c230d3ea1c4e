use serde::Serialize;

use super::{argmax, TrainedModel};
use crate::anomaly::metrics::roc_auc;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Serialize)]
pub struct MulticlassMetrics {
    pub accuracy: f64,
    pub f1_macro: f64,
    /// Macro one-vs-rest AUC over classes present in the test labels.
    pub roc_auc: f64,
    /// Counts; `confusion[true][pred]`.
    pub confusion: Vec<Vec<usize>>,
    /// Classes whose one-vs-rest AUC was skipped (absent from the labels).
    pub skipped_auc_classes: Vec<usize>,
}

impl MulticlassMetrics {
    pub fn row_normalized_confusion(&self) -> Vec<Vec<f64>> {
        self.confusion
            .iter()
            .map(|row| {
                let total: usize = row.iter().sum();
                row.iter()
                    .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                    .collect()
            })
            .collect()
    }
}

pub fn evaluate_multiclass(model: &TrainedModel, x: &Matrix, y: &[usize]) -> Result<MulticlassMetrics> {
    if y.is_empty() || x.rows() != y.len() {
        return Err(Error::invalid("test set must be non-empty and match the labels"));
    }
    let proba = model.predict_proba(x);
    Ok(metrics_from_proba(&proba, y, model.n_classes))
}

/// Metrics from class-probability rows; predictions are the argmax.
pub fn metrics_from_proba(proba: &[Vec<f64>], y: &[usize], n_classes: usize) -> MulticlassMetrics {
    let pred: Vec<usize> = proba.iter().map(|p| argmax(p)).collect();
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in y.iter().zip(&pred) {
        confusion[t][p] += 1;
    }
    let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
    let accuracy = correct as f64 / y.len() as f64;

    let mut f1_sum = 0.0;
    let mut f1_count = 0;
    for c in 0..n_classes {
        let tp = confusion[c][c] as f64;
        let actual: usize = confusion[c].iter().sum();
        let predicted: usize = confusion.iter().map(|r| r[c]).sum();
        if actual == 0 && predicted == 0 {
            continue;
        }
        f1_count += 1;
        let denom = (actual + predicted) as f64;
        f1_sum += if denom == 0.0 { 0.0 } else { 2.0 * tp / denom };
    }
    let f1_macro = if f1_count == 0 { 0.0 } else { f1_sum / f1_count as f64 };

    let mut aucs = Vec::new();
    let mut skipped = Vec::new();
    for c in 0..n_classes {
        let labels: Vec<bool> = y.iter().map(|&t| t == c).collect();
        let scores: Vec<f64> = proba.iter().map(|p| p[c]).collect();
        match roc_auc(&scores, &labels) {
            Some(a) => aucs.push(a),
            None => skipped.push(c),
        }
    }
    let roc_auc = if aucs.is_empty() {
        f64::NAN
    } else {
        aucs.iter().sum::<f64>() / aucs.len() as f64
    };
    MulticlassMetrics {
        accuracy,
        f1_macro,
        roc_auc,
        confusion,
        skipped_auc_classes: skipped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(c: usize, k: usize) -> Vec<f64> {
        (0..k).map(|i| (i == c) as u8 as f64).collect()
    }

    #[test]
    fn perfect_predictor() {
        let y: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let proba: Vec<_> = y.iter().map(|&c| one_hot(c, 4)).collect();
        let m = metrics_from_proba(&proba, &y, 4);
        assert_eq!((m.accuracy, m.f1_macro, m.roc_auc), (1.0, 1.0, 1.0));
    }

    #[test]
    fn constant_predictor_on_balanced_classes() {
        let y: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let proba: Vec<_> = y.iter().map(|_| one_hot(0, 4)).collect();
        let m = metrics_from_proba(&proba, &y, 4);
        assert_eq!(m.accuracy, 0.25);
        // class 0: precision 0.25, recall 1 → F1 0.4; others 0
        assert!((m.f1_macro - 0.1).abs() < 1e-12);
        // every score tied within a class → AUC 0.5 everywhere
        assert!((m.roc_auc - 0.5).abs() < 1e-12);
        assert_eq!(m.row_normalized_confusion()[1], vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn absent_class_is_skipped() {
        let y = vec![0, 1, 0, 1];
        let proba = vec![vec![0.7, 0.2, 0.1], vec![0.2, 0.7, 0.1], vec![0.6, 0.3, 0.1], vec![0.1, 0.8, 0.1]];
        let m = metrics_from_proba(&proba, &y, 3);
        assert_eq!(m.skipped_auc_classes, vec![2]);
        assert_eq!(m.roc_auc, 1.0);
    }
}
