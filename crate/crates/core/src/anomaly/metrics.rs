use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transfer Gain Index stabiliser.
pub const TGI_EPSILON: f64 = 1e-6;

/// Relative improvement of the transfer metric over the baseline.
pub fn transfer_gain(m_t: f64, m_nt: f64) -> f64 {
    (m_t - m_nt) / (m_nt + TGI_EPSILON)
}

/// Mann–Whitney AUC with ties counted as one half. `None` unless both
/// classes are present.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let ranks = crate::stats::average_ranks(scores);
    let pos_rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Step-wise average precision: `Σ_k (R_k − R_{k−1}) P_k` over distinct
/// score thresholds in descending order (tied scores enter together).
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut ap, mut prev_recall) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            tp += labels[order[i]] as usize;
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        ap += (recall - prev_recall) * (tp as f64 / seen as f64);
        prev_recall = recall;
    }
    Some(ap)
}

/// Binary F1 of the positive class for `predicted = score > threshold`.
pub fn f1_at(scores: &[f64], labels: &[bool], threshold: f64) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s > threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub roc_auc: f64,
    pub average_precision: f64,
    pub f1: f64,
    pub threshold: f64,
}

pub fn detection_metrics(scores: &[f64], labels: &[bool], threshold: f64) -> Result<DetectionMetrics> {
    if scores.len() != labels.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    let (Some(roc), Some(ap)) = (roc_auc(scores, labels), average_precision(scores, labels)) else {
        return Err(Error::invalid("AUC/AP undefined: labels contain a single class"));
    };
    Ok(DetectionMetrics {
        roc_auc: roc,
        average_precision: ap,
        f1: f1_at(scores, labels, threshold),
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_six_points() {
        let scores = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4];
        let labels = [true, false, true, false, false, false];
        let m = detection_metrics(&scores, &labels, 0.65).unwrap();
        assert!((m.roc_auc - 0.875).abs() < 1e-12);
        assert!((m.average_precision - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        // predicted {0.9, 0.8, 0.7}: tp 2, fp 1, fn 0
        assert!((m.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn perfect_separation() {
        let scores = [0.1, 0.2, 0.9, 0.95, 0.3];
        let labels = [false, false, true, true, false];
        let m = detection_metrics(&scores, &labels, 0.5).unwrap();
        assert_eq!((m.roc_auc, m.average_precision, m.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn ties_count_half() {
        assert_eq!(roc_auc(&[0.5, 0.5], &[true, false]), Some(0.5));
        // all tied: one threshold, precision = prevalence
        assert_eq!(average_precision(&[1.0; 4], &[true, false, false, false]), Some(0.25));
    }

    #[test]
    fn single_class_is_undefined() {
        assert_eq!(roc_auc(&[0.1, 0.2], &[true, true]), None);
        assert!(detection_metrics(&[0.1, 0.2], &[false, false], 0.5).is_err());
    }

    #[test]
    fn tgi_values() {
        assert!(transfer_gain(0.5, 0.5).abs() < 1e-12);
        let g = transfer_gain(0.532, 0.341);
        assert!((g - 0.5601).abs() < 1e-3, "{g}");
        assert!((transfer_gain(0.5, 0.0) - 5e5).abs() < 1e-6);
    }
}
