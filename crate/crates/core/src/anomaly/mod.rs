//! Ground-truth labelling by extremeness, Isolation Forest detection and
//! transfer-gain bookkeeping.

pub mod iforest;
pub mod metrics;

use crate::error::{Error, Result};
use crate::features::{standardize, FeatureMatrix};

pub use iforest::{average_path_length, detect, IsolationForest};
pub use metrics::{detection_metrics, transfer_gain, DetectionMetrics};

/// Type-7 (linear interpolation) sample quantile.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyLabels {
    /// Extremeness index per row.
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub threshold: f64,
}

pub const LABEL_QUANTILE: f64 = 0.9;
pub const MIN_LABEL_ROWS: usize = 10;

/// Labels the top decile of `S_i = Σ_j |z_ij|` (within-domain z-scores over
/// all twelve descriptors) as anomalous.
pub fn label_anomalies(features: &FeatureMatrix) -> Result<AnomalyLabels> {
    if features.len() < MIN_LABEL_ROWS {
        return Err(Error::invalid(format!(
            "anomaly labelling needs at least {MIN_LABEL_ROWS} rows, got {}",
            features.len()
        )));
    }
    if let Some(d) = features.domains.first() {
        if features.domains.iter().any(|x| x != d) {
            return Err(Error::invalid("anomaly labelling expects a single-domain matrix"));
        }
    }
    let z = standardize(features)?.z;
    let scores: Vec<f64> = z.iter().map(|row| row.iter().map(|v| v.abs()).sum()).collect();
    let threshold = quantile(&scores, LABEL_QUANTILE);
    let labels = scores.iter().map(|&s| s > threshold).collect();
    Ok(AnomalyLabels {
        scores,
        labels,
        threshold,
    })
}
