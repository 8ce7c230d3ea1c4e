//! Domain-classification study: per seed, train the three classifiers on
//! a subsample of every domain, score a holdout and collect importance
//! ranks for the Borda consensus.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::classify::{evaluate_multiclass, importance_ranks, train_classifier, train_test_split, ModelKind, MulticlassMetrics};
use crate::error::{Error, Result};
use crate::features::{standardize, FeatureMatrix, NUM_FEATURES};
use crate::fmt::g12;
use crate::graph::{sample_indices, Domain};
use crate::iit::{borda_scores, BordaScore, RankRecord};
use crate::linalg::Matrix;
use crate::rng;

pub const HOLDOUT_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Serialize)]
pub struct ModelRun {
    pub model: ModelKind,
    pub seed: u64,
    pub metrics: MulticlassMetrics,
    pub importance: Vec<f64>,
    pub ranks: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifierStudy {
    pub domains: Vec<Domain>,
    pub runs: Vec<ModelRun>,
    pub borda: BordaScore,
}

/// For each seed: draw `per_domain` rows of every domain (or all rows when
/// the pool is that small), split 80/20, standardise on the training part
/// and fit RF, GB and LR.
pub fn classifier_study(pools: &BTreeMap<Domain, FeatureMatrix>, seeds: &[u64], per_domain: usize) -> Result<ClassifierStudy> {
    if pools.len() < 2 {
        return Err(Error::invalid("classification needs at least two domains"));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("no seeds given"));
    }
    let domains: Vec<Domain> = pools.keys().copied().collect();
    let jobs: Vec<(u64, ModelKind)> = seeds
        .iter()
        .flat_map(|&s| ModelKind::ALL.into_iter().map(move |m| (s, m)))
        .collect();
    let prepared = seeds
        .par_iter()
        .map(|&seed| prepare_seed(pools, seed, per_domain).map(|d| (seed, d)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let runs = jobs
        .par_iter()
        .map(|&(seed, kind)| {
            let d = &prepared[&seed];
            let model = train_classifier(kind, &d.x_train, &d.y_train, seed)?;
            let metrics = evaluate_multiclass(&model, &d.x_test, &d.y_test)?;
            let ranks = importance_ranks(&model.importance);
            log::debug!("{kind} seed {seed}: accuracy {:.4}", metrics.accuracy);
            Ok(ModelRun {
                model: kind,
                seed,
                metrics,
                importance: model.importance,
                ranks,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<RankRecord> = runs
        .iter()
        .map(|r| RankRecord {
            model: r.model,
            seed: r.seed,
            ranks: r.ranks.clone(),
        })
        .collect();
    Ok(ClassifierStudy {
        domains,
        borda: borda_scores(&records)?,
        runs,
    })
}

struct SeedData {
    x_train: Matrix,
    y_train: Vec<usize>,
    x_test: Matrix,
    y_test: Vec<usize>,
}

fn prepare_seed(pools: &BTreeMap<Domain, FeatureMatrix>, seed: u64, per_domain: usize) -> Result<SeedData> {
    let mut parts = Vec::new();
    let mut labels = Vec::new();
    for (class, (domain, pool)) in pools.iter().enumerate() {
        let n = per_domain.min(pool.len());
        let idx = sample_indices(pool.len(), n, rng::derive_str(seed, &format!("classify|{domain}")))?;
        parts.push(pool.subset(&idx));
        labels.extend(std::iter::repeat_n(class, n));
    }
    let all = FeatureMatrix::concat(&parts.iter().collect::<Vec<_>>());
    let (train, test) = train_test_split(all.len(), HOLDOUT_FRACTION, rng::derive_str(seed, "classify|split"));
    let train_m = all.subset(&train);
    let params = standardize(&train_m)?.params;
    let to_matrix = |m: &FeatureMatrix| {
        let data: Vec<f64> = m.rows.iter().flat_map(|r| params.apply(r)).collect();
        Matrix::from_vec(m.len(), NUM_FEATURES, data)
    };
    Ok(SeedData {
        x_train: to_matrix(&train_m),
        y_train: train.iter().map(|&i| labels[i]).collect(),
        x_test: to_matrix(&all.subset(&test)),
        y_test: test.iter().map(|&i| labels[i]).collect(),
    })
}

impl ClassifierStudy {
    /// `model,seed,accuracy,f1_macro,roc_auc`
    pub fn write_metrics_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "seed", "accuracy", "f1_macro", "roc_auc"])?;
        for r in &self.runs {
            w.write_record([
                r.model.to_string(),
                r.seed.to_string(),
                g12(r.metrics.accuracy),
                g12(r.metrics.f1_macro),
                g12(r.metrics.roc_auc),
            ])?;
        }
        w.flush().map_err(|e| Error::io("metrics", e))?;
        Ok(())
    }

    /// Row-normalised confusion matrices summed over seeds, one block per model.
    pub fn write_confusion_csv(&self, out: impl Write) -> Result<()> {
        let k = self.domains.len();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["model".to_string(), "true".to_string()];
        header.extend(self.domains.iter().map(|d| d.to_string()));
        w.write_record(&header)?;
        for kind in ModelKind::ALL {
            let mut counts = vec![vec![0usize; k]; k];
            for r in self.runs.iter().filter(|r| r.model == kind) {
                for (i, row) in r.metrics.confusion.iter().enumerate() {
                    for (j, c) in row.iter().enumerate() {
                        counts[i][j] += c;
                    }
                }
            }
            for (i, row) in counts.iter().enumerate() {
                let total: usize = row.iter().sum();
                let mut rec = vec![kind.to_string(), self.domains[i].to_string()];
                rec.extend(row.iter().map(|&c| g12(if total == 0 { 0.0 } else { c as f64 / total as f64 })));
                w.write_record(&rec)?;
            }
        }
        w.flush().map_err(|e| Error::io("confusion", e))?;
        Ok(())
    }

    /// `model,seed,<12 feature ranks>`
    pub fn write_ranks_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["model".to_string(), "seed".to_string()];
        header.extend(crate::features::Feature::ALL.iter().map(|f| f.name().to_string()));
        w.write_record(&header)?;
        for r in &self.runs {
            let mut rec = vec![r.model.to_string(), r.seed.to_string()];
            rec.extend(r.ranks.iter().map(|&v| g12(v)));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("ranks", e))?;
        Ok(())
    }
}
