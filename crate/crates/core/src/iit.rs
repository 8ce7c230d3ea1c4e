//! Importance-inversion anchor selection.
//!
//! A descriptor is a good transfer anchor when classifiers find it *least*
//! useful for telling domains apart (high Borda rank), when it relates to
//! the other descriptors the same way in both domains (ρ), and when its
//! mean barely shifts between them (Δ):
//!
//! ```text
//! iit(f) = B(f) · ρ(f) / (1 + Δ(f))
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::classify::ModelKind;
use crate::error::{Error, Result};
use crate::features::{compensated_sum, Feature, NUM_FEATURES};
use crate::fmt::g12;
use crate::graph::Domain;
use crate::stats::spearman;

pub const N_ANCHORS: usize = 8;

/// One importance ranking (1 = most important) from one model and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RankRecord {
    pub model: ModelKind,
    pub seed: u64,
    pub ranks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BordaScore {
    /// Mean rank per feature over every (model, seed) record.
    pub scores: Vec<f64>,
    /// Mean rank per feature per model, over that model's seeds.
    pub per_model: BTreeMap<ModelKind, Vec<f64>>,
}

pub fn borda_scores(records: &[RankRecord]) -> Result<BordaScore> {
    let p = records
        .first()
        .map(|r| r.ranks.len())
        .ok_or_else(|| Error::invalid("Borda aggregation needs at least one ranking"))?;
    if records.iter().any(|r| r.ranks.len() != p) {
        return Err(Error::invalid("rank vectors have inconsistent feature counts"));
    }
    let mean_of = |rs: &[&RankRecord]| -> Vec<f64> {
        (0..p)
            .map(|i| rs.iter().map(|r| r.ranks[i]).sum::<f64>() / rs.len() as f64)
            .collect()
    };
    let all: Vec<&RankRecord> = records.iter().collect();
    let mut per_model = BTreeMap::new();
    for kind in ModelKind::ALL {
        let rs: Vec<&RankRecord> = records.iter().filter(|r| r.model == kind).collect();
        if !rs.is_empty() {
            per_model.insert(kind, mean_of(&rs));
        }
    }
    Ok(BordaScore {
        scores: mean_of(&all),
        per_model,
    })
}

/// Borda score from per-model mean ranks (equal weight per model).
pub fn borda_from_model_means(model_means: &[f64]) -> f64 {
    model_means.iter().sum::<f64>() / model_means.len() as f64
}

/// How the cross-domain consistency term ρ is computed.
pub trait RhoStrategy: Sync {
    fn rho(&self, source: &[[f64; NUM_FEATURES]], target: &[[f64; NUM_FEATURES]], feature: usize) -> Result<f64>;
}

/// Correlation-profile consistency: within each domain, the Spearman
/// correlations of feature `i` with every other feature form a profile; ρ is
/// the Spearman correlation between the source and target profiles.
#[derive(Debug, Clone, Copy, Default)]
pub struct CorrelationProfile;

pub const MIN_RHO_ROWS: usize = 3;

pub fn correlation_profile(rows: &[[f64; NUM_FEATURES]], feature: usize) -> Vec<f64> {
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let own = col(feature);
    (0..NUM_FEATURES)
        .filter(|&j| j != feature)
        .map(|j| spearman(&own, &col(j)))
        .collect()
}

impl RhoStrategy for CorrelationProfile {
    fn rho(&self, source: &[[f64; NUM_FEATURES]], target: &[[f64; NUM_FEATURES]], feature: usize) -> Result<f64> {
        if source.len() < MIN_RHO_ROWS || target.len() < MIN_RHO_ROWS {
            return Err(Error::invalid("rank consistency needs at least 3 rows per domain"));
        }
        Ok(spearman(
            &correlation_profile(source, feature),
            &correlation_profile(target, feature),
        ))
    }
}

pub fn rho_consistency(source: &[[f64; NUM_FEATURES]], target: &[[f64; NUM_FEATURES]], feature: usize) -> Result<f64> {
    CorrelationProfile.rho(source, target, feature)
}

/// |mean z over S − mean z over T| after z-scoring the pooled column.
/// Symmetric in its arguments bit for bit.
pub fn mean_shift(source: &[f64], target: &[f64]) -> f64 {
    let (ns, nt) = (source.len() as f64, target.len() as f64);
    let n = ns + nt;
    let sum_s = compensated_sum(source.iter().copied());
    let sum_t = compensated_sum(target.iter().copied());
    let mu = (sum_s + sum_t) / n;
    let ss = |xs: &[f64]| compensated_sum(xs.iter().map(|x| (x - mu) * (x - mu)));
    let sd = ((ss(source) + ss(target)) / n).sqrt();
    if !(sd >= crate::features::CONSTANT_STD) {
        return 0.0;
    }
    ((sum_s / ns - mu) / sd - (sum_t / nt - mu) / sd).abs()
}

pub fn iit_score(b: f64, rho: f64, delta: f64) -> f64 {
    b * rho / (1.0 + delta)
}

/// Indices of the `k` largest scores; ties by lower index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IitTable {
    pub source: Domain,
    pub target: Domain,
    pub borda: Vec<f64>,
    pub rho: Vec<f64>,
    pub delta: Vec<f64>,
    pub iit: Vec<f64>,
    /// Top-8 feature indices by iit, best first.
    pub anchors: Vec<usize>,
    /// Mean iit over the anchors.
    pub mean_iit: f64,
}

/// Builds the directed table for `source → target` from imputed raw rows.
pub fn iit_table(
    source: Domain,
    target: Domain,
    source_rows: &[[f64; NUM_FEATURES]],
    target_rows: &[[f64; NUM_FEATURES]],
    borda: &[f64],
    strategy: &dyn RhoStrategy,
) -> Result<IitTable> {
    if borda.len() != NUM_FEATURES {
        return Err(Error::invalid("Borda vector must cover all descriptors"));
    }
    let rho = (0..NUM_FEATURES)
        .map(|i| strategy.rho(source_rows, target_rows, i))
        .collect::<Result<Vec<_>>>()?;
    let delta: Vec<f64> = (0..NUM_FEATURES)
        .map(|i| {
            let s: Vec<f64> = source_rows.iter().map(|r| r[i]).collect();
            let t: Vec<f64> = target_rows.iter().map(|r| r[i]).collect();
            mean_shift(&s, &t)
        })
        .collect();
    Ok(table_from_parts(source, target, borda.to_vec(), rho, delta))
}

/// Assembles a table from precomputed components.
pub fn table_from_parts(source: Domain, target: Domain, borda: Vec<f64>, rho: Vec<f64>, delta: Vec<f64>) -> IitTable {
    let iit: Vec<f64> = (0..borda.len()).map(|i| iit_score(borda[i], rho[i], delta[i])).collect();
    let anchors = top_k(&iit, N_ANCHORS);
    let mean_iit = anchors.iter().map(|&i| iit[i]).sum::<f64>() / anchors.len() as f64;
    IitTable {
        source,
        target,
        borda,
        rho,
        delta,
        iit,
        anchors,
        mean_iit,
    }
}

/// All ordered pairs of `domains`, computed in parallel and returned in
/// (source, target) order.
pub fn all_pair_tables(
    domains: &BTreeMap<Domain, Vec<[f64; NUM_FEATURES]>>,
    borda: &[f64],
    strategy: &dyn RhoStrategy,
) -> Result<Vec<IitTable>> {
    let pairs: Vec<(Domain, Domain)> = domains
        .keys()
        .flat_map(|&s| domains.keys().filter(move |&&t| t != s).map(move |&t| (s, t)))
        .collect();
    pairs
        .par_iter()
        .map(|&(s, t)| iit_table(s, t, &domains[&s], &domains[&t], borda, strategy))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalConsensus {
    pub scores: Vec<f64>,
    pub anchors: Vec<usize>,
}

/// Per-feature mean of the directed iit scores over every ordered pair of
/// `domains`. Fails if any pair is missing.
pub fn global_consensus(tables: &[IitTable], domains: &[Domain]) -> Result<GlobalConsensus> {
    let mut by_pair = BTreeMap::new();
    for t in tables {
        by_pair.insert((t.source, t.target), t);
    }
    let mut ordered = Vec::new();
    for &s in domains {
        for &t in domains {
            if s == t {
                continue;
            }
            let table = by_pair
                .get(&(s, t))
                .ok_or_else(|| Error::invalid(format!("missing IIT table for {s} -> {t}")))?;
            ordered.push(*table);
        }
    }
    if ordered.is_empty() {
        return Err(Error::invalid("global consensus needs at least two domains"));
    }
    let p = ordered[0].iit.len();
    let scores: Vec<f64> = (0..p)
        .map(|i| ordered.iter().map(|t| t.iit[i]).sum::<f64>() / ordered.len() as f64)
        .collect();
    let anchors = top_k(&scores, N_ANCHORS);
    Ok(GlobalConsensus { scores, anchors })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorChoice {
    pub anchors: Vec<usize>,
    pub fallback: bool,
}

/// Pair anchors, or the global anchors when the pair has fewer than eight
/// positive scores or alignment on the pair anchors was ill-conditioned.
pub fn select_anchors(pair: &IitTable, global: &GlobalConsensus, ill_conditioned: bool) -> AnchorChoice {
    let positive = pair.iit.iter().filter(|&&v| v > 0.0).count();
    if ill_conditioned || positive < N_ANCHORS {
        AnchorChoice {
            anchors: global.anchors.clone(),
            fallback: true,
        }
    } else {
        AnchorChoice {
            anchors: pair.anchors.clone(),
            fallback: false,
        }
    }
}

pub fn write_tables_csv(tables: &[IitTable], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["source", "target", "feature", "B", "rho", "delta", "iit", "is_anchor"])?;
    for t in tables {
        for f in Feature::ALL {
            let i = f.index();
            w.write_record([
                t.source.name().to_string(),
                t.target.name().to_string(),
                f.name().to_string(),
                g12(t.borda[i]),
                g12(t.rho[i]),
                g12(t.delta[i]),
                g12(t.iit[i]),
                t.anchors.contains(&i).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Reads tables written by [`write_tables_csv`]; anchors are recomputed
/// from the iit column.
pub fn read_tables_csv(input: impl Read) -> Result<Vec<IitTable>> {
    let mut r = csv::Reader::from_reader(input);
    let mut parts: BTreeMap<(Domain, Domain), [[f64; NUM_FEATURES]; 3]> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |msg: String| Error::Parse { line, msg };
        let s: Domain = rec[0].parse().map_err(|e: Error| bad(e.to_string()))?;
        let t: Domain = rec[1].parse().map_err(|e: Error| bad(e.to_string()))?;
        let f: Feature = rec[2].parse().map_err(|e: Error| bad(e.to_string()))?;
        let num = |k: usize| rec[k].parse::<f64>().map_err(|_| bad(format!("bad number `{}`", &rec[k])));
        let entry = parts.entry((s, t)).or_insert([[f64::NAN; NUM_FEATURES]; 3]);
        entry[0][f.index()] = num(3)?;
        entry[1][f.index()] = num(4)?;
        entry[2][f.index()] = num(5)?;
    }
    Ok(parts
        .into_iter()
        .map(|((s, t), [b, rho, delta])| table_from_parts(s, t, b.to_vec(), rho.to_vec(), delta.to_vec()))
        .collect())
}

pub fn write_global_csv(global: &GlobalConsensus, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "feature", "iit_global", "is_anchor"])?;
    for (rank, &i) in top_k(&global.scores, global.scores.len()).iter().enumerate() {
        w.write_record([
            (rank + 1).to_string(),
            Feature::ALL[i].name().to_string(),
            g12(global.scores[i]),
            global.anchors.contains(&i).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn write_borda_csv(borda: &BordaScore, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["feature".to_string()];
    header.extend(borda.per_model.keys().map(|k| k.to_string()));
    header.push("B".into());
    w.write_record(&header)?;
    for f in Feature::ALL {
        let i = f.index();
        let mut rec = vec![f.name().to_string()];
        rec.extend(borda.per_model.values().map(|v| g12(v[i])));
        rec.push(g12(borda.scores[i]));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Reads the `B` column of a Borda CSV in feature order.
pub fn read_borda_csv(input: impl Read) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h == "B")
        .ok_or_else(|| Error::invalid("Borda CSV has no `B` column"))?;
    let mut scores = [f64::NAN; NUM_FEATURES];
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let f: Feature = rec[0].parse()?;
        scores[f.index()] = rec[col].parse().map_err(|_| Error::Parse {
            line: i + 2,
            msg: format!("bad Borda value `{}`", &rec[col]),
        })?;
    }
    if scores.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("Borda CSV does not cover all descriptors"));
    }
    Ok(scores.to_vec())
}
