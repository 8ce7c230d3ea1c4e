use std::cmp::Ordering;
use std::io::{Read, Write};

use serde::Serialize;

use crate::anomaly::{transfer_gain, DetectionMetrics};
use crate::error::{Error, Result};
use crate::fmt::g12;
use crate::graph::Domain;

pub const RESULTS_HEADER: [&str; 16] = [
    "source", "target", "seed", "alpha", "eta", "nt_roc", "nt_ap", "nt_f1", "t_roc", "t_ap", "t_f1", "tgi_roc",
    "tgi_ap", "tgi_f1", "fallback", "status",
];

/// Identifies one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellKey {
    pub source: Domain,
    pub target: Domain,
    pub seed: u64,
    pub alpha: f64,
    pub eta: f64,
}

impl CellKey {
    pub fn cmp(&self, other: &Self) -> Ordering {
        (self.source, self.target, self.seed)
            .cmp(&(other.source, other.target, other.seed))
            .then(self.alpha.total_cmp(&other.alpha))
            .then(self.eta.total_cmp(&other.eta))
    }

    /// Text form used for resume matching and seed derivation.
    pub fn tag(&self) -> String {
        format!("{}|{}|{}|{}|{}", self.source, self.target, self.seed, g12(self.alpha), g12(self.eta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tgi {
    pub roc: f64,
    pub ap: f64,
    pub f1: f64,
}

impl Tgi {
    pub fn between(t: &DetectionMetrics, nt: &DetectionMetrics) -> Tgi {
        Tgi {
            roc: transfer_gain(t.roc_auc, nt.roc_auc),
            ap: transfer_gain(t.average_precision, nt.average_precision),
            f1: transfer_gain(t.f1, nt.f1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub key: CellKey,
    pub nt: Option<DetectionMetrics>,
    pub t: Option<DetectionMetrics>,
    pub tgi: Option<Tgi>,
    pub fallback: bool,
    pub n_train_target: usize,
    pub n_train_source: usize,
    /// Aligned dimension used by the detectors.
    pub dim: usize,
    /// `ok`, or the error that stopped the cell.
    pub status: String,
}

impl CellResult {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn failed(key: CellKey, err: &Error) -> CellResult {
        CellResult {
            key,
            nt: None,
            t: None,
            tgi: None,
            fallback: false,
            n_train_target: 0,
            n_train_source: 0,
            dim: 0,
            status: format!("error: {err}"),
        }
    }

    fn record(&self) -> Vec<String> {
        let k = &self.key;
        let mut rec = vec![
            k.source.name().to_string(),
            k.target.name().to_string(),
            k.seed.to_string(),
            g12(k.alpha),
            g12(k.eta),
        ];
        let metric = |m: Option<DetectionMetrics>, f: fn(&DetectionMetrics) -> f64| m.as_ref().map_or(String::new(), |m| g12(f(m)));
        for m in [self.nt, self.t] {
            rec.push(metric(m, |m| m.roc_auc));
            rec.push(metric(m, |m| m.average_precision));
            rec.push(metric(m, |m| m.f1));
        }
        match self.tgi {
            Some(g) => rec.extend([g12(g.roc), g12(g.ap), g12(g.f1)]),
            None => rec.extend([String::new(), String::new(), String::new()]),
        }
        rec.push(self.fallback.to_string());
        rec.push(self.status.clone());
        rec
    }
}

/// Writes rows sorted by (source, target, seed, α, η).
pub fn write_results_csv(results: &[CellResult], out: impl Write) -> Result<()> {
    let mut sorted: Vec<&CellResult> = results.iter().collect();
    sorted.sort_by(|a, b| a.key.cmp(&b.key));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in sorted {
        w.write_record(r.record())?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Parses a results CSV. Metrics are read back as printed; training sizes
/// and dimension are not stored and come back as 0.
pub fn read_results_csv(input: impl Read) -> Result<Vec<CellResult>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(RESULTS_HEADER) {
        return Err(Error::invalid("results CSV has an unexpected header"));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |msg: String| Error::Parse { line, msg };
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .map_err(|_| bad(format!("bad number `{}` in column {}", &rec[k], RESULTS_HEADER[k])))
        };
        let opt = |k: usize| -> Result<Option<f64>> { if rec[k].is_empty() { Ok(None) } else { num(k).map(Some) } };
        let key = CellKey {
            source: rec[0].parse().map_err(|e: Error| bad(e.to_string()))?,
            target: rec[1].parse().map_err(|e: Error| bad(e.to_string()))?,
            seed: rec[2].parse().map_err(|_| bad(format!("bad seed `{}`", &rec[2])))?,
            alpha: num(3)?,
            eta: num(4)?,
        };
        let metrics = |base: usize| -> Result<Option<DetectionMetrics>> {
            Ok(match (opt(base)?, opt(base + 1)?, opt(base + 2)?) {
                (Some(roc_auc), Some(average_precision), Some(f1)) => Some(DetectionMetrics {
                    roc_auc,
                    average_precision,
                    f1,
                    threshold: f64::NAN,
                }),
                _ => None,
            })
        };
        let tgi = match (opt(11)?, opt(12)?, opt(13)?) {
            (Some(roc), Some(ap), Some(f1)) => Some(Tgi { roc, ap, f1 }),
            _ => None,
        };
        out.push(CellResult {
            key,
            nt: metrics(5)?,
            t: metrics(8)?,
            tgi,
            fallback: rec[14].parse().map_err(|_| bad(format!("bad fallback flag `{}`", &rec[14])))?,
            n_train_target: 0,
            n_train_source: 0,
            dim: 0,
            status: rec[15].to_string(),
        });
    }
    Ok(out)
}
