//! Tables, plot data and statistical summaries from finished grid runs.
//!
//! Everything here is a pure function of the input files, so rerunning
//! `report` on the same directory reproduces the outputs byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::anomaly::{transfer_gain, DetectionMetrics};
use crate::error::{Error, Result};
use crate::fmt::g12;
use crate::graph::Domain;
use crate::grid::{read_results_csv, CellResult, RESULTS_FILE, TABLES_FILE};
use crate::iit::{global_consensus, read_tables_csv, write_global_csv, GlobalConsensus, IitTable};
use crate::stats::{dunn_posthoc, kruskal_wallis, linear_regression, paired_t_test, RegressionSummary, StatResult};

/// A slice of the grid: all cells, or one (η, α) combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime {
    pub name: &'static str,
    pub eta: Option<f64>,
    pub alpha: Option<f64>,
}

pub const REGIMES: [Regime; 3] = [
    Regime {
        name: "full_grid",
        eta: None,
        alpha: None,
    },
    Regime {
        name: "low_noise_scarce",
        eta: Some(0.1),
        alpha: Some(0.1),
    },
    Regime {
        name: "high_noise_abundant",
        eta: Some(0.9),
        alpha: Some(0.9),
    },
];

impl Regime {
    pub fn contains(&self, c: &CellResult) -> bool {
        self.eta.is_none_or(|e| c.key.eta == e) && self.alpha.is_none_or(|a| c.key.alpha == a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Means {
    pub roc: f64,
    pub ap: f64,
    pub f1: f64,
}

impl Means {
    fn of(ms: &[DetectionMetrics]) -> Means {
        let n = ms.len() as f64;
        Means {
            roc: ms.iter().map(|m| m.roc_auc).sum::<f64>() / n,
            ap: ms.iter().map(|m| m.average_precision).sum::<f64>() / n,
            f1: ms.iter().map(|m| m.f1).sum::<f64>() / n,
        }
    }

    fn cells(&self) -> [f64; 3] {
        [self.roc, self.ap, self.f1]
    }
}

/// Mean NT and T metrics over a set of cells; the gains are recomputed
/// from these means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub cells: usize,
    pub nt: Means,
    pub t: Means,
}

impl Aggregate {
    pub fn of<'a>(cells: impl IntoIterator<Item = &'a CellResult>) -> Option<Aggregate> {
        let (nt, t): (Vec<DetectionMetrics>, Vec<DetectionMetrics>) =
            cells.into_iter().filter_map(|c| Some((c.nt?, c.t?))).unzip();
        if nt.is_empty() {
            return None;
        }
        Some(Aggregate {
            cells: nt.len(),
            nt: Means::of(&nt),
            t: Means::of(&t),
        })
    }

    pub fn tgi(&self) -> Means {
        Means {
            roc: transfer_gain(self.t.roc, self.nt.roc),
            ap: transfer_gain(self.t.ap, self.nt.ap),
            f1: transfer_gain(self.t.f1, self.nt.f1),
        }
    }

    fn fields(&self) -> Vec<String> {
        let mut v = vec![self.cells.to_string()];
        for m in [self.nt, self.t, self.tgi()] {
            v.extend(m.cells().map(g12));
        }
        v
    }
}

const METRIC_COLUMNS: [&str; 10] = [
    "cells", "nt_roc", "nt_ap", "nt_f1", "t_roc", "t_ap", "t_f1", "tgi_roc", "tgi_ap", "tgi_f1",
];

/// One point of the transfer-gain vs. alignment-potential scatter.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub source: Domain,
    pub target: Domain,
    pub mean_iit: f64,
    pub mean_tgi_roc: f64,
}

/// Per directed pair: x = mean anchor iit, y = mean cell TGI on ROC-AUC.
pub fn tgi_scatter(cells: &[&CellResult], tables: &[IitTable]) -> Vec<ScatterPoint> {
    let mut by_pair: BTreeMap<(Domain, Domain), Vec<f64>> = BTreeMap::new();
    for c in cells {
        if let Some(g) = c.tgi {
            by_pair.entry((c.key.source, c.key.target)).or_default().push(g.roc);
        }
    }
    by_pair
        .into_iter()
        .filter_map(|((s, t), ys)| {
            let table = tables.iter().find(|x| x.source == s && x.target == t)?;
            Some(ScatterPoint {
                source: s,
                target: t,
                mean_iit: table.mean_iit,
                mean_tgi_roc: ys.iter().sum::<f64>() / ys.len() as f64,
            })
        })
        .collect()
}

pub fn regression_tgi_vs_iit(points: &[ScatterPoint]) -> Result<RegressionSummary> {
    let x: Vec<f64> = points.iter().map(|p| p.mean_iit).collect();
    let y: Vec<f64> = points.iter().map(|p| p.mean_tgi_roc).collect();
    linear_regression(&x, &y)
}

/// A named statistical test outcome.
#[derive(Debug, Clone)]
pub struct TestRow {
    pub regime: &'static str,
    pub metric: &'static str,
    pub comparison: String,
    /// Group names in the order of `result.group_sizes`.
    pub groups: Vec<String>,
    pub result: StatResult,
}

const METRICS: [(&str, fn(&DetectionMetrics) -> f64); 3] = [
    ("roc", |m| m.roc_auc),
    ("ap", |m| m.average_precision),
    ("f1", |m| m.f1),
];

/// Kruskal–Wallis and paired t of NT vs T per regime and metric, plus
/// Kruskal–Wallis and Dunn of the cell gains across noise levels.
pub fn statistical_summary(cells: &[CellResult]) -> Vec<TestRow> {
    let mut rows = Vec::new();
    for regime in REGIMES {
        let sel: Vec<(&DetectionMetrics, &DetectionMetrics)> = cells
            .iter()
            .filter(|c| regime.contains(c))
            .filter_map(|c| Some((c.nt.as_ref()?, c.t.as_ref()?)))
            .collect();
        for (metric, get) in METRICS {
            let nt: Vec<f64> = sel.iter().map(|(n, _)| get(n)).collect();
            let t: Vec<f64> = sel.iter().map(|(_, t)| get(t)).collect();
            if let Ok(r) = kruskal_wallis(&[&nt, &t]) {
                rows.push(TestRow {
                    regime: regime.name,
                    metric,
                    comparison: "NT vs T".into(),
                    groups: vec!["NT".into(), "T".into()],
                    result: r,
                });
            }
            if let Ok(r) = paired_t_test(&t, &nt) {
                rows.push(TestRow {
                    regime: regime.name,
                    metric,
                    comparison: "T - NT paired".into(),
                    groups: vec!["T".into(), "NT".into()],
                    result: r,
                });
            }
        }
    }
    let mut by_eta: BTreeMap<u64, Vec<&CellResult>> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.tgi.is_some()) {
        by_eta.entry(c.key.eta.to_bits()).or_default().push(c);
    }
    let labels: Vec<String> = by_eta.keys().map(|&b| format!("eta={}", g12(f64::from_bits(b)))).collect();
    for (metric, pick) in [
        ("tgi_roc", (|g: &crate::grid::Tgi| g.roc) as fn(&crate::grid::Tgi) -> f64),
        ("tgi_ap", |g| g.ap),
        ("tgi_f1", |g| g.f1),
    ] {
        let groups: Vec<Vec<f64>> = by_eta
            .values()
            .map(|cs| cs.iter().filter_map(|c| c.tgi.as_ref().map(pick)).collect())
            .collect();
        let refs: Vec<&[f64]> = groups.iter().map(|g| g.as_slice()).collect();
        if let Ok(r) = kruskal_wallis(&refs) {
            rows.push(TestRow {
                regime: "full_grid",
                metric,
                comparison: format!("across {}", labels.join(" / ")),
                groups: labels.clone(),
                result: r,
            });
        }
        if let Ok(r) = dunn_posthoc(&refs) {
            rows.push(TestRow {
                regime: "full_grid",
                metric,
                comparison: format!("pairwise {}", labels.join(" / ")),
                groups: labels.clone(),
                result: r,
            });
        }
    }
    rows
}

/// Files produced by [`emit_report`].
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub written: Vec<PathBuf>,
}

/// Reads `results.csv` and `iit_tables.csv` from `results_dir` and writes
/// the tables, plot data, statistics and a Markdown digest into `out_dir`.
pub fn emit_report(results_dir: &Path, out_dir: &Path) -> Result<ReportFiles> {
    let results_path = results_dir.join(RESULTS_FILE);
    let tables_path = results_dir.join(TABLES_FILE);
    let absent: Vec<PathBuf> = [&results_path, &tables_path]
        .into_iter()
        .filter(|p| !p.is_file())
        .cloned()
        .collect();
    if !absent.is_empty() {
        return Err(Error::MissingFiles(absent));
    }
    let open = |p: &Path| fs::File::open(p).map_err(|e| Error::io(p, e));
    let cells = read_results_csv(open(&results_path)?)?;
    let tables = read_tables_csv(open(&tables_path)?)?;
    if cells.is_empty() {
        return Err(Error::invalid(format!("{} has no rows", results_path.display())));
    }
    let mut domains: Vec<Domain> = tables.iter().flat_map(|t| [t.source, t.target]).collect();
    domains.sort_unstable();
    domains.dedup();
    let global = global_consensus(&tables, &domains)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };

    let ok: Vec<&CellResult> = cells.iter().filter(|c| c.ok()).collect();
    let pairs = pair_aggregates(&ok);
    put("pair_table.csv", pair_table_csv(&pairs, &tables)?)?;
    let regimes: Vec<(Regime, Option<Aggregate>)> = REGIMES
        .iter()
        .map(|r| (*r, Aggregate::of(ok.iter().copied().filter(|c| r.contains(c)))))
        .collect();
    put("regimes.csv", regimes_csv(&regimes)?)?;
    let mut buf = Vec::new();
    write_global_csv(&global, &mut buf)?;
    put("global_ranking.csv", buf)?;

    let mut regressions = Vec::new();
    for r in REGIMES {
        let sel: Vec<&CellResult> = ok.iter().copied().filter(|c| r.contains(c)).collect();
        let points = tgi_scatter(&sel, &tables);
        put(&format!("scatter_{}.csv", r.name), scatter_csv(&points)?)?;
        regressions.push((r, regression_tgi_vs_iit(&points).ok()));
    }
    put("regression.csv", regression_csv(&regressions)?)?;
    let tests = statistical_summary(&cells.iter().filter(|c| c.ok()).cloned().collect::<Vec<_>>());
    put("stats.csv", stats_csv(&tests)?)?;
    put("stats_dunn.csv", dunn_csv(&tests)?)?;
    let digest = digest(&cells, &pairs, &regimes, &global, &regressions, &tests);
    put("report.md", digest.into_bytes())?;
    Ok(ReportFiles { written })
}

fn pair_aggregates(cells: &[&CellResult]) -> BTreeMap<(Domain, Domain), Aggregate> {
    let mut by_pair: BTreeMap<(Domain, Domain), Vec<&CellResult>> = BTreeMap::new();
    for c in cells {
        by_pair.entry((c.key.source, c.key.target)).or_default().push(c);
    }
    by_pair
        .into_iter()
        .filter_map(|(k, cs)| Aggregate::of(cs).map(|a| (k, a)))
        .collect()
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::invalid(e.to_string()))
}

fn pair_table_csv(pairs: &BTreeMap<(Domain, Domain), Aggregate>, tables: &[IitTable]) -> Result<Vec<u8>> {
    let mut header = vec!["source", "target"];
    header.extend(METRIC_COLUMNS);
    header.push("mean_iit");
    csv_bytes(
        &header,
        pairs.iter().map(|((s, t), a)| {
            let mut r = vec![s.to_string(), t.to_string()];
            r.extend(a.fields());
            let iit = tables.iter().find(|x| x.source == *s && x.target == *t).map(|x| x.mean_iit);
            r.push(iit.map_or(String::new(), g12));
            r
        }),
    )
}

fn regimes_csv(regimes: &[(Regime, Option<Aggregate>)]) -> Result<Vec<u8>> {
    let mut header = vec!["regime", "eta", "alpha"];
    header.extend(METRIC_COLUMNS);
    let opt = |v: Option<f64>| v.map_or("all".to_string(), g12);
    csv_bytes(
        &header,
        regimes.iter().filter_map(|(r, a)| {
            let mut row = vec![r.name.to_string(), opt(r.eta), opt(r.alpha)];
            row.extend(a.as_ref()?.fields());
            Some(row)
        }),
    )
}

fn scatter_csv(points: &[ScatterPoint]) -> Result<Vec<u8>> {
    csv_bytes(
        &["source", "target", "mean_iit", "mean_tgi_roc"],
        points
            .iter()
            .map(|p| vec![p.source.to_string(), p.target.to_string(), g12(p.mean_iit), g12(p.mean_tgi_roc)]),
    )
}

fn regression_csv(rows: &[(Regime, Option<RegressionSummary>)]) -> Result<Vec<u8>> {
    csv_bytes(
        &["regime", "n", "slope", "intercept", "pearson_r", "spearman_rho", "degenerate"],
        rows.iter().filter_map(|(r, s)| {
            let s = s.as_ref()?;
            Some(vec![
                r.name.to_string(),
                s.n.to_string(),
                g12(s.slope),
                g12(s.intercept),
                g12(s.pearson_r),
                g12(s.spearman_rho),
                s.degenerate.to_string(),
            ])
        }),
    )
}

fn stats_csv(tests: &[TestRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &["test", "regime", "metric", "comparison", "statistic", "p_value", "group_sizes", "degenerate"],
        tests.iter().map(|t| {
            vec![
                t.result.test.to_string(),
                t.regime.to_string(),
                t.metric.to_string(),
                t.comparison.clone(),
                g12(t.result.statistic),
                g12(t.result.p_value),
                t.result.group_sizes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";"),
                t.result.degenerate.to_string(),
            ]
        }),
    )
}

fn dunn_csv(tests: &[TestRow]) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for t in tests {
        let Some(p) = &t.result.pairwise else { continue };
        for (i, row) in p.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                rows.push(vec![t.metric.to_string(), t.groups[i].clone(), t.groups[j].clone(), g12(*v)]);
            }
        }
    }
    csv_bytes(&["metric", "group_a", "group_b", "p_bonferroni"], rows)
}

fn digest(
    cells: &[CellResult],
    pairs: &BTreeMap<(Domain, Domain), Aggregate>,
    regimes: &[(Regime, Option<Aggregate>)],
    global: &GlobalConsensus,
    regressions: &[(Regime, Option<RegressionSummary>)],
    tests: &[TestRow],
) -> String {
    let f = |v: f64| format!("{v:.4}");
    let failed = cells.iter().filter(|c| !c.ok()).count();
    let fallback = cells.iter().filter(|c| c.fallback).count();
    let mut s = String::new();
    let _ = writeln!(s, "# Transfer grid report\n");
    let _ = writeln!(
        s,
        "{} cells ({} failed, {} used global anchors).\n",
        cells.len(),
        failed,
        fallback
    );
    let _ = writeln!(s, "## Regimes\n");
    let _ = writeln!(s, "| regime | cells | NT ROC | T ROC | TGI ROC | NT AP | T AP | TGI AP | NT F1 | T F1 | TGI F1 |");
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|---|");
    for (r, a) in regimes {
        let Some(a) = a else { continue };
        let g = a.tgi();
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            r.name,
            a.cells,
            f(a.nt.roc),
            f(a.t.roc),
            f(g.roc),
            f(a.nt.ap),
            f(a.t.ap),
            f(g.ap),
            f(a.nt.f1),
            f(a.t.f1),
            f(g.f1)
        );
    }
    let _ = writeln!(s, "\n## Pairs (full grid)\n");
    let _ = writeln!(s, "| source | target | NT ROC | T ROC | TGI ROC | NT F1 | T F1 | TGI F1 |");
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|");
    for ((src, tgt), a) in pairs {
        let g = a.tgi();
        let _ = writeln!(
            s,
            "| {src} | {tgt} | {} | {} | {} | {} | {} | {} |",
            f(a.nt.roc),
            f(a.t.roc),
            f(g.roc),
            f(a.nt.f1),
            f(a.t.f1),
            f(g.f1)
        );
    }
    let _ = writeln!(s, "\n## Global anchor ranking\n");
    let _ = writeln!(s, "| rank | descriptor | score | anchor |");
    let _ = writeln!(s, "|---|---|---|---|");
    for (rank, &i) in crate::iit::top_k(&global.scores, global.scores.len()).iter().enumerate() {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} |",
            rank + 1,
            crate::features::Feature::ALL[i].name(),
            f(global.scores[i]),
            if global.anchors.contains(&i) { "yes" } else { "" }
        );
    }
    let _ = writeln!(s, "\n## Gain vs. alignment potential\n");
    let _ = writeln!(s, "| regime | pairs | slope | Pearson r | Spearman rho |");
    let _ = writeln!(s, "|---|---|---|---|---|");
    for (r, reg) in regressions {
        if let Some(x) = reg {
            let _ = writeln!(s, "| {} | {} | {} | {} | {} |", r.name, x.n, f(x.slope), f(x.pearson_r), f(x.spearman_rho));
        }
    }
    let _ = writeln!(s, "\n## Tests\n");
    let _ = writeln!(s, "| test | regime | metric | comparison | statistic | p |");
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    for t in tests {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {:.3e} |",
            t.result.test,
            t.regime,
            t.metric,
            t.comparison,
            f(t.result.statistic),
            t.result.p_value
        );
    }
    s
}

/// Convenience for callers that already hold results in memory.
pub fn write_pair_table(cells: &[CellResult], tables: &[IitTable], mut out: impl Write) -> Result<()> {
    let ok: Vec<&CellResult> = cells.iter().filter(|c| c.ok()).collect();
    let bytes = pair_table_csv(&pair_aggregates(&ok), tables)?;
    out.write_all(&bytes).map_err(|e| Error::io("<pair table>", e))
}
