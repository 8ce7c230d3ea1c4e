//! The scarcity × noise stress grid.
//!
//! For every ordered domain pair, seed, target fraction α and noise level η
//! a cell trains two Isolation Forests in the aligned anchor space: one on
//! the scarce, corrupted target rows alone (NT) and one on those rows plus
//! the clean source pool (T). Both are evaluated on an untouched target
//! test split.

mod results;
mod study;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{fit_alignment, AlignmentProjection};
use crate::anomaly::{detect, detection_metrics, label_anomalies, DetectionMetrics, IsolationForest};
use crate::error::{Error, Result};
use crate::features::{median, FeatureMatrix, NUM_FEATURES};
use crate::graph::{generate_ensemble, Domain};
use crate::iit::{all_pair_tables, global_consensus, select_anchors, CorrelationProfile, GlobalConsensus, IitTable};
use crate::linalg::Matrix;
use crate::rng;

pub use results::{read_results_csv, write_results_csv, CellKey, CellResult, Tgi, RESULTS_HEADER};
pub use study::{classifier_study, ClassifierStudy, ModelRun, HOLDOUT_FRACTION};

pub const THREADS_ENV: &str = "XCDTL_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FeatureMode {
    #[default]
    #[serde(rename = "anchors8")]
    Anchors8,
    #[serde(rename = "all12")]
    All12,
}

impl FromStr for FeatureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "anchors8" => Ok(FeatureMode::Anchors8),
            "all12" | "all" => Ok(FeatureMode::All12),
            _ => Err(Error::invalid(format!("unknown feature mode `{s}` (anchors8 or all12)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub seeds: Vec<u64>,
    pub alphas: Vec<f64>,
    pub etas: Vec<f64>,
    pub missing_frac: f64,
    pub contamination: f64,
    pub feature_mode: FeatureMode,
    pub master_pool: usize,
    pub train_pool: usize,
    pub test_size: usize,
    pub domains: Vec<Domain>,
    /// Seed for the synthetic master pools.
    pub pool_seed: u64,
    /// Directory of `<Domain>.csv` feature tables to use instead of
    /// generating the master pools.
    pub features_dir: Option<PathBuf>,
    /// Restrict the grid to these (source, target) pairs.
    pub pairs: Option<Vec<(Domain, Domain)>>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            seeds: vec![1, 24, 42, 50, 123, 501, 700, 800, 920, 999],
            alphas: vec![0.1, 0.5, 0.9],
            etas: vec![0.1, 0.5, 0.9],
            missing_frac: 0.05,
            contamination: 0.1,
            feature_mode: FeatureMode::Anchors8,
            master_pool: 1000,
            train_pool: 500,
            test_size: 250,
            domains: Domain::ALL.to_vec(),
            pool_seed: 1,
            features_dir: None,
            pairs: None,
        }
    }
}

impl GridConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: GridConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: &f64| *v > 0.0 && *v <= 1.0;
        if self.seeds.is_empty() || self.alphas.is_empty() || self.etas.is_empty() {
            return Err(Error::invalid("seeds, alphas and etas must be non-empty"));
        }
        if !self.alphas.iter().all(unit) || !self.etas.iter().all(unit) {
            return Err(Error::invalid("alphas and etas must lie in (0, 1]"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::invalid("seeds must be distinct"));
        }
        if !(0.0..1.0).contains(&self.missing_frac) {
            return Err(Error::invalid("missing_frac must lie in [0, 1)"));
        }
        if !(self.contamination > 0.0 && self.contamination <= 0.5) {
            return Err(Error::invalid("contamination must lie in (0, 0.5]"));
        }
        if self.train_pool + self.test_size > self.master_pool {
            return Err(Error::invalid("train pool and test split exceed the master pool"));
        }
        let mut domains = self.domains.clone();
        domains.sort_unstable();
        domains.dedup();
        if domains.len() < 2 || domains.len() != self.domains.len() {
            return Err(Error::invalid("need at least two distinct domains"));
        }
        if let Some(pairs) = &self.pairs {
            if pairs.iter().any(|(s, t)| s == t || !self.domains.contains(s) || !self.domains.contains(t)) {
                return Err(Error::invalid("pairs must join two different configured domains"));
            }
        }
        Ok(())
    }

    /// Ordered pairs the grid covers.
    pub fn pair_list(&self) -> Vec<(Domain, Domain)> {
        match &self.pairs {
            Some(p) => p.clone(),
            None => {
                let mut d = self.domains.clone();
                d.sort_unstable();
                d.iter()
                    .flat_map(|&s| d.iter().filter(move |&&t| t != s).map(move |&t| (s, t)))
                    .collect()
            }
        }
    }

    pub fn cell_keys(&self) -> Vec<CellKey> {
        let mut keys = Vec::new();
        for (source, target) in self.pair_list() {
            for &seed in &self.seeds {
                for &alpha in &self.alphas {
                    for &eta in &self.etas {
                        keys.push(CellKey {
                            source,
                            target,
                            seed,
                            alpha,
                            eta,
                        });
                    }
                }
            }
        }
        keys.sort_by(|a, b| a.cmp(b));
        keys
    }
}

/// `⌊x⌋` that tolerates products such as 0.29·100 landing just below an integer.
fn floor_count(x: f64) -> usize {
    (x + 1e-9).floor() as usize
}

/// Applies training-phase corruption to a complete raw matrix (NaN marks a
/// missing entry and is median-imputed first): Gaussian noise with
/// per-column scale `η·σ_j`, then `⌊missing_frac·cells⌋` random cells
/// blanked and median-imputed from the surviving corrupted entries.
pub fn corrupt(x: &Matrix, eta: f64, missing_frac: f64, seed: u64) -> Result<Matrix> {
    if !(eta >= 0.0) || !(0.0..1.0).contains(&missing_frac) {
        return Err(Error::invalid("corruption needs η ≥ 0 and missing_frac in [0, 1)"));
    }
    let (n, p) = (x.rows(), x.cols());
    let mut out = x.clone();
    impute_columns(&mut out, &vec![false; n * p]);
    let mut r = rng::rng(seed);
    if eta > 0.0 {
        let sigma: Vec<f64> = (0..p).map(|j| crate::features::mean_std(&out.column(j)).1).collect();
        for i in 0..n {
            for j in 0..p {
                let e: f64 = r.sample(StandardNormal);
                out[(i, j)] += e * eta * sigma[j];
            }
        }
    }
    let cells = n * p;
    let k = floor_count(missing_frac * cells as f64);
    if k > 0 {
        let mut blank = vec![false; cells];
        for c in index::sample(&mut r, cells, k) {
            blank[c] = true;
        }
        impute_columns(&mut out, &blank);
    }
    Ok(out)
}

/// Replaces NaN and `blank` cells by the median of the column's other
/// entries (0 if none remain).
fn impute_columns(x: &mut Matrix, blank: &[bool]) {
    let p = x.cols();
    for j in 0..p {
        let missing = |i: usize, v: f64| blank[i * p + j] || v.is_nan();
        let kept: Vec<f64> = (0..x.rows()).map(|i| (i, x[(i, j)])).filter(|&(i, v)| !missing(i, v)).map(|(_, v)| v).collect();
        if kept.len() == x.rows() {
            continue;
        }
        let m = median(&kept).unwrap_or(0.0);
        for i in 0..x.rows() {
            if missing(i, x[(i, j)]) {
                x[(i, j)] = m;
            }
        }
    }
}

/// One domain's rows for one seed: imputed with the train pool's medians.
#[derive(Debug, Clone)]
pub struct SeedSplit {
    pub train: Matrix,
    pub test: Matrix,
    pub test_labels: Vec<bool>,
    pub train_labels: Vec<bool>,
}

/// Everything the cells share: master pools, classifier study, IIT tables
/// and the per-seed splits.
pub struct GridData {
    pub config: GridConfig,
    pub pools: BTreeMap<Domain, FeatureMatrix>,
    pub study: ClassifierStudy,
    pub tables: Vec<IitTable>,
    pub global: GlobalConsensus,
    splits: HashMap<(u64, Domain), SeedSplit>,
}

impl GridData {
    pub fn split(&self, seed: u64, domain: Domain) -> Option<&SeedSplit> {
        self.splits.get(&(seed, domain))
    }

    pub fn table(&self, source: Domain, target: Domain) -> Option<&IitTable> {
        self.tables.iter().find(|t| t.source == source && t.target == target)
    }
}

/// Generates (or loads) the master pools of every configured domain.
pub fn master_pools(config: &GridConfig) -> Result<BTreeMap<Domain, FeatureMatrix>> {
    let mut pools = BTreeMap::new();
    for &d in &config.domains {
        let m = match &config.features_dir {
            Some(dir) => {
                let path = dir.join(format!("{d}.csv"));
                let f = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
                let m = FeatureMatrix::read_csv(f)?;
                if m.len() < config.train_pool + config.test_size {
                    return Err(Error::invalid(format!(
                        "{}: {} rows, need {}",
                        path.display(),
                        m.len(),
                        config.train_pool + config.test_size
                    )));
                }
                m
            }
            None => {
                let ens = generate_ensemble(d, config.master_pool, config.pool_seed, d.default_size_range())?;
                FeatureMatrix::from_graphs(&ens.graphs)?
            }
        };
        pools.insert(d, m);
    }
    Ok(pools)
}

/// Builds the shared state from master pools.
pub fn prepare(config: &GridConfig, pools: BTreeMap<Domain, FeatureMatrix>) -> Result<GridData> {
    config.validate()?;
    log::info!("classifier study over {} seeds", config.seeds.len());
    let study = classifier_study(&pools, &config.seeds, config.train_pool)?;
    let imputed: BTreeMap<Domain, Vec<[f64; NUM_FEATURES]>> = pools.iter().map(|(&d, m)| (d, m.imputed())).collect();
    let tables = all_pair_tables(&imputed, &study.borda.scores, &CorrelationProfile)?;
    let global = global_consensus(&tables, &config.domains)?;
    let jobs: Vec<(u64, Domain)> = config
        .seeds
        .iter()
        .flat_map(|&s| config.domains.iter().map(move |&d| (s, d)))
        .collect();
    let splits = jobs
        .par_iter()
        .map(|&(seed, d)| seed_split(&pools[&d], config, seed, d).map(|s| ((seed, d), s)))
        .collect::<Result<HashMap<_, _>>>()?;
    Ok(GridData {
        config: config.clone(),
        pools,
        study,
        tables,
        global,
        splits,
    })
}

fn seed_split(pool: &FeatureMatrix, config: &GridConfig, seed: u64, domain: Domain) -> Result<SeedSplit> {
    let (n_train, n_test) = (config.train_pool, config.test_size);
    if pool.len() < n_train + n_test {
        return Err(Error::invalid(format!("{domain} pool has {} rows, need {}", pool.len(), n_train + n_test)));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut rng::rng(rng::derive_str(seed, &format!("split|{domain}"))));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..n_train + n_test].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    // ground truth on the uncorrupted sample, before anything else happens
    let sample = pool.subset(&[train.clone(), test.clone()].concat());
    let labels = label_anomalies(&sample)?.labels;
    let train_m = pool.subset(&train);
    let med = train_m.medians();
    let to_matrix = |m: &FeatureMatrix| {
        let data: Vec<f64> = m
            .rows
            .iter()
            .flat_map(|r| (0..NUM_FEATURES).map(move |j| if r.mask[j] { r.values[j] } else { med[j].unwrap_or(0.0) }))
            .collect();
        Matrix::from_vec(m.len(), NUM_FEATURES, data)
    };
    Ok(SeedSplit {
        train: to_matrix(&train_m),
        test: to_matrix(&pool.subset(&test)),
        test_labels: labels[n_train..].to_vec(),
        train_labels: labels[..n_train].to_vec(),
    })
}

/// `seed ⊕ FNV-1a("src|tgt|alpha|eta|scenario")`.
pub fn cell_seed(key: &CellKey, scenario: &str) -> u64 {
    use crate::fmt::g12;
    rng::derive_str(
        key.seed,
        &format!("{}|{}|{}|{}|{scenario}", key.source, key.target, g12(key.alpha), g12(key.eta)),
    )
}

/// Runs one cell; errors are returned to the caller, which records them.
pub fn run_cell(data: &GridData, key: &CellKey) -> Result<CellResult> {
    let cfg = &data.config;
    let missing = |d: Domain| Error::invalid(format!("no split for {d} at seed {}", key.seed));
    let src = data.split(key.seed, key.source).ok_or_else(|| missing(key.source))?;
    let tgt = data.split(key.seed, key.target).ok_or_else(|| missing(key.target))?;

    let data_seed = cell_seed(key, "data");
    let n_t = floor_count(key.alpha * tgt.train.rows() as f64);
    let mut order: Vec<usize> = (0..tgt.train.rows()).collect();
    order.shuffle(&mut rng::rng(data_seed));
    let target_train = corrupt(
        &tgt.train.select_rows(&order[..n_t]),
        key.eta,
        cfg.missing_frac,
        rng::derive_str(data_seed, "corrupt"),
    )?;

    let (mut anchors, mut fallback) = match cfg.feature_mode {
        FeatureMode::All12 => ((0..NUM_FEATURES).collect::<Vec<_>>(), false),
        FeatureMode::Anchors8 => match data.table(key.source, key.target) {
            Some(t) => {
                let c = select_anchors(t, &data.global, false);
                (c.anchors, c.fallback)
            }
            None => (data.global.anchors.clone(), false),
        },
    };
    let (nt_fit, t_fit, t_sel, s_sel) = loop {
        let t_sel = target_train.select_columns(&anchors);
        let s_sel = src.train.select_columns(&anchors);
        let nt_fit = fit_alignment(&Matrix::zeros(0, anchors.len()), &t_sel, &anchors)?;
        let t_fit = fit_alignment(&s_sel, &t_sel, &anchors)?;
        let ill = nt_fit.fallback_triggered || t_fit.fallback_triggered;
        if ill && cfg.feature_mode == FeatureMode::Anchors8 && !fallback {
            log::debug!("{}: ill-conditioned alignment, retrying with global anchors", key.tag());
            anchors = data.global.anchors.clone();
            fallback = true;
            continue;
        }
        break (nt_fit, t_fit, t_sel, s_sel);
    };

    let nt = scenario(&nt_fit, &t_sel, tgt, &anchors, cfg.contamination, cell_seed(key, "nt"))?;
    let t = scenario(&t_fit, &s_sel.vstack(&t_sel), tgt, &anchors, cfg.contamination, cell_seed(key, "t"))?;
    Ok(CellResult {
        key: *key,
        tgi: Some(Tgi::between(&t, &nt)),
        nt: Some(nt),
        t: Some(t),
        fallback,
        n_train_target: n_t,
        n_train_source: src.train.rows(),
        dim: t_fit.dim(),
        status: "ok".into(),
    })
}

fn scenario(
    align: &AlignmentProjection,
    train: &Matrix,
    target: &SeedSplit,
    anchors: &[usize],
    contamination: f64,
    seed: u64,
) -> Result<DetectionMetrics> {
    if align.dim() == 0 {
        return Err(Error::Numerical("alignment kept no components".into()));
    }
    let z = align.project(train)?;
    let forest = IsolationForest::fit(&z, seed)?;
    let train_scores = forest.score(&z)?;
    let test = align.project(&target.test.select_columns(anchors))?;
    let det = detect(&forest, &train_scores, &test, contamination)?;
    detection_metrics(&det.scores, &target.test_labels, det.threshold)
}

/// Thread pool capped by `jobs`, else by `XCDTL_THREADS`, else rayon's default.
pub fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let from_env = std::env::var(THREADS_ENV).ok().map(|v| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| Error::invalid(format!("{THREADS_ENV}=`{v}` is not a thread count")))
    });
    let n = match (jobs, from_env) {
        (Some(j), _) => j,
        (None, Some(v)) => v?,
        (None, None) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))
}

/// Runs every cell not already present in `results_path` (if given),
/// rewriting the sorted file after each pair completes.
pub fn run_grid(data: &GridData, results_path: Option<&Path>) -> Result<Vec<CellResult>> {
    let mut done: BTreeMap<String, CellResult> = BTreeMap::new();
    if let Some(path) = results_path.filter(|p| p.exists()) {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        for r in read_results_csv(f)? {
            done.insert(r.key.tag(), r);
        }
        log::info!("resuming: {} cells already in {}", done.len(), path.display());
    }
    let keys = data.config.cell_keys();
    for (source, target) in data.config.pair_list() {
        let todo: Vec<&CellKey> = keys
            .iter()
            .filter(|k| k.source == source && k.target == target && !done.contains_key(&k.tag()))
            .collect();
        if todo.is_empty() {
            continue;
        }
        let fresh: Vec<CellResult> = todo
            .par_iter()
            .map(|k| {
                run_cell(data, k).unwrap_or_else(|e| {
                    log::warn!("cell {} failed: {e}", k.tag());
                    CellResult::failed(**k, &e)
                })
            })
            .collect();
        log::info!("{source} -> {target}: {} cells", fresh.len());
        for r in fresh {
            done.insert(r.key.tag(), r);
        }
        if let Some(path) = results_path {
            write_atomic(path, |w| write_results_csv(&done.values().cloned().collect::<Vec<_>>(), w))?;
        }
    }
    let mut out: Vec<CellResult> = done.into_values().collect();
    out.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(out)
}

pub(crate) fn write_atomic(path: &Path, f: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f(&mut file)?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub const RESULTS_FILE: &str = "results.csv";
pub const TABLES_FILE: &str = "iit_tables.csv";
pub const GLOBAL_FILE: &str = "iit_global.csv";
pub const BORDA_FILE: &str = "borda.csv";

/// Full `transfer` run: pools, study, IIT tables and the grid, with every
/// artefact written under `out_dir`.
pub fn run_experiment(config: &GridConfig, out_dir: &Path) -> Result<Vec<CellResult>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let pools = master_pools(config)?;
    let data = prepare(config, pools)?;
    let file = |name: &str| out_dir.join(name);
    write_atomic(&file("config.json"), |w| Ok(serde_json::to_writer_pretty(w, config)?))?;
    write_atomic(&file(BORDA_FILE), |w| crate::iit::write_borda_csv(&data.study.borda, w))?;
    write_atomic(&file("classifier_metrics.csv"), |w| data.study.write_metrics_csv(w))?;
    write_atomic(&file(TABLES_FILE), |w| crate::iit::write_tables_csv(&data.tables, w))?;
    write_atomic(&file(GLOBAL_FILE), |w| crate::iit::write_global_csv(&data.global, w))?;
    run_grid(&data, Some(&file(RESULTS_FILE)))
}
