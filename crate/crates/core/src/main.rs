use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use xcdtl_core::error::{Error, Result};
use xcdtl_core::graph::{generate_ensemble, load_edge_list, Domain, DomainEnsemble};
use xcdtl_core::grid::{self, classifier_study, FeatureMode, GridConfig};
use xcdtl_core::iit::{self, CorrelationProfile};
use xcdtl_core::report::emit_report;
use xcdtl_core::{FeatureMatrix, NUM_FEATURES};

#[derive(Parser)]
#[command(name = "xcdtl", version, about = "Cross-domain anomaly-detection transfer for graph ensembles")]
struct Cli {
    /// Worker threads (overrides XCDTL_THREADS).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic ensemble as JSON lines.
    Generate {
        #[arg(long)]
        domain: Domain,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Node-count range, e.g. `10:30` (defaults per domain).
        #[arg(long, value_parser = parse_range)]
        size: Option<(usize, usize)>,
    },
    /// Compute the twelve descriptors for an ensemble (JSON lines) or a
    /// single edge-list file.
    Features {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Domain tag for edge-list input.
        #[arg(long)]
        domain: Option<Domain>,
    },
    /// Train the domain classifiers and write metrics, ranks and Borda scores.
    Classify {
        /// Directory of feature CSVs.
        #[arg(long)]
        features: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = GridConfig::default().seeds)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Rows drawn per domain and seed.
        #[arg(long, default_value_t = 500)]
        per_domain: usize,
    },
    /// Build the directed anchor tables and the global consensus.
    Rank {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        borda: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the transfer grid.
    Transfer {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        features: Option<FeatureMode>,
        /// Comma-separated `SOURCE:TARGET` pairs.
        #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
        pairs: Option<Vec<(Domain, Domain)>>,
    },
    /// Summarise a finished grid run.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected MIN:MAX")?;
    let a = a.parse().map_err(|_| format!("bad minimum `{a}`"))?;
    let b = b.parse().map_err(|_| format!("bad maximum `{b}`"))?;
    Ok((a, b))
}

fn parse_pair(s: &str) -> std::result::Result<(Domain, Domain), String> {
    let (a, b) = s.split_once(':').ok_or("expected SOURCE:TARGET")?;
    Ok((a.parse().map_err(|e: Error| e.to_string())?, b.parse().map_err(|e: Error| e.to_string())?))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = grid::thread_pool(cli.jobs).and_then(|pool| pool.install(|| run(cli.command)));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate {
            domain,
            count,
            seed,
            out,
            size,
        } => {
            let ens = generate_ensemble(domain, count, seed, size.unwrap_or(domain.default_size_range()))?;
            ens.save(&out)
        }
        Command::Features { input, out, domain } => {
            let graphs = if input.extension().is_some_and(|e| e == "jsonl" || e == "json") {
                DomainEnsemble::load(&input)?.graphs
            } else {
                let domain = domain.ok_or_else(|| Error::invalid("--domain is required for edge-list input"))?;
                let (g, dropped) = load_edge_list(&input, domain)?;
                if dropped > 0 {
                    log::warn!("{}: dropped {dropped} duplicate or self-loop edges", input.display());
                }
                vec![g]
            };
            let m = FeatureMatrix::from_graphs(&graphs)?;
            let f = create(&out)?;
            m.write_csv(f)
        }
        Command::Classify {
            features,
            seeds,
            out,
            per_domain,
        } => {
            let pools = load_feature_dir(&features)?;
            let study = classifier_study(&pools, &seeds, per_domain)?;
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            study.write_metrics_csv(create(&out.join("metrics.csv"))?)?;
            study.write_confusion_csv(create(&out.join("confusion.csv"))?)?;
            study.write_ranks_csv(create(&out.join("ranks.csv"))?)?;
            iit::write_borda_csv(&study.borda, create(&out.join(grid::BORDA_FILE))?)
        }
        Command::Rank { features, borda, out } => {
            let pools = load_feature_dir(&features)?;
            let f = fs::File::open(&borda).map_err(|e| Error::io(&borda, e))?;
            let b = iit::read_borda_csv(f)?;
            let rows: BTreeMap<Domain, Vec<[f64; NUM_FEATURES]>> =
                pools.iter().map(|(&d, m)| (d, m.imputed())).collect();
            let tables = iit::all_pair_tables(&rows, &b, &CorrelationProfile)?;
            let domains: Vec<Domain> = pools.keys().copied().collect();
            let global = iit::global_consensus(&tables, &domains)?;
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            iit::write_tables_csv(&tables, create(&out.join(grid::TABLES_FILE))?)?;
            iit::write_global_csv(&global, create(&out.join(grid::GLOBAL_FILE))?)
        }
        Command::Transfer {
            config,
            out,
            features,
            pairs,
        } => {
            let mut cfg = match config {
                Some(p) => GridConfig::load(&p)?,
                None => GridConfig::default(),
            };
            if let Some(mode) = features {
                cfg.feature_mode = mode;
            }
            if pairs.is_some() {
                cfg.pairs = pairs;
            }
            cfg.validate()?;
            let results = grid::run_experiment(&cfg, &out)?;
            let failed = results.iter().filter(|r| !r.ok()).count();
            log::info!("{} cells written, {failed} failed", results.len());
            Ok(())
        }
        Command::Report { results, out } => {
            let files = emit_report(&results, &out)?;
            for f in files.written {
                log::info!("wrote {}", f.display());
            }
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

/// Every `*.csv` in `dir`, grouped by the rows' domain column.
fn load_feature_dir(dir: &Path) -> Result<BTreeMap<Domain, FeatureMatrix>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::MissingFiles(vec![dir.join("*.csv")]));
    }
    let mut parts = Vec::new();
    for p in &paths {
        let f = fs::File::open(p).map_err(|e| Error::io(p, e))?;
        parts.push(FeatureMatrix::read_csv(f)?);
    }
    let all = FeatureMatrix::concat(&parts.iter().collect::<Vec<_>>());
    let mut domains = all.domains.clone();
    domains.sort_unstable();
    domains.dedup();
    Ok(domains.into_iter().map(|d| (d, all.of_domain(d))).collect())
}
