use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fairens::config::check_plans;
use fairens::config::{load_config, RunConfig};
use fairens::demo::{demo_config, run_demo};
use fairens::error::{FairensError, Result};
use fairens::experiment::{
    plans_per_dataset, prepare_all, run_experiment, run_step1, DATASETS, SELECTED,
};
use fairens::harness::{main_grid, SelectedConfig};
use fairens::io::{read_json, write_json};
use fairens::openml::{default_cache_dir, OpenmlClient, DEFAULT_BASE_URL};
use fairens::report;
use fairens::store::read_records;
use fairens_core::analysis::{DatasetMeta, GuidanceConfig};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "fairens",
    version,
    about = "Bias mitigators combined with ensembles: experiments and analysis"
)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration and list the plans it would run.
    Validate { config: PathBuf },
    /// Run step-one selection and the main grid.
    Run {
        config: PathBuf,
        /// Output directory; overrides the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run step one only and write the chosen configurations.
    Select {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Analyze stored records.
    Analyze {
        #[arg(value_enum)]
        what: Analysis,
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Dataset metadata written by `run`; needed for guidance.
        #[arg(long)]
        meta: Option<PathBuf>,
        /// Rows above which a dataset counts as large.
        #[arg(long)]
        large_rows: Option<usize>,
        /// Symmetrized baseline DI below which a dataset counts as very unfair.
        #[arg(long)]
        unfair_di: Option<f64>,
    },
    /// Run a small synthetic experiment end to end.
    Demo {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "demo-output")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Download an OpenML dataset into the cache.
    Fetch {
        #[arg(long)]
        openml: u32,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long, default_value = DEFAULT_BASE_URL)]
        base_url: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Analysis {
    Standardize,
    Tables,
    Resources,
    Guidance,
    All,
}

fn print(v: &impl serde::Serialize) -> Result<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| FairensError::json("output", e))?;
    match writeln!(std::io::stdout().lock(), "{s}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(FairensError::io("<stdout>", e))
        }
        _ => Ok(()),
    }
}

fn output_dir(cfg: &RunConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| cfg.output_dir.clone())
}

fn validate(path: &Path) -> Result<()> {
    let (cfg, _) = load_config(path)?;
    // step one has not run; kinds without a fixed configuration use their defaults
    let placeholder: Vec<SelectedConfig> = cfg
        .datasets
        .iter()
        .flat_map(|d| {
            cfg.kinds.iter().filter_map(|&k| {
                let fixed = cfg
                    .selected
                    .iter()
                    .find(|s| s.dataset == d.id && s.config.kind() == k)
                    .cloned();
                fixed.or_else(|| {
                    cfg.step1_grid()
                        .configs(k)
                        .into_iter()
                        .next()
                        .map(|config| SelectedConfig {
                            dataset: d.id.clone(),
                            config,
                            selection: None,
                            candidates: Vec::new(),
                        })
                })
            })
        })
        .collect();
    let specs: Vec<_> = cfg.datasets.iter().map(|d| d.id.clone()).collect();
    let plans: Vec<serde_json::Value> = cfg
        .datasets
        .iter()
        .map(|d| {
            let ps = main_grid(&d.id, &placeholder, &cfg.kinds, &cfg.sizes);
            json!({"dataset": d.id, "plans": ps.iter().map(|p| p.notation()).collect::<Vec<_>>()})
        })
        .collect();
    let (extra, rejected) = check_plans(&cfg.extra_plans);
    print(&json!({
        "config": path,
        "datasets": specs,
        "step1_plans": cfg.step1_grid().plans(&cfg.kinds).len(),
        "main_grid": plans,
        "extra_plans": extra.iter().map(|p| p.notation()).collect::<Vec<_>>(),
        "rejected": rejected,
    }))
}

fn analyze(
    what: Analysis,
    records: &Path,
    out: &Path,
    meta: Option<PathBuf>,
    large_rows: Option<usize>,
    unfair_di: Option<f64>,
) -> Result<()> {
    let recs = read_records(records)?;
    let scores = report::scores(&recs);
    let mut files = Vec::new();
    if matches!(what, Analysis::Standardize | Analysis::All) {
        files.extend(report::write_standardized(&scores, out)?);
    }
    if matches!(what, Analysis::Tables | Analysis::All) {
        files.extend(report::write_tables(&scores, out)?);
    }
    if matches!(what, Analysis::Resources | Analysis::All) {
        files.extend(report::write_resources(&recs, out)?.1);
    }
    if matches!(what, Analysis::Guidance | Analysis::All) {
        let meta_path = meta
            .or_else(|| records.parent().map(|p| p.join(DATASETS)))
            .ok_or_else(|| FairensError::Config("guidance needs --meta".into()))?;
        let metas: Vec<DatasetMeta> = read_json(&meta_path)?;
        let mut cfg = GuidanceConfig::default();
        if let Some(n) = large_rows {
            cfg.large_rows = n;
        }
        if let Some(d) = unfair_di {
            cfg.unfair_di = d;
        }
        files.extend(report::write_guidance(&scores, &metas, &cfg, out)?.1);
    }
    print(&json!({"records": recs.len(), "files": files}))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Run { config, out, jobs } => {
            let (cfg, base) = load_config(&config)?;
            let out = output_dir(&cfg, out);
            let client = OpenmlClient::new(default_cache_dir());
            let report = run_experiment(&cfg, &base, &out, &client, jobs.unwrap_or(cfg.jobs))?;
            print(&json!({
                "output_dir": report.output_dir,
                "step1": report.step1,
                "main": report.main,
                "selected": report.selected.iter().map(|s| json!({"dataset": s.dataset, "config": s.config.label()})).collect::<Vec<_>>(),
                "rejected": report.rejected,
            }))
        }
        Command::Select { config, out, jobs } => {
            let (cfg, base) = load_config(&config)?;
            let out = output_dir(&cfg, out);
            std::fs::create_dir_all(&out).map_err(|e| FairensError::io(&out, e))?;
            let client = OpenmlClient::new(default_cache_dir());
            let datasets = prepare_all(&cfg, &base, &client)?;
            let (selected, summary) = run_step1(&cfg, &datasets, &out, jobs.unwrap_or(cfg.jobs))?;
            write_json(&out.join(SELECTED), &selected)?;
            let (plans, _) = plans_per_dataset(&cfg, &datasets, &selected);
            print(&json!({
                "step1": summary,
                "selected": selected.iter().map(|s| json!({
                    "dataset": s.dataset,
                    "config": s.config.label(),
                    "filters": s.selection.as_ref().map(|x| x.filters),
                })).collect::<Vec<_>>(),
                "main_grid_plans": plans.iter().map(Vec::len).collect::<Vec<_>>(),
            }))
        }
        Command::Analyze {
            what,
            records,
            out,
            meta,
            large_rows,
            unfair_di,
        } => analyze(what, &records, &out, meta, large_rows, unfair_di),
        Command::Demo { seed, out, jobs } => {
            let cfg = demo_config(seed);
            let report = run_demo(&cfg, &out, jobs)?;
            print(&json!({
                "output_dir": report.run.output_dir,
                "datasets": report.run.datasets,
                "main": report.run.main,
                "files": report.analysis.files,
            }))
        }
        Command::Fetch {
            openml,
            cache,
            base_url,
        } => {
            let client =
                OpenmlClient::new(cache.unwrap_or_else(default_cache_dir)).with_base_url(base_url);
            print(&client.fetch(openml)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
