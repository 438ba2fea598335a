//! End-to-end run of a configuration: step-one selection, then the main grid.

use std::path::{Path, PathBuf};

use fairens_core::analysis::DatasetMeta;
use fairens_core::composition::MitigationPlan;
use fairens_core::mitigators::{MitigatorConfig, MitigatorKind, PreMitigator};
use serde::Serialize;

use crate::config::{check_plans, RejectedPlan, RunConfig};
use crate::error::Result;
use crate::harness::{
    jobs_for, main_grid, prepare, run_jobs, select_configs, PreparedDataset, RunSummary,
    SelectedConfig,
};
use crate::io::write_json;
use crate::openml::OpenmlClient;
use crate::store::{export_csv, RecordStore};

pub const STEP1_RECORDS: &str = "step1.jsonl";
pub const RECORDS: &str = "records.jsonl";
pub const SELECTED: &str = "selected.json";
pub const DATASETS: &str = "datasets.json";

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub datasets: Vec<DatasetMeta>,
    pub selected: Vec<SelectedConfig>,
    pub step1: RunSummary,
    pub main: RunSummary,
    pub rejected: Vec<RejectedPlan>,
}

pub fn prepare_all(
    cfg: &RunConfig,
    base_dir: &Path,
    client: &OpenmlClient,
) -> Result<Vec<PreparedDataset>> {
    cfg.datasets
        .iter()
        .map(|d| prepare(d, base_dir, client))
        .collect()
}

/// Runs step one for (dataset, kind) pairs without a fixed configuration
/// and returns the fixed and chosen configurations together.
pub fn run_step1(
    cfg: &RunConfig,
    datasets: &[PreparedDataset],
    out: &Path,
    jobs: usize,
) -> Result<(Vec<SelectedConfig>, RunSummary)> {
    let grid = cfg.step1_grid();
    let kinds: Vec<MitigatorKind> = cfg
        .kinds
        .iter()
        .copied()
        .filter(|&k| k != MitigatorKind::None)
        .collect();
    let mut selected: Vec<SelectedConfig> = cfg
        .selected
        .iter()
        .cloned()
        .map(|mut s| {
            if let (Some(m), MitigatorConfig::Pre(PreMitigator::Lfr(c))) =
                (cfg.lfr_max_iter, &mut s.config)
            {
                c.max_iter = m;
            }
            s
        })
        .collect();
    let pinned: Vec<(String, MitigatorKind)> = selected
        .iter()
        .map(|s| (s.dataset.clone(), s.config.kind()))
        .collect();
    let fixed = |ds: &str, k: MitigatorKind| pinned.iter().any(|(d, pk)| d == ds && *pk == k);
    let plans: Vec<Vec<MitigationPlan>> = datasets
        .iter()
        .map(|ds| {
            let open: Vec<MitigatorKind> = kinds
                .iter()
                .copied()
                .filter(|&k| !fixed(&ds.id, k))
                .collect();
            grid.plans(&open)
        })
        .collect();
    let job_list = jobs_for(datasets, &plans, cfg.trials);
    let mut store = RecordStore::open(out.join(STEP1_RECORDS))?;
    let summary = run_jobs(
        datasets,
        &job_list,
        &cfg.roster,
        &cfg.cv(),
        jobs,
        &mut store,
    )?;
    store.compact()?;
    let records = store.records()?;
    for ds in datasets {
        let open: Vec<MitigatorKind> = kinds
            .iter()
            .copied()
            .filter(|&k| !fixed(&ds.id, k))
            .collect();
        let one = std::slice::from_ref(ds);
        selected.extend(select_configs(&records, one, &grid, &open)?);
    }
    selected.sort_by(|a, b| (&a.dataset, a.config.kind()).cmp(&(&b.dataset, b.config.kind())));
    Ok((selected, summary))
}

/// Main-grid plans per dataset, followed by the accepted extra plans.
pub fn plans_per_dataset(
    cfg: &RunConfig,
    datasets: &[PreparedDataset],
    selected: &[SelectedConfig],
) -> (Vec<Vec<MitigationPlan>>, Vec<RejectedPlan>) {
    let (extra, rejected) = check_plans(&cfg.extra_plans);
    let plans = datasets
        .iter()
        .map(|ds| {
            let mut ps = main_grid(&ds.id, selected, &cfg.kinds, &cfg.sizes);
            for p in &extra {
                if !ps.iter().any(|q| q.key() == p.key()) {
                    ps.push(p.clone());
                }
            }
            ps
        })
        .collect();
    (plans, rejected)
}

/// Runs the whole experiment into `out`. Interrupted runs resume from the
/// stored records.
pub fn run_experiment(
    cfg: &RunConfig,
    base_dir: &Path,
    out: &Path,
    client: &OpenmlClient,
    jobs: usize,
) -> Result<RunReport> {
    std::fs::create_dir_all(out).map_err(|e| crate::error::FairensError::io(out, e))?;
    let datasets = prepare_all(cfg, base_dir, client)?;
    let metas: Vec<DatasetMeta> = datasets.iter().map(|d| d.meta.clone()).collect();
    write_json(&out.join(DATASETS), &metas)?;

    let (selected, step1) = run_step1(cfg, &datasets, out, jobs)?;
    write_json(&out.join(SELECTED), &selected)?;

    let (plans, rejected) = plans_per_dataset(cfg, &datasets, &selected);
    for r in &rejected {
        log::warn!("skipping {}: {}", r.notation, r.reason);
    }
    let job_list = jobs_for(&datasets, &plans, cfg.trials);
    let mut store = RecordStore::open(out.join(RECORDS))?;
    let main = run_jobs(
        &datasets,
        &job_list,
        &cfg.roster,
        &cfg.cv(),
        jobs,
        &mut store,
    )?;
    store.compact()?;
    export_csv(&store.records()?, &out.join("records.csv"))?;
    Ok(RunReport {
        output_dir: out.to_path_buf(),
        datasets: metas,
        selected,
        step1,
        main,
        rejected,
    })
}
