//! A small end-to-end run on synthetic data, one dataset per guidance
//! quadrant.

use std::path::{Path, PathBuf};

use fairens_core::analysis::{DatasetMeta, GuidanceConfig, GuidanceTree};
use fairens_core::synthetic::SyntheticConfig;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;
use crate::experiment::{run_experiment, RunReport, RECORDS};
use crate::harness::{DataSource, DatasetSpec, GridSizes};
use crate::openml::{default_cache_dir, OpenmlClient};
use crate::report;
use crate::store::read_records;

/// Rows above which a demo dataset counts as large.
pub const DEMO_LARGE_ROWS: usize = 1000;

pub fn demo_config(seed: u64) -> RunConfig {
    let quadrants = [
        ("small_fair", 400, 0.85),
        ("small_unfair", 400, 0.35),
        ("large_fair", 1200, 0.85),
        ("large_unfair", 1200, 0.35),
    ];
    let datasets = quadrants
        .iter()
        .enumerate()
        .map(|(i, &(id, rows, di))| DatasetSpec {
            id: id.into(),
            source: DataSource::Synthetic(SyntheticConfig {
                rows,
                disparate_impact: di,
                categorical: i % 2 == 0,
                seed: seed.wrapping_add(i as u64),
                ..Default::default()
            }),
            fairness_info: None,
            drop: Vec::new(),
            prefer_precision: false,
        })
        .collect();
    RunConfig {
        datasets,
        sizes: GridSizes {
            bagging: vec![1, 5],
            boosting: vec![1, 5],
        },
        seed,
        trials: 2,
        folds: 3,
        guidance: GuidanceConfig {
            large_rows: DEMO_LARGE_ROWS,
            ..Default::default()
        },
        lfr_max_iter: Some(200),
        ..Default::default()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisOutput {
    pub files: Vec<PathBuf>,
    pub guidance: GuidanceTree,
}

/// Every analysis output for the records in `run_dir`, written to
/// `run_dir/analysis`.
pub fn analyze_run(
    run_dir: &Path,
    meta: &[DatasetMeta],
    guidance: &GuidanceConfig,
) -> Result<AnalysisOutput> {
    let records = read_records(&run_dir.join(RECORDS))?;
    let dir = run_dir.join("analysis");
    let scores = report::scores(&records);
    let mut files = report::write_standardized(&scores, &dir)?;
    files.extend(report::write_tables(&scores, &dir)?);
    files.extend(report::write_resources(&records, &dir)?.1);
    let (tree, g) = report::write_guidance(&scores, meta, guidance, &dir)?;
    files.extend(g);
    Ok(AnalysisOutput {
        files,
        guidance: tree,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub run: RunReport,
    pub analysis: AnalysisOutput,
}

pub fn run_demo(cfg: &RunConfig, out: &Path, jobs: usize) -> Result<DemoReport> {
    let client = OpenmlClient::new(default_cache_dir());
    let run = run_experiment(cfg, Path::new("."), out, &client, jobs)?;
    let analysis = analyze_run(out, &run.datasets, &cfg.guidance)?;
    Ok(DemoReport { run, analysis })
}
