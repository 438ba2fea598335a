//! Cross-validated experiment runs: dataset loading, the two-step grid and a
//! worker pool feeding a single record writer.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use fairens_core::analysis::DatasetMeta;
use fairens_core::composition::{build_pipeline, grid_plans, MitigationPlan, Pipeline, Roster};
use fairens_core::data::{baseline_di, preprocess, stratified_kfold, Dataset, FairnessInfo, Fold};
use fairens_core::metrics::{MetricKind, MetricReport, MetricValue};
use fairens_core::mitigators::{
    CalEqOddsConfig, CostConstraint, InMitigator, LfrConfig, MitigatorConfig, MitigatorKind,
    PostMitigator, PreMitigator, PrejudiceRemover,
};
use fairens_core::records::{ExperimentRecord, Predictions, RecordKey};
use fairens_core::rng;
use fairens_core::selection::{grid_select, CandidateSummary, Selection, SelectionPolicy};
use fairens_core::synthetic::{planted_bias, SyntheticConfig};
use serde::{Deserialize, Serialize};

use crate::arff::parse_arff;
use crate::error::{FairensError, Result};
use crate::io::{read_csv, CsvOptions};
use crate::memory::MemoryWindow;
use crate::openml::OpenmlClient;
use crate::store::RecordStore;

fn default_label() -> String {
    "label".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        #[serde(default = "default_label")]
        label: String,
        #[serde(default)]
        categorical: Vec<String>,
        #[serde(default)]
        weights: Option<String>,
    },
    Arff {
        path: PathBuf,
        #[serde(default)]
        label: Option<String>,
    },
    Openml {
        id: u32,
        #[serde(default)]
        label: Option<String>,
    },
    Synthetic(SyntheticConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub id: String,
    pub source: DataSource,
    /// Required except for synthetic sources, which carry their own.
    #[serde(default)]
    pub fairness_info: Option<FairnessInfo>,
    #[serde(default)]
    pub drop: Vec<String>,
    /// Break step-one ties by precision instead of recall.
    #[serde(default)]
    pub prefer_precision: bool,
}

/// A dataset with incomplete rows removed, ready for cross-validation.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub id: String,
    pub data: Dataset,
    pub fairness_info: FairnessInfo,
    pub drop: Vec<String>,
    pub prefer_precision: bool,
    pub meta: DatasetMeta,
}

impl PreparedDataset {
    pub fn new(
        id: &str,
        data: Dataset,
        fi: FairnessInfo,
        drop: Vec<String>,
        prefer_precision: bool,
    ) -> Result<Self> {
        fi.validate()?;
        let (clean, dropped) = data.drop_incomplete(&fi)?;
        if dropped > 0 {
            log::info!("{id}: dropped {dropped} incomplete rows");
        }
        let baseline = baseline_di(&clean, &fi)?.value().unwrap_or(f64::NAN);
        Ok(PreparedDataset {
            id: id.into(),
            meta: DatasetMeta {
                id: id.into(),
                rows: clean.n_rows(),
                baseline_di: baseline,
            },
            data: clean,
            fairness_info: fi,
            drop,
            prefer_precision,
        })
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads a dataset; relative paths are taken from `base_dir`.
pub fn prepare(
    spec: &DatasetSpec,
    base_dir: &Path,
    client: &OpenmlClient,
) -> Result<PreparedDataset> {
    let need_fi = || {
        spec.fairness_info.clone().ok_or_else(|| {
            FairensError::Config(format!("dataset `{}` needs fairness_info", spec.id))
        })
    };
    let (data, fi) = match &spec.source {
        DataSource::Csv {
            path,
            label,
            categorical,
            weights,
        } => {
            let opts = CsvOptions {
                label: label.clone(),
                categorical: categorical.clone(),
                weights: weights.clone(),
                ..Default::default()
            };
            (read_csv(&resolve(base_dir, path), &opts)?, need_fi()?)
        }
        DataSource::Arff { path, label } => {
            let path = resolve(base_dir, path);
            let text = std::fs::read_to_string(&path).map_err(|e| FairensError::io(&path, e))?;
            (parse_arff(&text)?.to_dataset(label.as_deref())?, need_fi()?)
        }
        DataSource::Openml { id, label } => (client.load(*id, label.as_deref())?, need_fi()?),
        DataSource::Synthetic(cfg) => {
            let (d, fi) = planted_bias(cfg)?;
            (d, spec.fairness_info.clone().unwrap_or(fi))
        }
    };
    PreparedDataset::new(&spec.id, data, fi, spec.drop.clone(), spec.prefer_precision)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvOptions {
    pub trials: usize,
    pub folds: usize,
    pub seed: u64,
    pub keep_predictions: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            trials: 5,
            folds: 3,
            seed: 0,
            keep_predictions: false,
        }
    }
}

impl CvOptions {
    pub fn split_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }

    pub fn fit_seed(&self, trial: usize, fold: usize) -> u64 {
        rng::mix(self.split_seed(trial), fold as u64)
    }
}

/// Folds of one trial; every plan of the trial sees the same split.
pub fn trial_folds(ds: &PreparedDataset, opts: &CvOptions, trial: usize) -> Result<Vec<Fold>> {
    Ok(stratified_kfold(
        &ds.data,
        &ds.fairness_info,
        opts.folds,
        opts.split_seed(trial),
    )?)
}

fn failed_metrics() -> Vec<MetricReport> {
    MetricKind::PREDICTIVE
        .into_iter()
        .chain(MetricKind::FAIRNESS)
        .map(|k| MetricReport::new(k, MetricValue::Undefined))
        .collect()
}

struct FoldOutcome {
    metrics: Vec<MetricReport>,
    predictions: Predictions,
}

fn fit_fold(
    ds: &PreparedDataset,
    pipeline: &Pipeline,
    train: &[usize],
    test: &[usize],
    seed: u64,
) -> Result<(FoldOutcome, f64, f64)> {
    let fi = &ds.fairness_info;
    let pre_tr = preprocess(&ds.data.select_rows(train), fi, &ds.drop, None)?;
    let pre_te = preprocess(
        &ds.data.select_rows(test),
        fi,
        &ds.drop,
        Some(&pre_tr.standardizer),
    )?;
    let tr = pre_tr.data.to_training(&pre_tr.fairness_info)?;
    let te = pre_te.data.to_training(&pre_te.fairness_info)?;
    let window = MemoryWindow::start();
    let t0 = Instant::now();
    let model = pipeline.fit(&tr.x, &tr.y, &tr.weights, &tr.protected, seed)?;
    let y_pred = model.predict(&te.x)?;
    let elapsed = t0.elapsed().as_secs_f64();
    let memory = window.peak_mb();
    drop(model);
    let predictions = Predictions {
        y_true: te.y.clone(),
        y_pred,
        privileged: te.protected.priv_mask(&te.x),
    };
    Ok((
        FoldOutcome {
            metrics: predictions.metrics()?,
            predictions,
        },
        elapsed,
        memory,
    ))
}

/// Runs every fold of one trial for one plan. Failures become records
/// carrying the error instead of aborting the run.
pub fn run_trial(
    ds: &PreparedDataset,
    plan: &MitigationPlan,
    pipeline: &Pipeline,
    folds: &[Fold],
    trial: usize,
    opts: &CvOptions,
) -> Vec<ExperimentRecord> {
    let key = plan.key();
    folds
        .iter()
        .enumerate()
        .map(|(f, (train, test))| {
            let seed = opts.fit_seed(trial, f);
            let t0 = Instant::now();
            let (metrics, predictions, time_seconds, memory_mb, failure) =
                match fit_fold(ds, pipeline, train, test, seed) {
                    Ok((out, t, m)) => (out.metrics, Some(out.predictions), t, m, None),
                    Err(e) => {
                        log::warn!("{} {key} trial {trial} fold {f}: {e}", ds.id);
                        (
                            failed_metrics(),
                            None,
                            t0.elapsed().as_secs_f64(),
                            0.0,
                            Some(e.to_string()),
                        )
                    }
                };
            ExperimentRecord {
                dataset: ds.id.clone(),
                key: key.clone(),
                plan: plan.clone(),
                trial,
                fold: f,
                seed,
                metrics,
                time_seconds,
                memory_mb,
                failure,
                predictions: if opts.keep_predictions {
                    predictions
                } else {
                    None
                },
            }
        })
        .collect()
}

/// One unit of work: every fold of one (dataset, plan, trial).
#[derive(Debug, Clone)]
pub struct Job {
    pub dataset: usize,
    pub plan: MitigationPlan,
    pub trial: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RunSummary {
    pub jobs: usize,
    pub skipped: usize,
    pub records: usize,
    pub failures: usize,
}

/// Runs the jobs not yet complete in `store` on `workers` threads. Records
/// are written by the calling thread as jobs finish.
pub fn run_jobs(
    datasets: &[PreparedDataset],
    jobs: &[Job],
    roster: &Roster,
    opts: &CvOptions,
    workers: usize,
    store: &mut RecordStore,
) -> Result<RunSummary> {
    let mut summary = RunSummary {
        jobs: jobs.len(),
        ..Default::default()
    };
    let complete = |j: &Job| {
        let key = j.plan.key();
        (0..opts.folds).all(|fold| {
            store.contains(&RecordKey {
                dataset: datasets[j.dataset].id.clone(),
                key: key.clone(),
                trial: j.trial,
                fold,
            })
        })
    };
    let pending: Vec<&Job> = jobs.iter().filter(|j| !complete(j)).collect();
    summary.skipped = jobs.len() - pending.len();
    if pending.is_empty() {
        return Ok(summary);
    }
    let mut pipelines = BTreeMap::new();
    for j in &pending {
        if let Entry::Vacant(e) = pipelines.entry(j.plan.key()) {
            e.insert(build_pipeline(&j.plan, roster)?);
        }
    }
    // folds per (dataset, trial), shared by every plan
    let mut splits = BTreeMap::new();
    for j in &pending {
        if let Entry::Vacant(e) = splits.entry((j.dataset, j.trial)) {
            e.insert(trial_folds(&datasets[j.dataset], opts, j.trial)?);
        }
    }
    let next = AtomicUsize::new(0);
    let workers = workers.clamp(1, pending.len());
    let (tx, rx) = mpsc::channel::<Vec<ExperimentRecord>>();
    let total = pending.len();
    std::thread::scope(|s| -> Result<()> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, pending, pipelines, splits) = (&next, &pending, &pipelines, &splits);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = pending.get(i) else { break };
                let ds = &datasets[job.dataset];
                let records = run_trial(
                    ds,
                    &job.plan,
                    &pipelines[&job.plan.key()],
                    &splits[&(job.dataset, job.trial)],
                    job.trial,
                    opts,
                );
                if tx.send(records).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut done = 0;
        for records in rx {
            done += 1;
            for r in &records {
                summary.failures += usize::from(r.failure.is_some());
                if store.append(r)? {
                    summary.records += 1;
                }
            }
            if let Some(r) = records.first() {
                log::info!("[{done}/{total}] {} {} trial {}", r.dataset, r.key, r.trial);
            }
        }
        Ok(())
    })?;
    Ok(summary)
}

/// Jobs for every (dataset, plan, trial) combination.
pub fn jobs_for(
    datasets: &[PreparedDataset],
    plans: &[Vec<MitigationPlan>],
    trials: usize,
) -> Vec<Job> {
    let mut jobs = Vec::new();
    for (d, ps) in plans.iter().enumerate().take(datasets.len()) {
        for plan in ps {
            for trial in 0..trials {
                jobs.push(Job {
                    dataset: d,
                    plan: plan.clone(),
                    trial,
                });
            }
        }
    }
    jobs
}

/// Hyperparameter grids searched in step one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Step1Grid {
    pub pre: Vec<PreMitigator>,
    pub r#in: Vec<InMitigator>,
    pub post: Vec<PostMitigator>,
}

impl Default for Step1Grid {
    fn default() -> Self {
        let mut pre = vec![PreMitigator::Reweighing];
        pre.extend(
            [0.2, 0.4, 0.6, 0.8, 1.0]
                .map(|repair_level| PreMitigator::DisparateImpactRemover { repair_level }),
        );
        pre.extend(
            [(1.0, 10.0), (5.0, 10.0), (10.0, 5.0), (50.0, 5.0)].map(|(ay, az)| {
                PreMitigator::Lfr(LfrConfig {
                    k: 5,
                    ax: 0.01,
                    ay,
                    az,
                    ..Default::default()
                })
            }),
        );
        Step1Grid {
            pre,
            r#in: [1.0, 10.0, 100.0, 1000.0]
                .map(|eta| InMitigator::PrejudiceRemover(PrejudiceRemover::with_eta(eta)))
                .to_vec(),
            post: [
                CostConstraint::Fpr,
                CostConstraint::Fnr,
                CostConstraint::Weighted,
            ]
            .map(|cost_constraint| {
                PostMitigator::CalibratedEqOdds(CalEqOddsConfig {
                    cost_constraint,
                    ..Default::default()
                })
            })
            .to_vec(),
        }
    }
}

impl Step1Grid {
    pub fn configs(&self, kind: MitigatorKind) -> Vec<MitigatorConfig> {
        match kind {
            MitigatorKind::Pre => self.pre.iter().cloned().map(MitigatorConfig::Pre).collect(),
            MitigatorKind::In => self.r#in.iter().cloned().map(MitigatorConfig::In).collect(),
            MitigatorKind::Post => self
                .post
                .iter()
                .cloned()
                .map(MitigatorConfig::Post)
                .collect(),
            MitigatorKind::None => Vec::new(),
        }
    }

    /// Caps LFR optimizer iterations.
    pub fn with_lfr_max_iter(mut self, max_iter: Option<usize>) -> Self {
        if let Some(m) = max_iter {
            for p in &mut self.pre {
                if let PreMitigator::Lfr(c) = p {
                    c.max_iter = m;
                }
            }
        }
        self
    }

    /// Lone-estimator plans evaluated in step one.
    pub fn plans(&self, kinds: &[MitigatorKind]) -> Vec<MitigationPlan> {
        kinds
            .iter()
            .flat_map(|&k| self.configs(k))
            .map(|c| {
                MitigationPlan::new(
                    fairens_core::ensembles::EnsembleKind::None,
                    c.kind(),
                    Default::default(),
                )
                .with_config(c)
            })
            .collect()
    }
}

/// The configuration chosen for one (dataset, mitigator kind).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedConfig {
    pub dataset: String,
    pub config: MitigatorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<CandidateSummary>,
}

/// Applies the step-one filter to stored records of lone-estimator plans.
pub fn select_configs(
    records: &[ExperimentRecord],
    datasets: &[PreparedDataset],
    grid: &Step1Grid,
    kinds: &[MitigatorKind],
) -> Result<Vec<SelectedConfig>> {
    let mut out = Vec::new();
    for ds in datasets {
        let policy = SelectionPolicy {
            prefer_precision: ds.prefer_precision,
            ..Default::default()
        };
        for &kind in kinds {
            let configs = grid.configs(kind);
            if configs.is_empty() {
                continue;
            }
            let plans: Vec<MitigationPlan> = grid.plans(&[kind]).into_iter().collect();
            let candidates: Vec<CandidateSummary> = plans
                .iter()
                .map(|p| {
                    let key = p.key();
                    let rs: Vec<&ExperimentRecord> = records
                        .iter()
                        .filter(|r| r.dataset == ds.id && r.key == key)
                        .collect();
                    CandidateSummary::from_records(&key, &rs)
                })
                .collect();
            let selection = grid_select(&candidates, &policy)?;
            log::info!(
                "{}: selected {} ({:?})",
                ds.id,
                selection.key,
                selection.filters
            );
            out.push(SelectedConfig {
                dataset: ds.id.clone(),
                config: configs[selection.index].clone(),
                selection: Some(selection),
                candidates,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSizes {
    pub bagging: Vec<usize>,
    pub boosting: Vec<usize>,
}

impl Default for GridSizes {
    fn default() -> Self {
        GridSizes {
            bagging: vec![1, 5, 10, 50, 100],
            boosting: vec![1, 10, 50, 100, 500],
        }
    }
}

/// Main-grid plans for one dataset: the baseline rows plus, for every kind
/// with a selected configuration, its homogeneous and heterogeneous plans.
pub fn main_grid(
    dataset: &str,
    selected: &[SelectedConfig],
    kinds: &[MitigatorKind],
    sizes: &GridSizes,
) -> Vec<MitigationPlan> {
    let mut plans = Vec::new();
    for &kind in kinds {
        if kind == MitigatorKind::None {
            plans.extend(grid_plans(kind, None, &sizes.bagging, &sizes.boosting));
            continue;
        }
        match selected
            .iter()
            .find(|s| s.dataset == dataset && s.config.kind() == kind)
        {
            Some(s) => plans.extend(grid_plans(
                kind,
                Some(&s.config),
                &sizes.bagging,
                &sizes.boosting,
            )),
            None => log::warn!(
                "{dataset}: no selected {} configuration; skipping its plans",
                kind.as_str()
            ),
        }
    }
    plans
}
