//! Run configuration, checked against a JSON schema before deserializing.

use std::path::{Path, PathBuf};

use fairens_core::analysis::GuidanceConfig;
use fairens_core::composition::{validate_plan, MitigationPlan, Rejection, Roster};
use fairens_core::mitigators::MitigatorKind;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{FairensError, Result};
use crate::harness::{CvOptions, DatasetSpec, GridSizes, SelectedConfig, Step1Grid};

pub const SCHEMA: &str = include_str!("../schemas/run_config.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub datasets: Vec<DatasetSpec>,
    /// Mitigator kinds of the main grid; `none` adds the unmitigated rows.
    pub kinds: Vec<MitigatorKind>,
    pub sizes: GridSizes,
    pub step1: Step1Grid,
    /// Fixed configurations; their (dataset, kind) skip step one.
    pub selected: Vec<SelectedConfig>,
    /// Plans run on every dataset besides the main grid.
    pub extra_plans: Vec<MitigationPlan>,
    pub seed: u64,
    pub trials: usize,
    pub folds: usize,
    pub keep_predictions: bool,
    pub output_dir: PathBuf,
    pub jobs: usize,
    pub roster: Roster,
    pub guidance: GuidanceConfig,
    /// Caps LFR optimizer iterations everywhere.
    pub lfr_max_iter: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let cv = CvOptions::default();
        RunConfig {
            datasets: Vec::new(),
            kinds: vec![
                MitigatorKind::None,
                MitigatorKind::Pre,
                MitigatorKind::In,
                MitigatorKind::Post,
            ],
            sizes: GridSizes::default(),
            step1: Step1Grid::default(),
            selected: Vec::new(),
            extra_plans: Vec::new(),
            seed: cv.seed,
            trials: cv.trials,
            folds: cv.folds,
            keep_predictions: cv.keep_predictions,
            output_dir: PathBuf::from("results"),
            jobs: 1,
            roster: Roster::default(),
            guidance: GuidanceConfig::default(),
            lfr_max_iter: None,
        }
    }
}

impl RunConfig {
    pub fn cv(&self) -> CvOptions {
        CvOptions {
            trials: self.trials,
            folds: self.folds,
            seed: self.seed,
            keep_predictions: self.keep_predictions,
        }
    }

    /// Step-one grid with the LFR cap applied.
    pub fn step1_grid(&self) -> Step1Grid {
        self.step1.clone().with_lfr_max_iter(self.lfr_max_iter)
    }
}

/// Checks `value` against the run-configuration schema; the first
/// violation is reported with its JSON pointer.
pub fn check_schema(value: &Value) -> Result<()> {
    let schema: Value =
        serde_json::from_str(SCHEMA).map_err(|e| FairensError::json("bundled schema", e))?;
    let validator = jsonschema::validator_for(&schema)
        .map_err(|e| FairensError::Config(format!("bundled schema: {e}")))?;
    if let Some(err) = validator.iter_errors(value).next() {
        let pointer = err.instance_path.to_string();
        return Err(FairensError::Schema {
            pointer: if pointer.is_empty() {
                "/".into()
            } else {
                pointer
            },
            message: err.to_string(),
        });
    }
    Ok(())
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| FairensError::Config(format!("invalid JSON: {e}")))?;
    check_schema(&value)?;
    let cfg: RunConfig =
        serde_json::from_value(value).map_err(|e| FairensError::Config(e.to_string()))?;
    let mut ids: Vec<&str> = cfg.datasets.iter().map(|d| d.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(FairensError::Config(format!(
            "duplicate dataset id `{}`",
            w[0]
        )));
    }
    for s in &cfg.selected {
        if !ids.contains(&s.dataset.as_str()) {
            return Err(FairensError::Config(format!(
                "selected configuration for unknown dataset `{}`",
                s.dataset
            )));
        }
    }
    Ok(cfg)
}

/// Reads a configuration; returns it with the directory relative dataset
/// paths are resolved against.
pub fn load_config(path: &Path) -> Result<(RunConfig, PathBuf)> {
    let text = std::fs::read_to_string(path).map_err(|e| FairensError::io(path, e))?;
    let cfg = parse_config(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

/// A plan the validator refused, with the rule and its explanation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedPlan {
    pub plan: MitigationPlan,
    pub notation: String,
    pub rule: Rejection,
    pub reason: &'static str,
}

/// Splits the extra plans into accepted and rejected.
pub fn check_plans(plans: &[MitigationPlan]) -> (Vec<MitigationPlan>, Vec<RejectedPlan>) {
    let mut ok = Vec::new();
    let mut rejected = Vec::new();
    for p in plans {
        match validate_plan(p) {
            Ok(()) => ok.push(p.clone()),
            Err(rule) => rejected.push(RejectedPlan {
                plan: p.clone(),
                notation: p.notation(),
                rule,
                reason: rule.reason(),
            }),
        }
    }
    (ok, rejected)
}
