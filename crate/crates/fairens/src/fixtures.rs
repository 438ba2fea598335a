//! Per-dataset mitigator configurations chosen in the original study, bundled
//! as JSON. In-estimator mitigators without an implementation here carry no
//! `config`.

use fairens_core::mitigators::{MitigatorConfig, MitigatorKind};
use serde::{Deserialize, Serialize};

use crate::error::{FairensError, Result};

pub const PAPER_CONFIGS: &str = include_str!("../fixtures/paper_configs.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperConfig {
    pub dataset: String,
    pub kind: MitigatorKind,
    pub mitigator: String,
    /// The hyperparameter cell as printed.
    pub hyperparameters: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<MitigatorConfig>,
}

pub fn paper_configs() -> Result<Vec<PaperConfig>> {
    serde_json::from_str(PAPER_CONFIGS).map_err(|e| FairensError::json("bundled configurations", e))
}

/// The chosen configuration of `kind` for a dataset, if implemented.
pub fn paper_config(dataset: &str, kind: MitigatorKind) -> Result<Option<MitigatorConfig>> {
    Ok(paper_configs()?
        .into_iter()
        .find(|c| c.dataset == dataset && c.kind == kind)
        .and_then(|c| c.config))
}
