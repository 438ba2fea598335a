//! Experiment records: one (dataset, plan, trial, fold) result.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::composition::MitigationPlan;
use crate::error::Result;
use crate::metrics::{
    group_confusion, metric_from_confusion, MetricKind, MetricReport, MetricValue,
};

/// Test-fold predictions kept for recomputing metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub y_true: Vec<bool>,
    pub y_pred: Vec<bool>,
    pub privileged: Vec<bool>,
}

impl Predictions {
    /// Every prediction-based metric, as stored in a record.
    pub fn metrics(&self) -> Result<Vec<MetricReport>> {
        let w = alloc::vec![1.0; self.y_true.len()];
        let conf = group_confusion(&self.y_true, &self.y_pred, &self.privileged, &w)?;
        MetricKind::PREDICTIVE
            .into_iter()
            .chain(MetricKind::FAIRNESS)
            .map(|k| Ok(MetricReport::new(k, metric_from_confusion(k, &conf)?)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub dataset: String,
    /// Unique plan key within the run (notation plus mitigator label).
    pub key: String,
    pub plan: MitigationPlan,
    pub trial: usize,
    pub fold: usize,
    pub seed: u64,
    pub metrics: Vec<MetricReport>,
    pub time_seconds: f64,
    pub memory_mb: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<Predictions>,
}

/// Identity of a record in the store.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordKey {
    pub dataset: String,
    pub key: String,
    pub trial: usize,
    pub fold: usize,
}

impl ExperimentRecord {
    pub fn record_key(&self) -> RecordKey {
        RecordKey {
            dataset: self.dataset.clone(),
            key: self.key.clone(),
            trial: self.trial,
            fold: self.fold,
        }
    }

    /// A stored metric; time and memory come from their own fields.
    pub fn metric(&self, kind: MetricKind) -> MetricValue {
        match kind {
            MetricKind::TimeSeconds => MetricValue::Defined(self.time_seconds),
            MetricKind::MemoryMb => MetricValue::Defined(self.memory_mb),
            _ => self
                .metrics
                .iter()
                .find(|m| m.kind == kind)
                .map(MetricReport::metric_value)
                .unwrap_or(MetricValue::Undefined),
        }
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn metrics_from_predictions() {
        let p = Predictions {
            y_true: vec![true, false, true, false],
            y_pred: vec![true, true, false, false],
            privileged: vec![true, true, false, false],
        };
        let m = p.metrics().unwrap();
        let get = |k| m.iter().find(|r| r.kind == k).unwrap().metric_value();
        assert_eq!(get(MetricKind::Accuracy), MetricValue::Defined(0.5));
        // privileged rate 1, unprivileged 0
        assert_eq!(get(MetricKind::DisparateImpact), MetricValue::Defined(0.0));
        assert_eq!(
            get(MetricKind::StatisticalParityDifference),
            MetricValue::Defined(-1.0)
        );
    }

    #[test]
    fn json_shape() {
        let r = ExperimentRecord {
            dataset: "d".into(),
            key: "NoEnsemble(est)".into(),
            plan: MitigationPlan::baseline(),
            trial: 0,
            fold: 2,
            seed: 7,
            metrics: vec![MetricReport::new(
                MetricKind::DisparateImpact,
                MetricValue::Undefined,
            )],
            time_seconds: 0.5,
            memory_mb: 1.0,
            failure: None,
            predictions: None,
        };
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["metrics"][0]["kind"], "disparate_impact");
        assert_eq!(v["metrics"][0]["defined"], false);
        assert!(v.get("failure").is_none());
        let back: ExperimentRecord = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
        assert_eq!(
            back.metric(MetricKind::TimeSeconds),
            MetricValue::Defined(0.5)
        );
    }
}
