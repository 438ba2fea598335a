//! Step-one configuration choice within a (dataset, mitigator kind) group.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::metrics::MetricKind;
use crate::records::ExperimentRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionPolicy {
    /// Accepted range of mean disparate impact, inclusive.
    pub di_band: [f64; 2],
    /// Break the final choice by precision instead of recall.
    pub prefer_precision: bool,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy {
            di_band: [0.8, 1.25],
            prefer_precision: false,
        }
    }
}

/// Mean metrics of one configuration over its cross-validation records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub key: String,
    pub mean_di: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
}

impl CandidateSummary {
    /// Means over defined values; NaN when a metric is never defined.
    pub fn from_records(key: &str, records: &[&ExperimentRecord]) -> Self {
        let mean = |kind: MetricKind| {
            let v: Vec<f64> = records
                .iter()
                .filter(|r| r.failure.is_none())
                .filter_map(|r| r.metric(kind).value())
                .collect();
            if v.is_empty() {
                f64::NAN
            } else {
                math::mean(&v)
            }
        };
        CandidateSummary {
            key: key.into(),
            mean_di: mean(MetricKind::DisparateImpact),
            mean_precision: mean(MetricKind::Precision),
            mean_recall: mean(MetricKind::Recall),
            mean_f1: mean(MetricKind::F1),
        }
    }
}

/// Filters applied in the returned selection, by number: (1) DI band,
/// (2) nonzero precision, (3) F1 above the group threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterSet {
    All,
    WithoutF1,
    PrecisionOnly,
    None,
}

impl FilterSet {
    const ORDER: [FilterSet; 4] = [
        FilterSet::All,
        FilterSet::WithoutF1,
        FilterSet::PrecisionOnly,
        FilterSet::None,
    ];

    fn admits(self, c: &CandidateSummary, band: [f64; 2], f1_threshold: f64) -> bool {
        let di = c.mean_di >= band[0] && c.mean_di <= band[1];
        let precision = c.mean_precision > 0.0;
        let f1 = c.mean_f1 > f1_threshold;
        match self {
            FilterSet::All => di && precision && f1,
            FilterSet::WithoutF1 => di && precision,
            FilterSet::PrecisionOnly => precision,
            FilterSet::None => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub key: String,
    pub filters: FilterSet,
    pub relaxed: bool,
    pub f1_threshold: f64,
    pub survivors: Vec<String>,
}

/// `max(mean, median)` of the candidates' mean F1 values, ignoring NaN.
pub fn f1_threshold(candidates: &[CandidateSummary]) -> f64 {
    let f1: Vec<f64> = candidates
        .iter()
        .map(|c| c.mean_f1)
        .filter(|v| !v.is_nan())
        .collect();
    if f1.is_empty() {
        return f64::INFINITY;
    }
    math::mean(&f1).max(math::median(&f1))
}

/// Applies the four-step filter and picks the configuration with the best
/// tie objective. Ties go to the lexicographically smallest key.
pub fn grid_select(candidates: &[CandidateSummary], policy: &SelectionPolicy) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput(
            "no configurations to select from".into(),
        ));
    }
    let threshold = f1_threshold(candidates);
    let objective = |c: &CandidateSummary| {
        let v = if policy.prefer_precision {
            c.mean_precision
        } else {
            c.mean_recall
        };
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    for filters in FilterSet::ORDER {
        let survivors: Vec<usize> = (0..candidates.len())
            .filter(|&i| filters.admits(&candidates[i], policy.di_band, threshold))
            .collect();
        let Some(&first) = survivors.first() else {
            continue;
        };
        let mut best = first;
        for &i in &survivors[1..] {
            let (a, b) = (objective(&candidates[i]), objective(&candidates[best]));
            if a > b || (a == b && candidates[i].key < candidates[best].key) {
                best = i;
            }
        }
        if filters != FilterSet::All {
            log::warn!("no configuration passes every filter; relaxed to {filters:?}");
        }
        return Ok(Selection {
            index: best,
            key: candidates[best].key.clone(),
            filters,
            relaxed: filters != FilterSet::All,
            f1_threshold: threshold,
            survivors: survivors
                .iter()
                .map(|&i| candidates[i].key.clone())
                .collect(),
        });
    }
    unreachable!("the last filter set admits every candidate")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn cand(key: &str, di: f64, p: f64, r: f64, f1: f64) -> CandidateSummary {
        CandidateSummary {
            key: key.into(),
            mean_di: di,
            mean_precision: p,
            mean_recall: r,
            mean_f1: f1,
        }
    }

    #[test]
    fn lone_survivor() {
        let c = vec![
            cand("a", 1.0, 0.5, 0.5, 0.9),
            cand("b", 0.5, 0.5, 0.9, 0.1),
            cand("c", 1.0, 0.5, 0.9, 0.1),
        ];
        let s = grid_select(&c, &SelectionPolicy::default()).unwrap();
        assert_eq!(s.key, "a");
        assert!(!s.relaxed);
    }

    #[test]
    fn threshold_is_max_of_mean_and_median() {
        let c: Vec<_> = [0.1, 0.2, 0.9]
            .iter()
            .enumerate()
            .map(|(i, f)| cand(&format!("{i}"), 1.0, 1.0, 1.0, *f))
            .collect();
        assert!((f1_threshold(&c) - 0.4).abs() < 1e-15);
        let c: Vec<_> = [0.1, 0.8, 0.9]
            .iter()
            .enumerate()
            .map(|(i, f)| cand(&format!("{i}"), 1.0, 1.0, 1.0, *f))
            .collect();
        assert!((f1_threshold(&c) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn precision_policy_changes_choice() {
        let c = vec![
            cand("a", 1.0, 0.9, 0.2, 0.8),
            cand("b", 1.0, 0.3, 0.8, 0.8),
            cand("z", 1.0, 0.3, 0.8, 0.1),
        ];
        let recall = grid_select(&c, &SelectionPolicy::default()).unwrap();
        let precision = grid_select(
            &c,
            &SelectionPolicy {
                prefer_precision: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(recall.key, "b");
        assert_eq!(precision.key, "a");
    }

    #[test]
    fn relaxation_order() {
        // nobody above the F1 threshold inside the band
        let c = vec![cand("a", 1.0, 0.5, 0.3, 0.2), cand("b", 2.0, 0.5, 0.9, 0.9)];
        let s = grid_select(&c, &SelectionPolicy::default()).unwrap();
        assert_eq!((s.key.as_str(), s.filters), ("a", FilterSet::WithoutF1));
        let c = vec![cand("a", 3.0, 0.0, 0.3, 0.2), cand("b", 2.0, 0.5, 0.1, 0.9)];
        let s = grid_select(&c, &SelectionPolicy::default()).unwrap();
        assert_eq!((s.key.as_str(), s.filters), ("b", FilterSet::PrecisionOnly));
        let c = vec![cand("a", 3.0, 0.0, 0.3, 0.2), cand("b", 2.0, 0.0, 0.1, 0.9)];
        let s = grid_select(&c, &SelectionPolicy::default()).unwrap();
        assert_eq!((s.key.as_str(), s.filters), ("a", FilterSet::None));
        assert!(s.relaxed);
    }

    #[test]
    fn band_is_inclusive() {
        let c = vec![
            cand("lo", 0.8, 0.5, 0.5, 0.5),
            cand("hi", 1.25, 0.5, 0.6, 0.5),
        ];
        let s = grid_select(&c, &SelectionPolicy::default()).unwrap();
        assert_eq!(s.survivors.len(), 2);
        assert_eq!(s.filters, FilterSet::WithoutF1);
        assert_eq!(s.key, "hi");
    }
}
