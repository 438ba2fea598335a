//! Group confusion statistics, fairness and predictive metrics, and scorers.
//!
//! Fairness metrics follow the usual toolkit conventions: the positive
//! rate of a group is its share of predicted favorable outcomes, and
//! difference metrics are oriented unprivileged minus privileged, so a
//! negative value means the unprivileged group is disadvantaged.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{FairnessInfo, Protected};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    F1,
    Precision,
    Recall,
    DisparateImpact,
    StatisticalParityDifference,
    EqualOpportunityDifference,
    AverageOddsDifference,
    TimeSeconds,
    MemoryMb,
}

/// How a metric is brought toward its optimum before aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricClass {
    /// Optimal at 1; values above 1 are mirrored by their reciprocal.
    Ratio,
    /// Optimal at 0; only the magnitude matters.
    Difference,
    /// Higher is better.
    Predictive,
    /// Lower is better; not a model-quality metric.
    Resource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimum {
    One,
    Zero,
    Max,
    Min,
}

impl MetricKind {
    pub const ALL: [MetricKind; 10] = [
        MetricKind::Accuracy,
        MetricKind::F1,
        MetricKind::Precision,
        MetricKind::Recall,
        MetricKind::DisparateImpact,
        MetricKind::StatisticalParityDifference,
        MetricKind::EqualOpportunityDifference,
        MetricKind::AverageOddsDifference,
        MetricKind::TimeSeconds,
        MetricKind::MemoryMb,
    ];

    pub const FAIRNESS: [MetricKind; 4] = [
        MetricKind::DisparateImpact,
        MetricKind::StatisticalParityDifference,
        MetricKind::EqualOpportunityDifference,
        MetricKind::AverageOddsDifference,
    ];

    pub const PREDICTIVE: [MetricKind; 4] = [
        MetricKind::Accuracy,
        MetricKind::F1,
        MetricKind::Precision,
        MetricKind::Recall,
    ];

    pub fn class(self) -> MetricClass {
        use MetricKind::*;
        match self {
            DisparateImpact => MetricClass::Ratio,
            StatisticalParityDifference | EqualOpportunityDifference | AverageOddsDifference => {
                MetricClass::Difference
            }
            Accuracy | F1 | Precision | Recall => MetricClass::Predictive,
            TimeSeconds | MemoryMb => MetricClass::Resource,
        }
    }

    pub fn optimum(self) -> Optimum {
        match self.class() {
            MetricClass::Ratio => Optimum::One,
            MetricClass::Difference => Optimum::Zero,
            MetricClass::Predictive => Optimum::Max,
            MetricClass::Resource => Optimum::Min,
        }
    }

    pub fn is_fairness(self) -> bool {
        matches!(self.class(), MetricClass::Ratio | MetricClass::Difference)
    }

    /// Whether a larger value is better once symmetrized.
    pub fn higher_is_better(self) -> bool {
        matches!(self.class(), MetricClass::Ratio | MetricClass::Predictive)
    }

    pub fn as_str(self) -> &'static str {
        use MetricKind::*;
        match self {
            Accuracy => "accuracy",
            F1 => "f1",
            Precision => "precision",
            Recall => "recall",
            DisparateImpact => "disparate_impact",
            StatisticalParityDifference => "statistical_parity_difference",
            EqualOpportunityDifference => "equal_opportunity_difference",
            AverageOddsDifference => "average_odds_difference",
            TimeSeconds => "time_seconds",
            MemoryMb => "memory_mb",
        }
    }

    /// Short letter used in standardized column names (`SDO`, `SFV`, ...).
    pub fn letter(self) -> &'static str {
        use MetricKind::*;
        match self {
            Accuracy => "Acc",
            F1 => "F",
            Precision => "P",
            Recall => "R",
            DisparateImpact => "D",
            StatisticalParityDifference => "S",
            EqualOpportunityDifference => "E",
            AverageOddsDifference => "A",
            TimeSeconds => "T",
            MemoryMb => "M",
        }
    }

    pub fn parse(s: &str) -> Option<MetricKind> {
        MetricKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A metric value, or a marker for a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricValue {
    Defined(f64),
    Undefined,
}

impl MetricValue {
    pub fn value(self) -> Option<f64> {
        match self {
            MetricValue::Defined(v) => Some(v),
            MetricValue::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, MetricValue::Defined(_))
    }

    fn ratio(num: f64, den: f64) -> MetricValue {
        if den == 0.0 {
            MetricValue::Undefined
        } else {
            MetricValue::Defined(num / den)
        }
    }
}

/// Serialized form of a metric value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub kind: MetricKind,
    pub value: Option<f64>,
    pub defined: bool,
}

impl MetricReport {
    pub fn new(kind: MetricKind, value: MetricValue) -> Self {
        MetricReport {
            kind,
            value: value.value(),
            defined: value.is_defined(),
        }
    }

    pub fn metric_value(&self) -> MetricValue {
        match (self.defined, self.value) {
            (true, Some(v)) => MetricValue::Defined(v),
            _ => MetricValue::Undefined,
        }
    }
}

/// Weighted binary confusion counts; favorable is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: f64,
    pub fp: f64,
    pub tn: f64,
    pub fn_: f64,
}

impl Confusion {
    pub fn total(&self) -> f64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, truth: bool, pred: bool, w: f64) {
        match (truth, pred) {
            (true, true) => self.tp += w,
            (false, true) => self.fp += w,
            (false, false) => self.tn += w,
            (true, false) => self.fn_ += w,
        }
    }

    pub fn positive_rate(&self) -> MetricValue {
        MetricValue::ratio(self.tp + self.fp, self.total())
    }

    pub fn tpr(&self) -> MetricValue {
        MetricValue::ratio(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> MetricValue {
        MetricValue::ratio(self.fp, self.fp + self.tn)
    }

    fn merged(&self, other: &Confusion) -> Confusion {
        Confusion {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            fn_: self.fn_ + other.fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupConfusion {
    pub privileged: Confusion,
    pub unprivileged: Confusion,
}

impl GroupConfusion {
    pub fn overall(&self) -> Confusion {
        self.privileged.merged(&self.unprivileged)
    }
}

pub fn group_confusion(
    y_true: &[bool],
    y_pred: &[bool],
    priv_mask: &[bool],
    weights: &[f64],
) -> Result<GroupConfusion> {
    let n = y_true.len();
    for len in [y_pred.len(), priv_mask.len(), weights.len()] {
        if len != n {
            return Err(Error::Shape {
                expected: n,
                got: len,
            });
        }
    }
    let mut conf = GroupConfusion::default();
    for i in 0..n {
        let cell = if priv_mask[i] {
            &mut conf.privileged
        } else {
            &mut conf.unprivileged
        };
        cell.add(y_true[i], y_pred[i], weights[i]);
    }
    if conf.privileged.total() == 0.0 {
        return Err(Error::DegenerateGroup(
            "privileged group has no rows".into(),
        ));
    }
    if conf.unprivileged.total() == 0.0 {
        return Err(Error::DegenerateGroup(
            "unprivileged group has no rows".into(),
        ));
    }
    Ok(conf)
}

fn diff(a: MetricValue, b: MetricValue) -> MetricValue {
    match (a, b) {
        (MetricValue::Defined(a), MetricValue::Defined(b)) => MetricValue::Defined(a - b),
        _ => MetricValue::Undefined,
    }
}

pub fn fairness_metric(kind: MetricKind, conf: &GroupConfusion) -> Result<MetricValue> {
    let (p, u) = (&conf.privileged, &conf.unprivileged);
    Ok(match kind {
        MetricKind::DisparateImpact => match (u.positive_rate(), p.positive_rate()) {
            (MetricValue::Defined(ru), MetricValue::Defined(rp)) => MetricValue::ratio(ru, rp),
            _ => MetricValue::Undefined,
        },
        MetricKind::StatisticalParityDifference => diff(u.positive_rate(), p.positive_rate()),
        MetricKind::EqualOpportunityDifference => diff(u.tpr(), p.tpr()),
        MetricKind::AverageOddsDifference => match (diff(u.fpr(), p.fpr()), diff(u.tpr(), p.tpr()))
        {
            (MetricValue::Defined(f), MetricValue::Defined(t)) => {
                MetricValue::Defined(0.5 * (f + t))
            }
            _ => MetricValue::Undefined,
        },
        other => {
            return Err(Error::InvalidInput(alloc::format!(
                "{other} is not a fairness metric"
            )))
        }
    })
}

fn predictive_from(kind: MetricKind, c: &Confusion) -> Result<f64> {
    let precision = MetricValue::ratio(c.tp, c.tp + c.fp).value().unwrap_or(0.0);
    let recall = MetricValue::ratio(c.tp, c.tp + c.fn_)
        .value()
        .unwrap_or(0.0);
    Ok(match kind {
        MetricKind::Accuracy => MetricValue::ratio(c.tp + c.tn, c.total())
            .value()
            .unwrap_or(0.0),
        MetricKind::Precision => precision,
        MetricKind::Recall => recall,
        MetricKind::F1 => {
            if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            }
        }
        other => {
            return Err(Error::InvalidInput(alloc::format!(
                "{other} is not a predictive metric"
            )))
        }
    })
}

pub fn predictive_metric(
    kind: MetricKind,
    y_true: &[bool],
    y_pred: &[bool],
    weights: &[f64],
) -> Result<f64> {
    if y_pred.len() != y_true.len() || weights.len() != y_true.len() {
        return Err(Error::Shape {
            expected: y_true.len(),
            got: y_pred.len().min(weights.len()),
        });
    }
    let mut c = Confusion::default();
    for i in 0..y_true.len() {
        c.add(y_true[i], y_pred[i], weights[i]);
    }
    predictive_from(kind, &c)
}

/// Any non-resource metric from a group confusion.
pub fn metric_from_confusion(kind: MetricKind, conf: &GroupConfusion) -> Result<MetricValue> {
    match kind.class() {
        MetricClass::Ratio | MetricClass::Difference => fairness_metric(kind, conf),
        MetricClass::Predictive => predictive_from(kind, &conf.overall()).map(MetricValue::Defined),
        MetricClass::Resource => Err(Error::InvalidInput(alloc::format!(
            "{kind} is not computed from predictions"
        ))),
    }
}

/// Maps a value into the region around the metric's optimum: ratios above
/// one become their reciprocal, differences become magnitudes.
pub fn symmetrize(kind: MetricKind, value: f64) -> f64 {
    match kind.class() {
        MetricClass::Ratio => {
            if value > 1.0 {
                1.0 / value
            } else {
                value
            }
        }
        MetricClass::Difference => crate::math::abs(value),
        MetricClass::Predictive | MetricClass::Resource => value,
    }
}

/// A metric bound to fairness metadata and a feature layout, evaluated on a
/// trained model and labeled test data.
#[derive(Debug, Clone)]
pub struct Scorer {
    kind: MetricKind,
    protected: Protected,
}

pub fn make_scorer(
    kind: MetricKind,
    fi: &FairnessInfo,
    feature_names: &[String],
) -> Result<Scorer> {
    if kind.class() == MetricClass::Resource {
        return Err(Error::InvalidInput(alloc::format!(
            "{kind} cannot be scored from predictions"
        )));
    }
    Ok(Scorer {
        kind,
        protected: Protected::bind(feature_names, fi)?,
    })
}

impl Scorer {
    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    /// Raw (non-symmetrized) metric value of `model` on `(x, y)`.
    pub fn score(&self, model: &dyn Model, x: &Matrix, y: &[bool]) -> Result<MetricValue> {
        let pred = model.predict(x)?;
        let weights: Vec<f64> = alloc::vec![1.0; y.len()];
        let conf = group_confusion(y, &pred, &self.protected.priv_mask(x), &weights)?;
        metric_from_confusion(self.kind, &conf)
    }
}
