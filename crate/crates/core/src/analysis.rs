//! Cross-dataset standardization, research-question tables, resource curves
//! and the guidance tree.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::composition::{Level, MitigationPlan};
use crate::ensembles::EnsembleKind;
use crate::error::{Error, Result};
use crate::math;
use crate::metrics::{symmetrize, MetricKind};
use crate::mitigators::MitigatorKind;
use crate::records::ExperimentRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Outcome,
    Volatility,
}

/// Column symbol such as `SDO` or `SFV`.
pub fn symbol(metric: MetricKind, measure: Measure) -> String {
    let m = match measure {
        Measure::Outcome => "O",
        Measure::Volatility => "V",
    };
    format!("S{}{m}", metric.letter())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedScore {
    pub dataset: String,
    pub key: String,
    pub notation: String,
    pub plan: MitigationPlan,
    pub metric: MetricKind,
    /// Mean and sample standard deviation of the symmetrized values.
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    pub outcome: f64,
    pub volatility: f64,
}

impl StandardizedScore {
    pub fn get(&self, measure: Measure) -> f64 {
        match measure {
            Measure::Outcome => self.outcome,
            Measure::Volatility => self.volatility,
        }
    }
}

/// A (dataset, measure) whose scaling range was empty; all its values map to 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegenerateScale {
    pub dataset: String,
    pub measure: Measure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardized {
    pub metric: MetricKind,
    pub scores: Vec<StandardizedScore>,
    pub degenerate: Vec<DegenerateScale>,
}

impl Standardized {
    pub fn find(&self, dataset: &str, key: &str) -> Option<&StandardizedScore> {
        self.scores
            .iter()
            .find(|s| s.dataset == dataset && s.key == key)
    }
}

/// Values that signal a fitting problem rather than a measurement.
pub fn is_trivial(kind: MetricKind, value: f64) -> bool {
    !value.is_finite()
        || match kind {
            MetricKind::DisparateImpact | MetricKind::F1 => value == 0.0,
            _ => false,
        }
}

/// Min-max scaling; an empty range maps everything to 0 and returns `false`.
pub fn min_max(values: &[f64]) -> (Vec<f64>, bool) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return (vec![0.0; values.len()], false);
    }
    (values.iter().map(|v| (v - lo) / (hi - lo)).collect(), true)
}

/// Per dataset: drop failed, undefined and trivial values, symmetrize, take
/// per-plan mean and standard deviation, then min-max scale both across plans.
pub fn standardize(records: &[ExperimentRecord], kind: MetricKind) -> Standardized {
    let mut by_dataset: BTreeMap<&str, BTreeMap<&str, (&ExperimentRecord, Vec<f64>)>> =
        BTreeMap::new();
    for r in records.iter().filter(|r| r.succeeded()) {
        let Some(v) = r.metric(kind).value() else {
            continue;
        };
        if is_trivial(kind, v) {
            continue;
        }
        by_dataset
            .entry(&r.dataset)
            .or_default()
            .entry(&r.key)
            .or_insert_with(|| (r, Vec::new()))
            .1
            .push(symmetrize(kind, v));
    }
    let mut out = Standardized {
        metric: kind,
        scores: Vec::new(),
        degenerate: Vec::new(),
    };
    for (dataset, plans) in by_dataset {
        let means: Vec<f64> = plans.values().map(|(_, v)| math::mean(v)).collect();
        let stds: Vec<f64> = plans.values().map(|(_, v)| math::sample_std(v)).collect();
        let (outcomes, ok_o) = min_max(&means);
        let (vols, ok_v) = min_max(&stds);
        for (measure, ok) in [(Measure::Outcome, ok_o), (Measure::Volatility, ok_v)] {
            if !ok {
                log::warn!(
                    "{dataset}: degenerate {} scaling for {kind}",
                    symbol(kind, measure)
                );
                out.degenerate.push(DegenerateScale {
                    dataset: dataset.to_string(),
                    measure,
                });
            }
        }
        for (i, (key, (rec, values))) in plans.iter().enumerate() {
            out.scores.push(StandardizedScore {
                dataset: dataset.to_string(),
                key: key.to_string(),
                notation: rec.plan.notation(),
                plan: rec.plan.clone(),
                metric: kind,
                mean: means[i],
                std: stds[i],
                count: values.len(),
                outcome: outcomes[i],
                volatility: vols[i],
            });
        }
    }
    out
}

/// Standardized scores for several metrics at once.
pub type ScoreSet = BTreeMap<MetricKind, Standardized>;

pub fn standardize_all(records: &[ExperimentRecord], kinds: &[MetricKind]) -> ScoreSet {
    kinds
        .iter()
        .map(|&k| (k, standardize(records, k)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub labels: Vec<String>,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub title: String,
    pub label_columns: Vec<String>,
    pub value_columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl Table {
    /// Aligned plain text; missing values print as `-`.
    pub fn to_text(&self, decimals: usize) -> String {
        let header: Vec<String> = self
            .label_columns
            .iter()
            .chain(&self.value_columns)
            .cloned()
            .collect();
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                r.labels
                    .iter()
                    .cloned()
                    .chain(r.values.iter().map(|v| match v {
                        Some(v) => format!("{v:.decimals$}"),
                        None => "-".into(),
                    }))
                    .collect()
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
        for row in &body {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let n_labels = self.label_columns.len();
        let line = |cells: &[String]| -> String {
            let mut s = String::new();
            for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                if i < n_labels {
                    let _ = write!(s, "{c:<w$}");
                } else {
                    let _ = write!(s, "{c:>w$}");
                }
            }
            s.trim_end().to_string()
        };
        let mut out = format!("{}\n", self.title);
        out.push_str(&line(&header));
        out.push('\n');
        let total: usize = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for row in &body {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }
}

/// The research-question tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RqTable {
    /// Disparate impact by ensemble type and mitigator kind.
    Rq1,
    /// F1 by ensemble type and mitigator kind.
    Rq2,
    /// Pre-mitigated homogeneous ensembles by size and level: DI and SPD.
    Rq3Homogeneous,
    /// Pre-mitigated voting and stacking configurations: DI.
    Rq3Heterogeneous,
    /// Pre-mitigated homogeneous ensembles by size and level: AOD and EOD.
    Rq3HomogeneousSupp,
}

impl RqTable {
    pub const ALL: [RqTable; 5] = [
        RqTable::Rq1,
        RqTable::Rq2,
        RqTable::Rq3Homogeneous,
        RqTable::Rq3Heterogeneous,
        RqTable::Rq3HomogeneousSupp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RqTable::Rq1 => "rq1",
            RqTable::Rq2 => "rq2",
            RqTable::Rq3Homogeneous => "rq3-homogeneous",
            RqTable::Rq3Heterogeneous => "rq3-heterogeneous",
            RqTable::Rq3HomogeneousSupp => "rq3-homogeneous-supp",
        }
    }

    pub fn metrics(self) -> &'static [MetricKind] {
        match self {
            RqTable::Rq1 | RqTable::Rq3Heterogeneous => &[MetricKind::DisparateImpact],
            RqTable::Rq2 => &[MetricKind::F1],
            RqTable::Rq3Homogeneous => &[
                MetricKind::DisparateImpact,
                MetricKind::StatisticalParityDifference,
            ],
            RqTable::Rq3HomogeneousSupp => &[
                MetricKind::AverageOddsDifference,
                MetricKind::EqualOpportunityDifference,
            ],
        }
    }

    fn title(self) -> &'static str {
        match self {
            RqTable::Rq1 => "Standardized disparate impact outcome and volatility",
            RqTable::Rq2 => "Standardized F1 outcome and volatility",
            RqTable::Rq3Homogeneous => {
                "Pre-estimator mitigated homogeneous ensembles: DI and statistical parity difference"
            }
            RqTable::Rq3Heterogeneous => "Pre-estimator mitigated heterogeneous ensembles: DI",
            RqTable::Rq3HomogeneousSupp => {
                "Pre-estimator mitigated homogeneous ensembles: average odds and equal opportunity difference"
            }
        }
    }
}

pub fn ensemble_label(e: EnsembleKind) -> &'static str {
    match e {
        EnsembleKind::None => "No ensemble",
        EnsembleKind::Bagging => "Bagging",
        EnsembleKind::Boosting => "Boosting",
        EnsembleKind::Voting => "Voting",
        EnsembleKind::Stacking => "Stacking",
    }
}

fn mitigator_label(m: MitigatorKind) -> &'static str {
    match m {
        MitigatorKind::None => "Not mit.",
        MitigatorKind::Pre => "Pre",
        MitigatorKind::In => "In",
        MitigatorKind::Post => "Post",
    }
}

/// Mean over datasets of the per-dataset mean of the matching scores.
pub fn group_mean(
    scores: &Standardized,
    measure: Measure,
    pred: impl Fn(&MitigationPlan) -> bool,
) -> Option<f64> {
    let mut per_dataset: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for s in scores.scores.iter().filter(|s| pred(&s.plan)) {
        per_dataset
            .entry(&s.dataset)
            .or_default()
            .push(s.get(measure));
    }
    if per_dataset.is_empty() {
        return None;
    }
    let means: Vec<f64> = per_dataset.values().map(|v| math::mean(v)).collect();
    Some(math::mean(&means))
}

fn sizes(scores: &ScoreSet, e: EnsembleKind) -> Vec<usize> {
    let set: BTreeSet<usize> = scores
        .values()
        .flat_map(|s| s.scores.iter())
        .filter(|s| s.plan.ensemble == e)
        .map(|s| s.plan.size())
        .collect();
    set.into_iter().collect()
}

/// Builds one research-question table from standardized scores; rows with
/// no data are omitted.
pub fn aggregate_rq(scores: &ScoreSet, table: RqTable) -> Result<Table> {
    let metrics = table.metrics();
    let sets: Vec<&Standardized> = metrics
        .iter()
        .map(|m| {
            scores.get(m).ok_or_else(|| {
                Error::InvalidInput(format!("{} needs standardized {m}", table.name()))
            })
        })
        .collect::<Result<_>>()?;
    let mut out = Table {
        name: table.name().into(),
        title: table.title().into(),
        label_columns: Vec::new(),
        value_columns: Vec::new(),
        rows: Vec::new(),
    };
    let push = |out: &mut Table, labels: Vec<String>, values: Vec<Option<f64>>| {
        if values.iter().any(Option::is_some) {
            out.rows.push(TableRow { labels, values });
        }
    };
    let measures = [Measure::Outcome, Measure::Volatility];
    match table {
        RqTable::Rq1 | RqTable::Rq2 => {
            let mits = [
                MitigatorKind::None,
                MitigatorKind::Pre,
                MitigatorKind::In,
                MitigatorKind::Post,
            ];
            out.label_columns = vec!["Ensemble".into()];
            for m in mits {
                for ms in measures {
                    out.value_columns.push(format!(
                        "{} {}",
                        mitigator_label(m),
                        symbol(metrics[0], ms)
                    ));
                }
            }
            for e in EnsembleKind::ALL {
                let mut values = Vec::new();
                for m in mits {
                    for ms in measures {
                        values.push(group_mean(sets[0], ms, |p| {
                            p.ensemble == e && p.mitigator == m
                        }));
                    }
                }
                push(&mut out, vec![ensemble_label(e).into()], values);
            }
        }
        RqTable::Rq3Homogeneous | RqTable::Rq3HomogeneousSupp => {
            out.label_columns = vec!["Ensemble".into(), "n".into()];
            let levels = [Level::Estimator, Level::Ensemble];
            for level in levels {
                for (i, _) in sets.iter().enumerate() {
                    for ms in measures {
                        let lv = match level {
                            Level::Estimator => "Estimator-level",
                            Level::Ensemble => "Ensemble-level",
                        };
                        out.value_columns
                            .push(format!("{lv} {}", symbol(metrics[i], ms)));
                    }
                }
            }
            for e in [EnsembleKind::Bagging, EnsembleKind::Boosting] {
                for n in sizes(scores, e) {
                    let mut values = Vec::new();
                    for level in levels {
                        for set in &sets {
                            for ms in measures {
                                values.push(group_mean(set, ms, |p| {
                                    p.ensemble == e
                                        && p.mitigator == MitigatorKind::Pre
                                        && p.level == level
                                        && p.size() == n
                                }));
                            }
                        }
                    }
                    push(
                        &mut out,
                        vec![ensemble_label(e).into(), n.to_string()],
                        values,
                    );
                }
            }
        }
        RqTable::Rq3Heterogeneous => {
            out.label_columns = vec!["Ensemble".into(), "Configuration".into()];
            out.value_columns = measures.iter().map(|&ms| symbol(metrics[0], ms)).collect();
            type Pred = fn(&MitigationPlan) -> bool;
            let rows: [(EnsembleKind, &str, Pred); 6] = [
                (EnsembleKind::Voting, "Ensemble-level", |p| {
                    p.level == Level::Ensemble
                }),
                (EnsembleKind::Voting, "Estimator-level", |p| {
                    p.level == Level::Estimator
                }),
                (EnsembleKind::Stacking, "Ensemble-level", |p| {
                    p.level == Level::Ensemble
                }),
                (
                    EnsembleKind::Stacking,
                    "Base estimator mitigation; No passthrough",
                    |p| p.level == Level::Estimator && p.mitigate_base && !p.passthrough,
                ),
                (
                    EnsembleKind::Stacking,
                    "Base estimator mitigation; Passthrough; No final mitigation",
                    |p| {
                        p.level == Level::Estimator
                            && p.mitigate_base
                            && p.passthrough
                            && !p.mitigate_final
                    },
                ),
                (
                    EnsembleKind::Stacking,
                    "No base estimator mitigation; Passthrough; Only final mitigation",
                    |p| {
                        p.level == Level::Estimator
                            && !p.mitigate_base
                            && p.passthrough
                            && p.mitigate_final
                    },
                ),
            ];
            for (e, label, pred) in rows {
                let values = measures
                    .iter()
                    .map(|&ms| {
                        group_mean(sets[0], ms, |p| {
                            p.ensemble == e && p.mitigator == MitigatorKind::Pre && pred(p)
                        })
                    })
                    .collect();
                push(
                    &mut out,
                    vec![ensemble_label(e).into(), label.into()],
                    values,
                );
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourcePoint {
    pub level: Level,
    pub n: usize,
    pub time_outcome: Option<f64>,
    pub memory_outcome: Option<f64>,
    pub di_outcome: Option<f64>,
    pub di_volatility: Option<f64>,
    pub f1_outcome: Option<f64>,
    pub f1_volatility: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceCurves {
    pub points: Vec<ResourcePoint>,
    /// Levels without any pre-mitigated bagging record.
    pub missing_levels: Vec<Level>,
}

/// Standardized time, memory, DI and F1 against bagging size for
/// pre-mitigated bagging at both levels. Scaling is per dataset over this
/// subset, so the two levels share one scale.
pub fn resource_curves(records: &[ExperimentRecord]) -> ResourceCurves {
    let subset: Vec<ExperimentRecord> = records
        .iter()
        .filter(|r| {
            r.plan.ensemble == EnsembleKind::Bagging && r.plan.mitigator == MitigatorKind::Pre
        })
        .cloned()
        .collect();
    let scores = standardize_all(
        &subset,
        &[
            MetricKind::TimeSeconds,
            MetricKind::MemoryMb,
            MetricKind::DisparateImpact,
            MetricKind::F1,
        ],
    );
    let mut points = Vec::new();
    let mut missing_levels = Vec::new();
    for level in [Level::Estimator, Level::Ensemble] {
        let ns: BTreeSet<usize> = subset
            .iter()
            .filter(|r| r.plan.level == level)
            .map(|r| r.plan.size())
            .collect();
        if ns.is_empty() {
            missing_levels.push(level);
            continue;
        }
        for n in ns {
            let pick = |k: MetricKind, ms: Measure| {
                group_mean(&scores[&k], ms, |p| p.level == level && p.size() == n)
            };
            points.push(ResourcePoint {
                level,
                n,
                time_outcome: pick(MetricKind::TimeSeconds, Measure::Outcome),
                memory_outcome: pick(MetricKind::MemoryMb, Measure::Outcome),
                di_outcome: pick(MetricKind::DisparateImpact, Measure::Outcome),
                di_volatility: pick(MetricKind::DisparateImpact, Measure::Volatility),
                f1_outcome: pick(MetricKind::F1, Measure::Outcome),
                f1_volatility: pick(MetricKind::F1, Measure::Volatility),
            });
        }
    }
    ResourceCurves {
        points,
        missing_levels,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub id: String,
    pub rows: usize,
    pub baseline_di: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub metric: MetricKind,
    pub measure: Measure,
}

impl Target {
    /// Whether a larger score ranks higher.
    pub fn higher_is_better(self) -> bool {
        self.measure == Measure::Outcome && self.metric.higher_is_better()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidanceConfig {
    /// A dataset is large with strictly more rows than this.
    pub large_rows: usize,
    /// A dataset is very unfair when its symmetrized baseline DI is below this.
    pub unfair_di: f64,
    pub top_k: usize,
    pub targets: Vec<Target>,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        let mut targets = Vec::new();
        for metric in [
            MetricKind::DisparateImpact,
            MetricKind::StatisticalParityDifference,
            MetricKind::EqualOpportunityDifference,
            MetricKind::AverageOddsDifference,
            MetricKind::F1,
        ] {
            for measure in [Measure::Outcome, Measure::Volatility] {
                targets.push(Target { metric, measure });
            }
        }
        GuidanceConfig {
            large_rows: 8000,
            unfair_di: 0.49,
            top_k: 3,
            targets,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceEntry {
    pub notation: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTop {
    pub target: Target,
    pub symbol: String,
    pub entries: Vec<GuidanceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadrant {
    pub large: bool,
    pub very_unfair: bool,
    pub datasets: Vec<String>,
    pub targets: Vec<TargetTop>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceTree {
    pub quadrants: Vec<Quadrant>,
    pub large_rows: usize,
    pub unfair_di: f64,
}

/// Plans of one dataset in the top third for both DI and F1 outcome.
pub fn top_third(scores: &ScoreSet, dataset: &str) -> Vec<String> {
    let (Some(di), Some(f1)) = (
        scores.get(&MetricKind::DisparateImpact),
        scores.get(&MetricKind::F1),
    ) else {
        return Vec::new();
    };
    let mut both: Vec<(&str, f64, f64)> = di
        .scores
        .iter()
        .filter(|s| s.dataset == dataset)
        .filter_map(|s| {
            f1.find(dataset, &s.key)
                .map(|f| (s.key.as_str(), s.outcome, f.outcome))
        })
        .collect();
    both.sort_by(|a, b| a.0.cmp(b.0));
    let cutoff = both.len().div_ceil(3);
    let top = |col: fn(&(&str, f64, f64)) -> f64| -> BTreeSet<String> {
        let mut ranked = both.clone();
        // stable sort keeps the key order among ties
        ranked.sort_by(|a, b| col(b).total_cmp(&col(a)));
        ranked
            .iter()
            .take(cutoff)
            .map(|t| t.0.to_string())
            .collect()
    };
    let a = top(|t| t.1);
    let b = top(|t| t.2);
    a.intersection(&b).cloned().collect()
}

/// Top-third filter, quadrant assignment, per-plan averaging and top-k
/// report per target metric.
pub fn build_guidance(
    scores: &ScoreSet,
    meta: &[DatasetMeta],
    cfg: &GuidanceConfig,
) -> Result<GuidanceTree> {
    let datasets: BTreeSet<&str> = scores
        .values()
        .flat_map(|s| s.scores.iter().map(|x| x.dataset.as_str()))
        .collect();
    let mut quadrants: Vec<Quadrant> = [(true, true), (true, false), (false, true), (false, false)]
        .into_iter()
        .map(|(large, very_unfair)| Quadrant {
            large,
            very_unfair,
            datasets: Vec::new(),
            targets: Vec::new(),
        })
        .collect();
    // (quadrant, dataset, surviving keys)
    let mut members: Vec<(usize, &str, Vec<String>)> = Vec::new();
    for d in datasets {
        let m = meta
            .iter()
            .find(|m| m.id == d)
            .ok_or_else(|| Error::InvalidInput(format!("no metadata for dataset `{d}`")))?;
        let large = m.rows > cfg.large_rows;
        let very_unfair = symmetrize(MetricKind::DisparateImpact, m.baseline_di) < cfg.unfair_di;
        let q = quadrants
            .iter()
            .position(|q| q.large == large && q.very_unfair == very_unfair)
            .expect("all four quadrants exist");
        quadrants[q].datasets.push(d.to_string());
        members.push((q, d, top_third(scores, d)));
    }
    for (qi, quadrant) in quadrants.iter_mut().enumerate() {
        for &target in &cfg.targets {
            let mut per_plan: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            if let Some(set) = scores.get(&target.metric) {
                for (_, d, keys) in members.iter().filter(|m| m.0 == qi) {
                    for k in keys {
                        if let Some(s) = set.find(d, k) {
                            per_plan
                                .entry(s.notation.clone())
                                .or_default()
                                .push(s.get(target.measure));
                        }
                    }
                }
            }
            let mut ranked: Vec<GuidanceEntry> = per_plan
                .into_iter()
                .map(|(notation, v)| GuidanceEntry {
                    notation,
                    score: math::mean(&v),
                })
                .collect();
            if target.higher_is_better() {
                ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
            } else {
                ranked.sort_by(|a, b| a.score.total_cmp(&b.score));
            }
            ranked.truncate(cfg.top_k);
            quadrant.targets.push(TargetTop {
                target,
                symbol: symbol(target.metric, target.measure),
                entries: ranked,
            });
        }
    }
    Ok(GuidanceTree {
        quadrants,
        large_rows: cfg.large_rows,
        unfair_di: cfg.unfair_di,
    })
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering: two yes/no questions, four quadrants, one leaf per
/// target listing its top plans.
pub fn emit_dot(tree: &GuidanceTree) -> String {
    let mut s = String::from(
        "digraph guidance {\n  rankdir=LR;\n  node [shape=box, fontname=\"Helvetica\"];\n",
    );
    let _ = writeln!(
        s,
        "  root [label=\"Large dataset?\\n(> {} rows)\"];",
        tree.large_rows
    );
    for large in [true, false] {
        let id = if large { "large" } else { "small" };
        let _ = writeln!(
            s,
            "  {id} [label=\"Very unfair?\\n(baseline DI < {})\"];",
            tree.unfair_di
        );
        let _ = writeln!(
            s,
            "  root -> {id} [label=\"{}\"];",
            if large { "yes" } else { "no" }
        );
    }
    for q in &tree.quadrants {
        let parent = if q.large { "large" } else { "small" };
        let id = format!("{parent}_{}", if q.very_unfair { "unfair" } else { "fair" });
        let title = format!(
            "{}, {}\\n{}",
            if q.large { "large" } else { "small" },
            if q.very_unfair { "very unfair" } else { "fair" },
            if q.datasets.is_empty() {
                String::from("(no datasets)")
            } else {
                dot_escape(&q.datasets.join(", "))
            }
        );
        let _ = writeln!(s, "  {id} [label=\"{title}\"];");
        let _ = writeln!(
            s,
            "  {parent} -> {id} [label=\"{}\"];",
            if q.very_unfair { "yes" } else { "no" }
        );
        for t in &q.targets {
            let leaf = format!("{id}_{}", t.symbol);
            let mut label = String::new();
            if t.entries.is_empty() {
                label.push_str("(none)\\l");
            }
            for (i, e) in t.entries.iter().enumerate() {
                let _ = write!(
                    label,
                    "{}. {} ({:.3})\\l",
                    i + 1,
                    dot_escape(&e.notation),
                    e.score
                );
            }
            let _ = writeln!(s, "  {leaf} [label=\"{label}\"];");
            let _ = writeln!(s, "  {id} -> {leaf} [label=\"{}\"];", t.symbol);
        }
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{MetricReport, MetricValue};

    fn rec(dataset: &str, plan: MitigationPlan, fold: usize, di: f64, f1: f64) -> ExperimentRecord {
        ExperimentRecord {
            dataset: dataset.into(),
            key: plan.key(),
            plan,
            trial: 0,
            fold,
            seed: 0,
            metrics: vec![
                MetricReport::new(MetricKind::DisparateImpact, MetricValue::Defined(di)),
                MetricReport::new(MetricKind::F1, MetricValue::Defined(f1)),
            ],
            time_seconds: 1.0,
            memory_mb: 1.0,
            failure: None,
            predictions: None,
        }
    }

    fn bag(n: usize) -> MitigationPlan {
        MitigationPlan::new(EnsembleKind::Bagging, MitigatorKind::Pre, Level::Estimator).with_n(n)
    }

    #[test]
    fn min_max_endpoints() {
        let (v, ok) = min_max(&[0.2, 0.5, 0.8]);
        assert!(ok);
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 0.5).abs() < 1e-15);
        assert_eq!(v[2], 1.0);
    }

    #[test]
    fn symmetrized_tie_is_degenerate() {
        let r = vec![
            rec("d", bag(1), 0, 1.25, 0.5),
            rec("d", bag(5), 0, 0.8, 0.5),
        ];
        let s = standardize(&r, MetricKind::DisparateImpact);
        assert!(s.scores.iter().all(|x| x.outcome == 0.0));
        assert!(s.degenerate.contains(&DegenerateScale {
            dataset: "d".into(),
            measure: Measure::Outcome
        }));
    }

    #[test]
    fn trivial_values_are_dropped() {
        let r = vec![
            rec("d", bag(1), 0, 0.0, 0.0),
            rec("d", bag(1), 1, 0.5, 0.5),
            rec("d", bag(5), 0, 0.9, 0.7),
        ];
        let s = standardize(&r, MetricKind::DisparateImpact);
        assert_eq!(s.find("d", &bag(1).key()).unwrap().count, 1);
        assert_eq!(s.find("d", &bag(1).key()).unwrap().mean, 0.5);
    }

    #[test]
    fn two_dataset_mean() {
        let r = vec![
            rec("a", bag(1), 0, 0.2, 0.5),
            rec("a", bag(5), 0, 0.7, 0.5),
            rec("a", MitigationPlan::baseline(), 0, 0.1, 0.5),
            rec("b", bag(1), 0, 0.6, 0.5),
            rec("b", bag(5), 0, 0.2, 0.5),
            rec("b", MitigationPlan::baseline(), 0, 0.1, 0.5),
        ];
        let s = standardize(&r, MetricKind::DisparateImpact);
        let m = group_mean(&s, Measure::Outcome, |p| {
            p.size() == 1 && p.ensemble == EnsembleKind::Bagging
        })
        .unwrap();
        assert!((m - (1.0 / 6.0 + 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn dot_counts() {
        let r = vec![rec("a", bag(1), 0, 0.2, 0.5), rec("a", bag(5), 0, 0.7, 0.6)];
        let scores = standardize_all(&r, &[MetricKind::DisparateImpact, MetricKind::F1]);
        let meta = vec![DatasetMeta {
            id: "a".into(),
            rows: 100,
            baseline_di: 0.3,
        }];
        let cfg = GuidanceConfig::default();
        let tree = build_guidance(&scores, &meta, &cfg).unwrap();
        assert_eq!(tree.quadrants.len(), 4);
        let q = tree
            .quadrants
            .iter()
            .find(|q| !q.large && q.very_unfair)
            .unwrap();
        assert_eq!(q.datasets, vec![String::from("a")]);
        let sdo = &q.targets[0];
        assert_eq!(sdo.symbol, "SDO");
        assert_eq!(sdo.entries[0].notation, "Bag(PreMit(est), n=5)");
        let dot = emit_dot(&tree);
        let nodes = dot
            .lines()
            .filter(|l| l.contains("[label=") && !l.contains("->"))
            .count();
        let edges = dot.lines().filter(|l| l.contains("->")).count();
        let leaves = 4 * cfg.targets.len();
        assert_eq!(nodes, 1 + 2 + 4 + leaves);
        assert_eq!(edges, 2 + 4 + leaves);
    }

    #[test]
    fn text_table_aligns() {
        let t = Table {
            name: "t".into(),
            title: "T".into(),
            label_columns: vec!["Ensemble".into()],
            value_columns: vec!["SDO".into()],
            rows: vec![TableRow {
                labels: vec!["Bagging".into()],
                values: vec![Some(0.5)],
            }],
        };
        assert_eq!(
            t.to_text(3),
            "T\nEnsemble    SDO\n---------------\nBagging   0.500\n"
        );
    }
}
