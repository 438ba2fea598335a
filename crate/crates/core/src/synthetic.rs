//! Planted-bias synthetic datasets with a controllable baseline disparate
//! impact.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnKind, Dataset, FairnessInfo, ProtectedAttribute, RefValue, Value};
use crate::error::{Error, Result};
use crate::math;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub rows: usize,
    /// Numeric features besides the protected column.
    pub features: usize,
    /// Target `P(fav | unpriv) / P(fav | priv)` of the labels.
    pub disparate_impact: f64,
    pub privileged_fraction: f64,
    /// Favorable rate of the privileged group.
    pub privileged_base_rate: f64,
    /// Mean shift of the features between groups, in standard deviations.
    pub proxy_strength: f64,
    /// Add a three-level categorical column.
    pub categorical: bool,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            rows: 1000,
            features: 4,
            disparate_impact: 0.6,
            privileged_fraction: 0.5,
            privileged_base_rate: 0.6,
            proxy_strength: 0.5,
            categorical: false,
            seed: 0,
        }
    }
}

pub const PROTECTED: &str = "group";

/// Labels are thresholds of a noisy linear score, cut per group so the
/// favorable rates are `base_rate` and `di · base_rate`. Features shift with
/// the group, so models can pick the bias up through proxies.
pub fn planted_bias(cfg: &SyntheticConfig) -> Result<(Dataset, FairnessInfo)> {
    if cfg.rows < 4 {
        return Err(Error::Config(
            "a synthetic dataset needs at least 4 rows".into(),
        ));
    }
    if !(cfg.disparate_impact > 0.0 && cfg.disparate_impact * cfg.privileged_base_rate <= 1.0) {
        return Err(Error::Config(format!(
            "disparate impact {} is not reachable from base rate {}",
            cfg.disparate_impact, cfg.privileged_base_rate
        )));
    }
    if !(cfg.privileged_fraction > 0.0 && cfg.privileged_fraction < 1.0) {
        return Err(Error::Config(
            "privileged fraction must lie in (0, 1)".into(),
        ));
    }
    let mut r = rng::seeded(cfg.seed);
    let n = cfg.rows;
    // exact group sizes, then shuffled
    let n_priv = (math::round(cfg.privileged_fraction * n as f64) as usize).clamp(1, n - 1);
    let mut group: Vec<bool> = (0..n).map(|i| i < n_priv).collect();
    rand::seq::SliceRandom::shuffle(group.as_mut_slice(), &mut r);
    let weights: Vec<f64> = (0..cfg.features).map(|j| 1.0 / (1.0 + j as f64)).collect();
    let mut feats = vec![Vec::with_capacity(n); cfg.features];
    let mut score = Vec::with_capacity(n);
    let mut cats = Vec::with_capacity(n);
    for &g in &group {
        let shift = if g { cfg.proxy_strength } else { 0.0 };
        let mut s = 0.0;
        for (j, col) in feats.iter_mut().enumerate() {
            let v = rng::normal(&mut r) + shift;
            s += weights[j] * v;
            col.push(v);
        }
        s += 0.5 * rng::normal(&mut r);
        score.push(s);
        let c = r.random_range(0..3usize) + if g && r.random::<f64>() < 0.3 { 1 } else { 0 };
        cats.push(["a", "b", "c"][c.min(2)]);
    }
    let mut label = vec![false; n];
    for (privileged, rate) in [
        (true, cfg.privileged_base_rate),
        (false, cfg.privileged_base_rate * cfg.disparate_impact),
    ] {
        let mut idx: Vec<usize> = (0..n).filter(|&i| group[i] == privileged).collect();
        idx.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
        let k = math::round(rate * idx.len() as f64) as usize;
        for &i in idx.iter().take(k) {
            label[i] = true;
        }
    }
    let mut columns = vec![Column {
        name: PROTECTED.into(),
        kind: ColumnKind::Numeric,
        values: group
            .iter()
            .map(|&g| Value::Num(if g { 1.0 } else { 0.0 }))
            .collect(),
    }];
    for (j, col) in feats.into_iter().enumerate() {
        columns.push(Column {
            name: format!("x{j}"),
            kind: ColumnKind::Numeric,
            values: col.into_iter().map(Value::Num).collect(),
        });
    }
    if cfg.categorical {
        columns.push(Column {
            name: "category".into(),
            kind: ColumnKind::Categorical,
            values: cats.into_iter().map(Value::from).collect(),
        });
    }
    let labels = label
        .iter()
        .map(|&l| Value::Num(if l { 1.0 } else { 0.0 }))
        .collect();
    let fi = FairnessInfo {
        favorable_labels: vec![RefValue::Num(1.0)],
        protected_attributes: vec![ProtectedAttribute {
            feature: String::from(PROTECTED),
            reference_group: vec![RefValue::Num(1.0)],
        }],
    };
    Ok((Dataset::new(columns, labels, None)?, fi))
}
