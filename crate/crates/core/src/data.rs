//! Tabular datasets, fairness metadata, preprocessing and joint
//! label/group stratified splitting.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::metrics::MetricValue;
use crate::rng;

/// A raw table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Str(String),
    Missing,
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            _ => None,
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}

/// A reference-group or favorable-label entry: a scalar or a closed
/// numeric interval `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RefValue {
    Num(f64),
    Str(String),
    Range([f64; 2]),
}

impl RefValue {
    pub fn matches(&self, value: &Value) -> bool {
        match (self, value) {
            (_, Value::Missing) => false,
            (RefValue::Num(r), Value::Num(v)) => r == v,
            (RefValue::Range([lo, hi]), Value::Num(v)) => lo <= v && v <= hi,
            (RefValue::Str(r), Value::Str(v)) => r == v,
            (RefValue::Num(r), Value::Str(v)) => v.trim().parse::<f64>().is_ok_and(|p| p == *r),
            (RefValue::Str(r), Value::Num(v)) => r.trim().parse::<f64>().is_ok_and(|p| p == *v),
            (RefValue::Range([lo, hi]), Value::Str(v)) => {
                v.trim().parse::<f64>().is_ok_and(|p| *lo <= p && p <= *hi)
            }
        }
    }

    pub fn matches_num(&self, v: f64) -> bool {
        match self {
            RefValue::Num(r) => *r == v,
            RefValue::Range([lo, hi]) => *lo <= v && v <= *hi,
            RefValue::Str(r) => r.trim().parse::<f64>().is_ok_and(|p| p == v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtectedAttribute {
    pub feature: String,
    pub reference_group: Vec<RefValue>,
}

/// Favorable labels and protected attributes with their privileged values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessInfo {
    pub favorable_labels: Vec<RefValue>,
    pub protected_attributes: Vec<ProtectedAttribute>,
}

impl FairnessInfo {
    pub fn validate(&self) -> Result<()> {
        if self.favorable_labels.is_empty() {
            return Err(Error::Config(
                "at least one favorable label is required".into(),
            ));
        }
        if self.protected_attributes.is_empty() {
            return Err(Error::Config(
                "at least one protected attribute is required".into(),
            ));
        }
        for (i, a) in self.protected_attributes.iter().enumerate() {
            if self.protected_attributes[..i]
                .iter()
                .any(|b| b.feature == a.feature)
            {
                return Err(Error::Config(format!(
                    "duplicate protected attribute `{}`",
                    a.feature
                )));
            }
            if a.reference_group.is_empty() {
                return Err(Error::Config(format!(
                    "empty reference group for `{}`",
                    a.feature
                )));
            }
        }
        Ok(())
    }

    pub fn is_favorable(&self, label: &Value) -> bool {
        self.favorable_labels.iter().any(|r| r.matches(label))
    }

    /// The metadata describing a preprocessed table: favorable label `1`
    /// and each protected attribute privileged at `1`.
    pub fn binarized(&self) -> FairnessInfo {
        FairnessInfo {
            favorable_labels: alloc::vec![RefValue::Num(1.0)],
            protected_attributes: self
                .protected_attributes
                .iter()
                .map(|a| ProtectedAttribute {
                    feature: a.feature.clone(),
                    reference_group: alloc::vec![RefValue::Num(1.0)],
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    /// Already model-ready numeric values (binarized, one-hot or
    /// standardized); preprocessing passes these through unchanged.
    Encoded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    labels: Vec<Value>,
    weights: Vec<f64>,
}

impl Dataset {
    pub fn new(
        columns: Vec<Column>,
        labels: Vec<Value>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = labels.len();
        for (i, c) in columns.iter().enumerate() {
            if c.values.len() != n {
                return Err(Error::Schema(format!(
                    "column `{}` has {} rows, expected {n}",
                    c.name,
                    c.values.len()
                )));
            }
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
        }
        let weights = weights.unwrap_or_else(|| alloc::vec![1.0; n]);
        if weights.len() != n {
            return Err(Error::Schema(format!(
                "{} weights for {n} rows",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput(
                "weights must be finite and non-negative".into(),
            ));
        }
        Ok(Dataset {
            columns,
            labels,
            weights,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn labels(&self) -> &[Value] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    kind: c.kind,
                    values: indices.iter().map(|&i| c.values[i].clone()).collect(),
                })
                .collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            weights: indices.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    /// Drops rows whose label or any protected attribute is missing.
    /// Returns the cleaned table and the number of dropped rows.
    pub fn drop_incomplete(&self, fi: &FairnessInfo) -> Result<(Dataset, usize)> {
        let protected: Vec<&Column> = fi
            .protected_attributes
            .iter()
            .map(|a| {
                self.column(&a.feature).ok_or_else(|| {
                    Error::Schema(format!("unknown protected attribute `{}`", a.feature))
                })
            })
            .collect::<Result<_>>()?;
        let keep: Vec<usize> = (0..self.n_rows())
            .filter(|&i| {
                !self.labels[i].is_missing() && protected.iter().all(|c| !c.values[i].is_missing())
            })
            .collect();
        let dropped = self.n_rows() - keep.len();
        Ok((self.select_rows(&keep), dropped))
    }

    /// Converts an all-numeric table into model inputs.
    pub fn to_training(&self, fi: &FairnessInfo) -> Result<TrainingData> {
        let rows = self.n_rows();
        let cols = self.n_cols();
        let mut data = alloc::vec![0.0; rows * cols];
        for (j, c) in self.columns.iter().enumerate() {
            for (i, v) in c.values.iter().enumerate() {
                data[i * cols + j] = v.as_num().ok_or_else(|| {
                    Error::Schema(format!(
                        "column `{}` row {i} is not numeric; preprocess first",
                        c.name
                    ))
                })?;
            }
        }
        let names = self.column_names();
        let protected = Protected::bind(&names, fi)?;
        Ok(TrainingData {
            x: Matrix::new(rows, cols, data)?,
            y: self.labels.iter().map(|l| fi.is_favorable(l)).collect(),
            weights: self.weights.clone(),
            names,
            protected,
        })
    }
}

/// Model-ready numeric data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub x: Matrix,
    /// `true` where the label is favorable.
    pub y: Vec<bool>,
    pub weights: Vec<f64>,
    pub names: Vec<String>,
    pub protected: Protected,
}

impl TrainingData {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn select_rows(&self, indices: &[usize]) -> TrainingData {
        TrainingData {
            x: self.x.select_rows(indices),
            y: crate::matrix::take(&self.y, indices),
            weights: crate::matrix::take(&self.weights, indices),
            names: self.names.clone(),
            protected: self.protected.clone(),
        }
    }
}

/// Protected attributes resolved to column positions of a numeric matrix.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Protected {
    attributes: Vec<(usize, Vec<RefValue>)>,
}

impl Protected {
    pub fn bind(names: &[String], fi: &FairnessInfo) -> Result<Self> {
        fi.validate()?;
        let attributes = fi
            .protected_attributes
            .iter()
            .map(|a| {
                let col = names.iter().position(|n| *n == a.feature).ok_or_else(|| {
                    Error::Schema(format!("unknown protected attribute `{}`", a.feature))
                })?;
                Ok((col, a.reference_group.clone()))
            })
            .collect::<Result<_>>()?;
        Ok(Protected { attributes })
    }

    /// Column positions of the protected attributes.
    pub fn columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.attributes.iter().map(|(c, _)| *c)
    }

    pub fn is_protected(&self, col: usize) -> bool {
        self.columns().any(|c| c == col)
    }

    pub fn is_privileged(&self, row: &[f64]) -> bool {
        self.attributes
            .iter()
            .all(|(c, refs)| refs.iter().any(|r| r.matches_num(row[*c])))
    }

    pub fn priv_mask(&self, x: &Matrix) -> Vec<bool> {
        x.rows().map(|r| self.is_privileged(r)).collect()
    }

    /// Per-attribute privileged memberships, one vector per attribute.
    pub fn attribute_masks(&self, x: &Matrix) -> Vec<Vec<bool>> {
        self.attributes
            .iter()
            .map(|(c, refs)| {
                x.rows()
                    .map(|r| refs.iter().any(|v| v.matches_num(r[*c])))
                    .collect()
            })
            .collect()
    }

    pub fn max_column(&self) -> usize {
        self.columns().max().unwrap_or(0)
    }
}

/// Binary group and label encodings of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupEncoding {
    /// Row is in the reference group of every protected attribute.
    pub priv_mask: Vec<bool>,
    /// Label is favorable.
    pub fav_mask: Vec<bool>,
    /// Membership in each attribute's reference group, in attribute order.
    pub attribute_masks: Vec<Vec<bool>>,
}

impl GroupEncoding {
    pub fn check_nondegenerate(&self) -> Result<()> {
        if !self.priv_mask.iter().any(|&p| p) {
            return Err(Error::DegenerateGroup("privileged group is empty".into()));
        }
        if self.priv_mask.iter().all(|&p| p) {
            return Err(Error::DegenerateGroup("unprivileged group is empty".into()));
        }
        Ok(())
    }
}

pub fn bind_groups(d: &Dataset, fi: &FairnessInfo) -> Result<GroupEncoding> {
    fi.validate()?;
    let mut attribute_masks = Vec::with_capacity(fi.protected_attributes.len());
    for a in &fi.protected_attributes {
        let col = d
            .column(&a.feature)
            .ok_or_else(|| Error::Schema(format!("unknown protected attribute `{}`", a.feature)))?;
        attribute_masks.push(
            col.values
                .iter()
                .map(|v| a.reference_group.iter().any(|r| r.matches(v)))
                .collect::<Vec<bool>>(),
        );
    }
    let priv_mask = (0..d.n_rows())
        .map(|i| attribute_masks.iter().all(|m| m[i]))
        .collect();
    let fav_mask = d.labels.iter().map(|l| fi.is_favorable(l)).collect();
    let enc = GroupEncoding {
        priv_mask,
        fav_mask,
        attribute_masks,
    };
    enc.check_nondegenerate()?;
    Ok(enc)
}

/// Disparate impact of the true labels: `P(fav | unpriv) / P(fav | priv)`.
pub fn baseline_di(d: &Dataset, fi: &FairnessInfo) -> Result<MetricValue> {
    let groups = bind_groups(d, fi)?;
    let (mut priv_fav, mut priv_total, mut unpriv_fav, mut unpriv_total) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..d.n_rows() {
        let w = d.weights[i];
        let fav = if groups.fav_mask[i] { w } else { 0.0 };
        if groups.priv_mask[i] {
            priv_total += w;
            priv_fav += fav;
        } else {
            unpriv_total += w;
            unpriv_fav += fav;
        }
    }
    if priv_total == 0.0 || unpriv_total == 0.0 || priv_fav == 0.0 {
        return Ok(MetricValue::Undefined);
    }
    Ok(MetricValue::Defined(
        (unpriv_fav / unpriv_total) / (priv_fav / priv_total),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericStat {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryLevels {
    pub name: String,
    pub levels: Vec<String>,
}

/// Column statistics learned on training data and reused at test time:
/// numeric means and population standard deviations, plus the category
/// levels used for one-hot encoding.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Standardizer {
    pub numeric: Vec<NumericStat>,
    pub categorical: Vec<CategoryLevels>,
}

impl Standardizer {
    fn numeric_stat(&self, name: &str) -> Option<&NumericStat> {
        self.numeric.iter().find(|s| s.name == name)
    }

    fn levels(&self, name: &str) -> Option<&CategoryLevels> {
        self.categorical.iter().find(|s| s.name == name)
    }

    /// Standardizes one value; constant columns are centered with divisor 1.
    pub fn scale(stat: &NumericStat, v: f64) -> f64 {
        let divisor = if stat.std > 0.0 { stat.std } else { 1.0 };
        (v - stat.mean) / divisor
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub dropped_rows: usize,
    pub constant_columns: Vec<String>,
    pub imputed_cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub data: Dataset,
    pub standardizer: Standardizer,
    /// Metadata for the binarized output.
    pub fairness_info: FairnessInfo,
    pub report: PreprocessReport,
}

/// Drops columns, binarizes protected attributes and labels, one-hot
/// encodes categoricals and standardizes numeric columns. With `fitted`
/// the given statistics are applied (test time); otherwise new ones are
/// learned from `d` (train time).
pub fn preprocess(
    d: &Dataset,
    fi: &FairnessInfo,
    drop: &[String],
    fitted: Option<&Standardizer>,
) -> Result<Preprocessed> {
    fi.validate()?;
    for name in drop {
        if d.column(name).is_none() {
            return Err(Error::Schema(format!(
                "cannot drop unknown column `{name}`"
            )));
        }
        if fi.protected_attributes.iter().any(|a| a.feature == *name) {
            return Err(Error::Schema(format!(
                "cannot drop protected attribute `{name}`"
            )));
        }
    }
    let (clean, dropped_rows) = d.drop_incomplete(fi)?;
    let n = clean.n_rows();
    let mut report = PreprocessReport {
        dropped_rows,
        ..Default::default()
    };
    let mut learned = Standardizer::default();
    let mut out_cols = Vec::new();

    for col in &clean.columns {
        if drop.contains(&col.name) {
            continue;
        }
        if let Some(attr) = fi
            .protected_attributes
            .iter()
            .find(|a| a.feature == col.name)
        {
            let values = col
                .values
                .iter()
                .map(|v| {
                    Value::Num(if attr.reference_group.iter().any(|r| r.matches(v)) {
                        1.0
                    } else {
                        0.0
                    })
                })
                .collect();
            out_cols.push(Column {
                name: col.name.clone(),
                kind: ColumnKind::Encoded,
                values,
            });
            continue;
        }
        match col.kind {
            ColumnKind::Encoded => out_cols.push(col.clone()),
            ColumnKind::Numeric => {
                let stat = match fitted {
                    Some(s) => s.numeric_stat(&col.name).cloned().ok_or_else(|| {
                        Error::Schema(format!("standardizer has no column `{}`", col.name))
                    })?,
                    None => {
                        let present: Vec<f64> =
                            col.values.iter().filter_map(Value::as_num).collect();
                        let mean = math::mean(&present);
                        let std = math::population_std(&present);
                        if std == 0.0 {
                            report.constant_columns.push(col.name.clone());
                        }
                        NumericStat {
                            name: col.name.clone(),
                            mean,
                            std,
                        }
                    }
                };
                let mut values = Vec::with_capacity(n);
                for v in &col.values {
                    let raw = match v {
                        Value::Num(x) => *x,
                        Value::Missing => {
                            report.imputed_cells += 1;
                            stat.mean
                        }
                        Value::Str(s) => s.trim().parse::<f64>().map_err(|_| {
                            Error::Schema(format!(
                                "non-numeric value `{s}` in numeric column `{}`",
                                col.name
                            ))
                        })?,
                    };
                    values.push(Value::Num(Standardizer::scale(&stat, raw)));
                }
                if fitted.is_none() {
                    learned.numeric.push(stat);
                }
                out_cols.push(Column {
                    name: col.name.clone(),
                    kind: ColumnKind::Encoded,
                    values,
                });
            }
            ColumnKind::Categorical => {
                let levels = match fitted {
                    Some(s) => s.levels(&col.name).cloned().ok_or_else(|| {
                        Error::Schema(format!("standardizer has no column `{}`", col.name))
                    })?,
                    None => {
                        let mut levels: Vec<String> =
                            col.values.iter().filter_map(category_of).collect();
                        levels.sort();
                        levels.dedup();
                        CategoryLevels {
                            name: col.name.clone(),
                            levels,
                        }
                    }
                };
                let cells: Vec<Option<String>> = col.values.iter().map(category_of).collect();
                for level in &levels.levels {
                    out_cols.push(Column {
                        name: format!("{}={}", col.name, level),
                        kind: ColumnKind::Encoded,
                        values: cells
                            .iter()
                            .map(|c| {
                                Value::Num(if c.as_deref() == Some(level.as_str()) {
                                    1.0
                                } else {
                                    0.0
                                })
                            })
                            .collect(),
                    });
                }
                if fitted.is_none() {
                    learned.categorical.push(levels);
                }
            }
        }
    }

    let labels = clean
        .labels
        .iter()
        .map(|l| Value::Num(if fi.is_favorable(l) { 1.0 } else { 0.0 }))
        .collect();
    let data = Dataset::new(out_cols, labels, Some(clean.weights.clone()))?;
    Ok(Preprocessed {
        data,
        standardizer: match fitted {
            Some(s) => s.clone(),
            None => learned,
        },
        fairness_info: fi.binarized(),
        report,
    })
}

fn category_of(v: &Value) -> Option<String> {
    match v {
        Value::Str(s) => Some(s.clone()),
        Value::Num(x) => Some(format!("{x}")),
        Value::Missing => None,
    }
}

/// One cross-validation fold: training and test row indices.
pub type Fold = (Vec<usize>, Vec<usize>);

/// Stratified k-fold over the joint strata of label and each protected
/// attribute's membership. Rows of each stratum are shuffled and dealt
/// round-robin, continuing the deal across strata so overall fold sizes
/// stay balanced too.
pub fn stratified_kfold(d: &Dataset, fi: &FairnessInfo, k: usize, seed: u64) -> Result<Vec<Fold>> {
    let groups = bind_groups(d, fi)?;
    stratified_kfold_encoded(&groups, k, seed)
}

pub fn stratified_kfold_encoded(groups: &GroupEncoding, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let n = groups.fav_mask.len();
    if n < k {
        return Err(Error::InvalidInput(format!(
            "{n} rows cannot be split into {k} folds"
        )));
    }
    let strata = strata_of(groups);
    let mut rng = rng::seeded(seed);
    let mut assignment = alloc::vec![0usize; n];
    let mut next = 0usize;
    for (key, mut rows) in strata {
        if rows.len() < k {
            log::warn!(
                "stratum {key:#b} has {} rows, fewer than {k} folds; some folds get none of it",
                rows.len()
            );
        }
        rows.shuffle(&mut rng);
        for row in rows {
            assignment[row] = next % k;
            next += 1;
        }
    }
    Ok((0..k)
        .map(|f| {
            let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
            (train, test)
        })
        .collect())
}

/// Row indices per stratum, keyed by the label bit and one bit per
/// protected attribute.
pub fn strata_of(groups: &GroupEncoding) -> BTreeMap<u64, Vec<usize>> {
    let mut strata: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for i in 0..groups.fav_mask.len() {
        let mut key = u64::from(groups.fav_mask[i]);
        for (a, mask) in groups.attribute_masks.iter().enumerate() {
            key |= u64::from(mask[i]) << (a + 1);
        }
        strata.entry(key).or_default().push(i);
    }
    strata
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sex_table() -> (Dataset, FairnessInfo) {
        let d = Dataset::new(
            vec![Column {
                name: "sex".into(),
                kind: ColumnKind::Categorical,
                values: vec!["m".into(), "f".into(), "m".into(), "f".into()],
            }],
            vec![1.0.into(), 1.0.into(), 0.0.into(), 0.0.into()],
            None,
        )
        .unwrap();
        let fi = FairnessInfo {
            favorable_labels: vec![RefValue::Num(1.0)],
            protected_attributes: vec![ProtectedAttribute {
                feature: "sex".into(),
                reference_group: vec![RefValue::Str("m".into())],
            }],
        };
        (d, fi)
    }

    #[test]
    fn privileged_mask_is_direct_membership() {
        let (d, fi) = sex_table();
        let g = bind_groups(&d, &fi).unwrap();
        assert_eq!(g.priv_mask, vec![true, false, true, false]);
        assert_eq!(g.fav_mask, vec![true, true, false, false]);
    }

    #[test]
    fn privilege_is_the_intersection_of_attributes() {
        let d = Dataset::new(
            vec![
                Column {
                    name: "race".into(),
                    kind: ColumnKind::Categorical,
                    values: vec!["w".into(), "w".into(), "b".into()],
                },
                Column {
                    name: "age".into(),
                    kind: ColumnKind::Numeric,
                    values: vec![30.0.into(), 70.0.into(), 30.0.into()],
                },
            ],
            vec![1.0.into(), 0.0.into(), 1.0.into()],
            None,
        )
        .unwrap();
        let fi = FairnessInfo {
            favorable_labels: vec![RefValue::Num(1.0)],
            protected_attributes: vec![
                ProtectedAttribute {
                    feature: "race".into(),
                    reference_group: vec![RefValue::Str("w".into())],
                },
                ProtectedAttribute {
                    feature: "age".into(),
                    reference_group: vec![RefValue::Range([25.0, 60.0])],
                },
            ],
        };
        let g = bind_groups(&d, &fi).unwrap();
        assert_eq!(g.priv_mask, vec![true, false, false]);
    }

    #[test]
    fn unknown_feature_and_degenerate_groups_are_errors() {
        let (d, mut fi) = sex_table();
        fi.protected_attributes[0].feature = "gender".into();
        assert!(matches!(bind_groups(&d, &fi), Err(Error::Schema(_))));
        let (d, mut fi) = sex_table();
        fi.protected_attributes[0].reference_group = vec!["m".into_ref(), "f".into_ref()];
        assert!(matches!(
            bind_groups(&d, &fi),
            Err(Error::DegenerateGroup(_))
        ));
    }

    trait IntoRef {
        fn into_ref(self) -> RefValue;
    }
    impl IntoRef for &str {
        fn into_ref(self) -> RefValue {
            RefValue::Str(self.into())
        }
    }

    #[test]
    fn baseline_di_counts() {
        // priv: 2 of 4 favorable, unpriv: 1 of 4 favorable
        let labels: Vec<Value> = [1., 1., 0., 0., 1., 0., 0., 0.]
            .iter()
            .map(|&v| v.into())
            .collect();
        let groups: Vec<Value> = ["p", "p", "p", "p", "u", "u", "u", "u"]
            .iter()
            .map(|&v| v.into())
            .collect();
        let d = Dataset::new(
            vec![Column {
                name: "g".into(),
                kind: ColumnKind::Categorical,
                values: groups,
            }],
            labels,
            None,
        )
        .unwrap();
        let fi = FairnessInfo {
            favorable_labels: vec![RefValue::Num(1.0)],
            protected_attributes: vec![ProtectedAttribute {
                feature: "g".into(),
                reference_group: vec![RefValue::Str("p".into())],
            }],
        };
        assert_eq!(baseline_di(&d, &fi).unwrap(), MetricValue::Defined(0.5));
    }

    #[test]
    fn standardizes_with_population_std() {
        let d = Dataset::new(
            vec![
                Column {
                    name: "x".into(),
                    kind: ColumnKind::Numeric,
                    values: vec![1.0.into(), 2.0.into(), 3.0.into()],
                },
                Column {
                    name: "g".into(),
                    kind: ColumnKind::Categorical,
                    values: vec!["a".into(), "b".into(), "a".into()],
                },
            ],
            vec![1.0.into(), 0.0.into(), 1.0.into()],
            None,
        )
        .unwrap();
        let fi = FairnessInfo {
            favorable_labels: vec![RefValue::Num(1.0)],
            protected_attributes: vec![ProtectedAttribute {
                feature: "g".into(),
                reference_group: vec![RefValue::Str("a".into())],
            }],
        };
        let out = preprocess(&d, &fi, &[], None).unwrap();
        let x: Vec<f64> = out
            .data
            .column("x")
            .unwrap()
            .values
            .iter()
            .map(|v| v.as_num().unwrap())
            .collect();
        let s = 1.0 / (2.0f64 / 3.0).sqrt();
        for (got, want) in x.iter().zip([-s, 0.0, s]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((s - 1.2247).abs() < 1e-4);
        assert_eq!(
            out.data.column("g").unwrap().values,
            vec![Value::Num(1.0), Value::Num(0.0), Value::Num(1.0)]
        );

        // test-time application: the training mean maps to zero
        let test = Dataset::new(
            vec![
                Column {
                    name: "x".into(),
                    kind: ColumnKind::Numeric,
                    values: vec![2.0.into()],
                },
                Column {
                    name: "g".into(),
                    kind: ColumnKind::Categorical,
                    values: vec!["a".into()],
                },
            ],
            vec![1.0.into()],
            None,
        )
        .unwrap();
        let applied = preprocess(&test, &fi, &[], Some(&out.standardizer)).unwrap();
        assert_eq!(
            applied.data.column("x").unwrap().values,
            vec![Value::Num(0.0)]
        );
    }

    #[test]
    fn constant_columns_are_flagged_not_fatal() {
        let d = Dataset::new(
            vec![
                Column {
                    name: "c".into(),
                    kind: ColumnKind::Numeric,
                    values: vec![5.0.into(), 5.0.into()],
                },
                Column {
                    name: "g".into(),
                    kind: ColumnKind::Categorical,
                    values: vec!["a".into(), "b".into()],
                },
            ],
            vec![1.0.into(), 0.0.into()],
            None,
        )
        .unwrap();
        let fi = FairnessInfo {
            favorable_labels: vec![RefValue::Num(1.0)],
            protected_attributes: vec![ProtectedAttribute {
                feature: "g".into(),
                reference_group: vec![RefValue::Str("a".into())],
            }],
        };
        let out = preprocess(&d, &fi, &[], None).unwrap();
        assert_eq!(out.report.constant_columns, vec![String::from("c")]);
        assert_eq!(
            out.data.column("c").unwrap().values,
            vec![Value::Num(0.0), Value::Num(0.0)]
        );
    }

    #[test]
    fn exact_divisibility_gives_one_row_per_cell_per_fold() {
        let mut labels = Vec::new();
        let mut g = Vec::new();
        for cell in 0..4 {
            for _ in 0..3 {
                labels.push(Value::Num((cell % 2) as f64));
                g.push(Value::Str(if cell < 2 { "p".into() } else { "u".into() }));
            }
        }
        let d = Dataset::new(
            vec![Column {
                name: "g".into(),
                kind: ColumnKind::Categorical,
                values: g,
            }],
            labels,
            None,
        )
        .unwrap();
        let fi = FairnessInfo {
            favorable_labels: vec![RefValue::Num(1.0)],
            protected_attributes: vec![ProtectedAttribute {
                feature: "g".into(),
                reference_group: vec![RefValue::Str("p".into())],
            }],
        };
        let folds = stratified_kfold(&d, &fi, 3, 11).unwrap();
        for (_, test) in &folds {
            let mut cells: Vec<usize> = test.iter().map(|&i| i / 3).collect();
            cells.sort();
            assert_eq!(cells, vec![0, 1, 2, 3]);
        }
        assert_eq!(folds, stratified_kfold(&d, &fi, 3, 11).unwrap());
        assert!(stratified_kfold(&d, &fi, 1, 11).is_err());
    }
}
