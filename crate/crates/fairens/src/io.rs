//! CSV tables and fairness-info JSON.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use fairens_core::data::{Column, ColumnKind, Dataset, FairnessInfo, Value};
use serde::{Deserialize, Serialize};

use crate::error::{FairensError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvOptions {
    pub label: String,
    /// Columns read as categorical even when every cell parses as a number.
    pub categorical: Vec<String>,
    /// Optional column of non-negative row weights.
    pub weights: Option<String>,
    /// Cell spellings read as missing.
    pub missing: Vec<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            label: "label".into(),
            categorical: Vec::new(),
            weights: None,
            missing: vec![String::new(), "?".into(), "NA".into()],
        }
    }
}

pub fn cell(raw: &str, missing: &[String]) -> Value {
    let t = raw.trim();
    if missing.iter().any(|m| m == t) {
        return Value::Missing;
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Value::Num(v),
        _ => Value::Str(t.to_string()),
    }
}

/// Column kind from the cells: numeric when every present cell is a number.
pub fn infer_kind(values: &[Value]) -> ColumnKind {
    if values.iter().all(|v| !matches!(v, Value::Str(_))) {
        ColumnKind::Numeric
    } else {
        ColumnKind::Categorical
    }
}

pub fn parse_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_at = headers
        .iter()
        .position(|h| *h == opts.label)
        .ok_or_else(|| {
            FairensError::Config(format!("label column `{}` not in header", opts.label))
        })?;
    let weight_at =
        match &opts.weights {
            Some(w) => Some(headers.iter().position(|h| h == w).ok_or_else(|| {
                FairensError::Config(format!("weight column `{w}` not in header"))
            })?),
            None => None,
        };
    let mut cells: Vec<Vec<Value>> = vec![Vec::new(); headers.len()];
    for row in rdr.records() {
        let row = row?;
        for (j, raw) in row.iter().enumerate() {
            cells[j].push(cell(raw, &opts.missing));
        }
    }
    let labels = std::mem::take(&mut cells[label_at]);
    let weights = match weight_at {
        Some(w) => Some(
            std::mem::take(&mut cells[w])
                .into_iter()
                .enumerate()
                .map(|(i, v)| {
                    v.as_num().ok_or_else(|| {
                        FairensError::Config(format!("row {i}: weight is not a number"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?,
        ),
        None => None,
    };
    let columns = headers
        .into_iter()
        .zip(cells)
        .enumerate()
        .filter(|(j, _)| *j != label_at && Some(*j) != weight_at)
        .map(|(_, (name, values))| {
            let kind = if opts.categorical.contains(&name) {
                ColumnKind::Categorical
            } else {
                infer_kind(&values)
            };
            let values = match kind {
                // numbers in a forced categorical column become levels
                ColumnKind::Categorical => values
                    .into_iter()
                    .map(|v| match v {
                        Value::Num(x) => Value::Str(format!("{x}")),
                        other => other,
                    })
                    .collect(),
                _ => values,
            };
            Column { name, kind, values }
        })
        .collect();
    Ok(Dataset::new(columns, labels, weights)?)
}

pub fn read_csv(path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    let f = File::open(path).map_err(|e| FairensError::io(path, e))?;
    parse_csv(f, opts)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| FairensError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| FairensError::json(path.display().to_string(), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| FairensError::json(path.display().to_string(), e))?;
    std::fs::write(path, text + "\n").map_err(|e| FairensError::io(path, e))
}

pub fn read_fairness_info(path: &Path) -> Result<FairnessInfo> {
    let fi: FairnessInfo = read_json(path)?;
    fi.validate()?;
    Ok(fi)
}
