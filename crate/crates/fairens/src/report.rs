//! Analysis outputs: standardized scores, tables, resource curves and the
//! guidance tree.

use std::fs;
use std::path::{Path, PathBuf};

use fairens_core::analysis::{
    aggregate_rq, build_guidance, emit_dot, resource_curves, standardize_all, DatasetMeta,
    GuidanceConfig, GuidanceTree, ResourceCurves, RqTable, ScoreSet, Table,
};
use fairens_core::metrics::MetricKind;
use fairens_core::records::ExperimentRecord;

use crate::error::{FairensError, Result};
use crate::io::write_json;

pub fn scores(records: &[ExperimentRecord]) -> ScoreSet {
    standardize_all(records, &MetricKind::ALL)
}

pub fn write_table_csv(table: &Table, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(table.label_columns.iter().chain(&table.value_columns))?;
    for row in &table.rows {
        let values = row
            .values
            .iter()
            .map(|v| v.map(|v| v.to_string()).unwrap_or_default());
        w.write_record(row.labels.iter().cloned().chain(values))?;
    }
    w.flush().map_err(|e| FairensError::io(path, e))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| FairensError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| FairensError::io(dir, e))
}

/// Writes `standardized.json`; returns the written paths.
pub fn write_standardized(scores: &ScoreSet, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let path = dir.join("standardized.json");
    write_json(&path, scores)?;
    Ok(vec![path])
}

/// Every research-question table as `.txt`, `.csv` and `.json`.
pub fn write_tables(scores: &ScoreSet, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut out = Vec::new();
    for t in RqTable::ALL {
        let table = aggregate_rq(scores, t)?;
        let base = dir.join(t.name());
        let (txt, csv, json) = (
            base.with_extension("txt"),
            base.with_extension("csv"),
            base.with_extension("json"),
        );
        write_text(&txt, &table.to_text(3))?;
        write_table_csv(&table, &csv)?;
        write_json(&json, &table)?;
        out.extend([txt, csv, json]);
    }
    Ok(out)
}

pub fn write_resources(
    records: &[ExperimentRecord],
    dir: &Path,
) -> Result<(ResourceCurves, Vec<PathBuf>)> {
    ensure_dir(dir)?;
    let curves = resource_curves(records);
    let json = dir.join("resources.json");
    write_json(&json, &curves)?;
    let csv_path = dir.join("resources.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record([
        "level",
        "n",
        "time_outcome",
        "memory_outcome",
        "di_outcome",
        "di_volatility",
        "f1_outcome",
        "f1_volatility",
    ])?;
    for p in &curves.points {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            p.level.as_str().to_string(),
            p.n.to_string(),
            opt(p.time_outcome),
            opt(p.memory_outcome),
            opt(p.di_outcome),
            opt(p.di_volatility),
            opt(p.f1_outcome),
            opt(p.f1_volatility),
        ])?;
    }
    w.flush().map_err(|e| FairensError::io(&csv_path, e))?;
    Ok((curves, vec![json, csv_path]))
}

pub fn write_guidance(
    scores: &ScoreSet,
    meta: &[DatasetMeta],
    cfg: &GuidanceConfig,
    dir: &Path,
) -> Result<(GuidanceTree, Vec<PathBuf>)> {
    ensure_dir(dir)?;
    let tree = build_guidance(scores, meta, cfg)?;
    let json = dir.join("guidance.json");
    let dot = dir.join("guidance.dot");
    write_json(&json, &tree)?;
    write_text(&dot, &emit_dot(&tree))?;
    Ok((tree, vec![json, dot]))
}
