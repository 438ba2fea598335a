//! Append-only JSON-lines record store.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use fairens_core::metrics::MetricKind;
use fairens_core::records::{ExperimentRecord, RecordKey};

use crate::error::{FairensError, Result};

#[derive(Debug)]
pub struct RecordStore {
    path: PathBuf,
    keys: BTreeSet<RecordKey>,
    file: File,
}

/// Reads every record; a final line cut short by an interruption is
/// dropped, any other unreadable line is an error.
pub fn read_records(path: &Path) -> Result<Vec<ExperimentRecord>> {
    Ok(read_with_tail(path)?.0)
}

/// Records plus the byte length of the intact prefix.
fn read_with_tail(path: &Path) -> Result<(Vec<ExperimentRecord>, u64)> {
    let f = File::open(path).map_err(|e| FairensError::io(path, e))?;
    let mut reader = BufReader::new(f);
    let mut out = Vec::new();
    let mut good = 0u64;
    let mut line = String::new();
    let mut n = 0;
    loop {
        line.clear();
        let read = reader
            .read_line(&mut line)
            .map_err(|e| FairensError::io(path, e))?;
        if read == 0 {
            break;
        }
        n += 1;
        let complete = line.ends_with('\n');
        if line.trim().is_empty() {
            good += read as u64;
            continue;
        }
        match serde_json::from_str::<ExperimentRecord>(line.trim_end()) {
            Ok(r) if complete => {
                out.push(r);
                good += read as u64;
            }
            Ok(_) | Err(_) if !complete => {
                log::warn!("{}: dropping truncated final line {n}", path.display());
                break;
            }
            Ok(_) => unreachable!(),
            Err(e) => {
                return Err(FairensError::json(
                    format!("{} line {n}", path.display()),
                    e,
                ))
            }
        }
    }
    Ok((out, good))
}

impl RecordStore {
    /// Opens or creates the store, repairing a truncated tail.
    pub fn open(path: impl Into<PathBuf>) -> Result<RecordStore> {
        let path = path.into();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| FairensError::io(dir, e))?;
        }
        let mut keys = BTreeSet::new();
        if path.exists() {
            let (records, good) = read_with_tail(&path)?;
            let len = fs::metadata(&path)
                .map_err(|e| FairensError::io(&path, e))?
                .len();
            if good < len {
                let f = OpenOptions::new()
                    .write(true)
                    .open(&path)
                    .map_err(|e| FairensError::io(&path, e))?;
                f.set_len(good).map_err(|e| FairensError::io(&path, e))?;
            }
            keys.extend(records.iter().map(ExperimentRecord::record_key));
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| FairensError::io(&path, e))?;
        Ok(RecordStore { path, keys, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn contains(&self, key: &RecordKey) -> bool {
        self.keys.contains(key)
    }

    /// Appends unless the key is already stored; returns whether it was written.
    pub fn append(&mut self, record: &ExperimentRecord) -> Result<bool> {
        let key = record.record_key();
        if self.keys.contains(&key) {
            return Ok(false);
        }
        let mut line =
            serde_json::to_string(record).map_err(|e| FairensError::json("record", e))?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| FairensError::io(&self.path, e))?;
        self.keys.insert(key);
        Ok(true)
    }

    pub fn records(&self) -> Result<Vec<ExperimentRecord>> {
        read_records(&self.path)
    }

    /// Rewrites the file sorted by key, atomically.
    pub fn compact(&mut self) -> Result<()> {
        let mut records = self.records()?;
        records.sort_by_key(ExperimentRecord::record_key);
        let tmp = self.path.with_extension("jsonl.tmp");
        {
            let mut f = File::create(&tmp).map_err(|e| FairensError::io(&tmp, e))?;
            for r in &records {
                let line = serde_json::to_string(r).map_err(|e| FairensError::json("record", e))?;
                writeln!(f, "{line}").map_err(|e| FairensError::io(&tmp, e))?;
            }
            f.sync_all().map_err(|e| FairensError::io(&tmp, e))?;
        }
        fs::rename(&tmp, &self.path).map_err(|e| FairensError::io(&self.path, e))?;
        self.file = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(|e| FairensError::io(&self.path, e))?;
        Ok(())
    }
}

/// Flat CSV with one column per metric; undefined values are empty cells.
pub fn export_csv(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let metrics: Vec<MetricKind> = MetricKind::PREDICTIVE
        .into_iter()
        .chain(MetricKind::FAIRNESS)
        .collect();
    let mut header: Vec<String> = [
        "dataset",
        "key",
        "ensemble",
        "n",
        "mitigator",
        "level",
        "passthrough",
        "mitigate_base",
        "mitigate_final",
        "trial",
        "fold",
        "seed",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(metrics.iter().map(|m| m.as_str().to_string()));
    header.extend(["time_seconds", "memory_mb", "failure"].map(String::from));
    w.write_record(&header)?;
    for r in records {
        let p = &r.plan;
        let mut row = vec![
            r.dataset.clone(),
            r.key.clone(),
            p.ensemble.as_str().to_string(),
            p.n.map(|n| n.to_string()).unwrap_or_default(),
            p.mitigator.as_str().to_string(),
            p.level.as_str().to_string(),
            p.passthrough.to_string(),
            p.mitigate_base.to_string(),
            p.mitigate_final.to_string(),
            r.trial.to_string(),
            r.fold.to_string(),
            r.seed.to_string(),
        ];
        for &m in &metrics {
            row.push(
                r.metric(m)
                    .value()
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
            );
        }
        row.push(r.time_seconds.to_string());
        row.push(r.memory_mb.to_string());
        row.push(r.failure.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| FairensError::io(path, e))?;
    Ok(())
}
