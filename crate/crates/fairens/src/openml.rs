//! OpenML dataset download with an on-disk cache.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use fairens_core::data::Dataset;
use serde::{Deserialize, Serialize};

use crate::arff::parse_arff;
use crate::error::{FairensError, Result};

pub const DEFAULT_BASE_URL: &str = "https://www.openml.org";
const MAX_BODY: u64 = 1 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenmlDataset {
    pub id: u32,
    pub name: String,
    pub target: Option<String>,
    pub arff_path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct OpenmlClient {
    pub base_url: String,
    pub cache_dir: PathBuf,
    pub lock_timeout: Duration,
    /// Limit for each HTTP request, connection included.
    pub request_timeout: Duration,
}

/// `$FAIRENS_CACHE`, else `$XDG_CACHE_HOME/fairens`, else `~/.cache/fairens`.
pub fn default_cache_dir() -> PathBuf {
    if let Some(p) = std::env::var_os("FAIRENS_CACHE") {
        return PathBuf::from(p);
    }
    if let Some(p) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(p).join("fairens");
    }
    match std::env::var_os("HOME") {
        Some(h) => PathBuf::from(h).join(".cache").join("fairens"),
        None => std::env::temp_dir().join("fairens-cache"),
    }
}

/// Exclusive lock file, removed on drop.
struct CacheLock(PathBuf);

impl CacheLock {
    fn acquire(path: &Path, timeout: Duration) -> Result<CacheLock> {
        let start = Instant::now();
        loop {
            match fs::OpenOptions::new()
                .write(true)
                .create_new(true)
                .open(path)
            {
                Ok(_) => return Ok(CacheLock(path.to_path_buf())),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    if start.elapsed() >= timeout {
                        return Err(FairensError::Locked(path.to_path_buf()));
                    }
                    thread::sleep(Duration::from_millis(50));
                }
                Err(e) => return Err(FairensError::io(path, e)),
            }
        }
    }
}

impl Drop for CacheLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn get(url: &str, timeout: Duration) -> Result<String> {
    log::info!("GET {url}");
    let mut resp = ureq::get(url)
        .config()
        .timeout_global(Some(timeout))
        .build()
        .call()
        .map_err(|e| FairensError::Http(format!("{url}: {e}")))?;
    resp.body_mut()
        .with_config()
        .limit(MAX_BODY)
        .read_to_string()
        .map_err(|e| FairensError::Http(format!("{url}: {e}")))
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("part");
    fs::write(&tmp, text).map_err(|e| FairensError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| FairensError::io(path, e))
}

impl OpenmlClient {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        OpenmlClient {
            base_url: DEFAULT_BASE_URL.into(),
            cache_dir: cache_dir.into(),
            lock_timeout: Duration::from_secs(600),
            request_timeout: Duration::from_secs(300),
        }
    }

    pub fn with_base_url(mut self, url: impl Into<String>) -> Self {
        self.base_url = url.into().trim_end_matches('/').to_string();
        self
    }

    fn dir(&self, id: u32) -> PathBuf {
        self.cache_dir.join("openml").join(id.to_string())
    }

    fn cached(&self, id: u32) -> Option<OpenmlDataset> {
        let meta = self.dir(id).join("dataset.json");
        let text = fs::read_to_string(meta).ok()?;
        let d: OpenmlDataset = serde_json::from_str(&text).ok()?;
        d.arff_path.exists().then_some(d)
    }

    /// Downloads description and ARFF once; later calls read the cache.
    pub fn fetch(&self, id: u32) -> Result<OpenmlDataset> {
        if let Some(d) = self.cached(id) {
            return Ok(d);
        }
        let dir = self.dir(id);
        fs::create_dir_all(&dir).map_err(|e| FairensError::io(&dir, e))?;
        let _lock = CacheLock::acquire(&dir.with_extension("lock"), self.lock_timeout)?;
        // another process may have finished while we waited
        if let Some(d) = self.cached(id) {
            return Ok(d);
        }
        let text = get(
            &format!("{}/api/v1/json/data/{id}", self.base_url),
            self.request_timeout,
        )?;
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| FairensError::json("OpenML description", e))?;
        let desc = &v["data_set_description"];
        let field = |k: &str| desc[k].as_str().map(str::to_string);
        let url = match (field("url"), field("file_id")) {
            (Some(u), _) => u,
            (None, Some(f)) => format!("{}/data/v1/download/{f}", self.base_url),
            (None, None) => {
                return Err(FairensError::Http(format!(
                    "dataset {id}: description has no file url"
                )))
            }
        };
        write_atomic(&dir.join("description.json"), &text)?;
        let arff_path = dir.join("data.arff");
        write_atomic(&arff_path, &get(&url, self.request_timeout)?)?;
        let d = OpenmlDataset {
            id,
            name: field("name").unwrap_or_else(|| id.to_string()),
            target: field("default_target_attribute"),
            arff_path,
        };
        let meta =
            serde_json::to_string_pretty(&d).map_err(|e| FairensError::json("dataset.json", e))?;
        write_atomic(&dir.join("dataset.json"), &meta)?;
        Ok(d)
    }

    /// Fetches and parses a dataset; the label defaults to the dataset's
    /// default target attribute.
    pub fn load(&self, id: u32, label: Option<&str>) -> Result<Dataset> {
        let d = self.fetch(id)?;
        let text =
            fs::read_to_string(&d.arff_path).map_err(|e| FairensError::io(&d.arff_path, e))?;
        parse_arff(&text)?.to_dataset(label.or(d.target.as_deref()))
    }
}
