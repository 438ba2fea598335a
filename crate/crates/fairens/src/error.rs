use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FairensError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FairensError {
    #[error(transparent)]
    Core(#[from] fairens_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("arff line {line}: {message}")]
    Arff { line: usize, message: String },
    #[error("http: {0}")]
    Http(String),
    #[error("schema violation at `{pointer}`: {message}")]
    Schema { pointer: String, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("cache lock {0} is held by another process")]
    Locked(PathBuf),
}

impl FairensError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FairensError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        FairensError::Json {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            FairensError::Schema { .. } | FairensError::Config(_) => 2,
            FairensError::Core(fairens_core::Error::Config(_)) => 2,
            _ => 3,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            FairensError::Core(_) => "core",
            FairensError::Io { .. } => "io",
            FairensError::Json { .. } => "json",
            FairensError::Csv(_) => "csv",
            FairensError::Arff { .. } => "arff",
            FairensError::Http(_) => "http",
            FairensError::Schema { .. } => "schema",
            FairensError::Config(_) => "config",
            FairensError::Locked(_) => "locked",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let FairensError::Schema { pointer, .. } = self {
            v["pointer"] = pointer.clone().into();
        }
        v
    }
}
