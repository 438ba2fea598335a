use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("degenerate group: {0}")]
    DegenerateGroup(String),

    #[error("degenerate cell: {0} has no rows")]
    DegenerateCell(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model does not expose class probabilities")]
    NoProbabilities,

    #[error("optimizer diverged at iteration {iteration} (gradient norm {grad_norm})")]
    Diverged { iteration: usize, grad_norm: f64 },

    #[error("undefined cost: {0}")]
    UndefinedCost(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: alloc::boxed::Box::new(self),
        }
    }
}
