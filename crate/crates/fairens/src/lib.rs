//! Experiment harness for fairness-aware ensembles: dataset formats, OpenML
//! download, cross-validated runs with a resumable record store, analysis
//! outputs and the `fairens` command line.

pub mod arff;
pub mod config;
pub mod demo;
pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod harness;
pub mod io;
pub mod memory;
pub mod openml;
pub mod report;
pub mod store;

pub use error::{FairensError, Result};

#[cfg(feature = "tracking-allocator")]
#[global_allocator]
static GLOBAL: memory::TrackingAllocator = memory::TrackingAllocator;
