#![no_std]
//! Fairness-aware ensemble composition: data model, group metrics, learners,
//! mitigators, ensembles, plan validation, selection and analysis.

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod composition;
pub mod data;
pub mod ensembles;
pub mod error;
pub mod learners;
pub mod math;
pub mod matrix;
pub mod metrics;
pub mod mitigators;
pub mod model;
pub mod optim;
pub mod records;
pub mod rng;
pub mod selection;
pub mod synthetic;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{Learner, Model, Proba};
