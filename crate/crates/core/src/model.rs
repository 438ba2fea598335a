//! The estimator contract shared by base learners, mitigators and ensembles.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::any::Any;
use core::fmt::Debug;

use crate::data::Protected;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Class probabilities `[P(unfavorable), P(favorable)]`.
pub type Proba = [f64; 2];

/// Label from probabilities; ties go to the favorable class.
#[inline]
pub fn argmax(p: &Proba) -> bool {
    p[1] >= p[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub supports_weights: bool,
    pub supports_proba: bool,
}

/// Training rows handed to a learner.
#[derive(Debug, Clone, Copy)]
pub struct FitInput<'a> {
    pub x: &'a Matrix,
    pub y: &'a [bool],
    pub weights: &'a [f64],
}

impl<'a> FitInput<'a> {
    pub fn new(x: &'a Matrix, y: &'a [bool], weights: &'a [f64]) -> Result<Self> {
        if x.n_rows() == 0 {
            return Err(Error::InvalidInput("no training rows".into()));
        }
        if y.len() != x.n_rows() {
            return Err(Error::Shape {
                expected: x.n_rows(),
                got: y.len(),
            });
        }
        if weights.len() != x.n_rows() {
            return Err(Error::Shape {
                expected: x.n_rows(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput(
                "weights must be finite and non-negative".into(),
            ));
        }
        Ok(FitInput { x, y, weights })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    /// `Some(label)` when every row has the same label.
    pub fn single_class(&self) -> Option<bool> {
        let first = self.y[0];
        self.y.iter().all(|&l| l == first).then_some(first)
    }
}

/// Context that mitigators need and plain learners ignore.
#[derive(Debug, Clone, Copy)]
pub struct FitContext<'a> {
    pub protected: &'a Protected,
    pub seed: u64,
}

impl<'a> FitContext<'a> {
    pub fn with_seed(&self, seed: u64) -> FitContext<'a> {
        FitContext {
            protected: self.protected,
            seed,
        }
    }
}

/// An untrained, configured estimator.
pub trait Learner: Send + Sync + Debug {
    /// Short notation, e.g. `est` or `PreMit(est)`.
    fn notation(&self) -> String;

    fn capabilities(&self) -> Capabilities;

    fn fit(&self, data: FitInput<'_>, ctx: &FitContext<'_>) -> Result<Box<dyn Model>>;
}

/// A trained estimator. Trained models are immutable.
pub trait Model: Send + Sync + Debug + Any {
    fn n_features(&self) -> usize;

    fn predict_proba(&self, x: &Matrix) -> Result<Vec<Proba>>;

    fn predict(&self, x: &Matrix) -> Result<Vec<bool>> {
        Ok(self.predict_proba(x)?.iter().map(argmax).collect())
    }

    fn supports_proba(&self) -> bool {
        true
    }

    /// Number of mitigators fitted inside this model.
    fn mitigator_fits(&self) -> usize {
        0
    }

    fn as_any(&self) -> &dyn Any;
}

/// Predicts one class with probability 1; the fallback when training labels
/// contain a single class.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConstantModel {
    pub label: bool,
    pub n_features: usize,
}

impl ConstantModel {
    pub fn new(label: bool, n_features: usize) -> Self {
        log::warn!("training labels contain a single class; fitting a constant predictor");
        ConstantModel { label, n_features }
    }
}

impl Model for ConstantModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Vec<Proba>> {
        x.check_cols(self.n_features)?;
        let p = if self.label { [0.0, 1.0] } else { [1.0, 0.0] };
        Ok(alloc::vec![p; x.n_rows()])
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
