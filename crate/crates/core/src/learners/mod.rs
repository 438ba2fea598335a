//! Base estimators.

mod knn;
mod logistic;
mod naive_bayes;
mod tree;

pub use knn::{KNearestNeighbors, KnnModel};
pub use logistic::{logistic_objective, LogisticModel, LogisticRegression};
pub use naive_bayes::{GaussianNaiveBayes, NaiveBayesModel};
pub use tree::{Criterion, DecisionTree, Node, TreeModel};

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::any::Any;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{Capabilities, ConstantModel, FitContext, FitInput, Learner, Model, Proba};

/// A serializable choice of base estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    Tree(DecisionTree),
    Logistic(LogisticRegression),
    Knn(KNearestNeighbors),
    NaiveBayes(GaussianNaiveBayes),
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        EstimatorSpec::Tree(DecisionTree::default())
    }
}

impl EstimatorSpec {
    fn learner(&self) -> &dyn Learner {
        match self {
            EstimatorSpec::Tree(l) => l,
            EstimatorSpec::Logistic(l) => l,
            EstimatorSpec::Knn(l) => l,
            EstimatorSpec::NaiveBayes(l) => l,
        }
    }
}

impl Learner for EstimatorSpec {
    fn notation(&self) -> String {
        self.learner().notation()
    }

    fn capabilities(&self) -> Capabilities {
        self.learner().capabilities()
    }

    fn fit(&self, data: FitInput<'_>, ctx: &FitContext<'_>) -> Result<Box<dyn Model>> {
        self.learner().fit(data, ctx)
    }
}

/// The heterogeneous roster used by voting and stacking.
pub fn heterogeneous_roster() -> Vec<EstimatorSpec> {
    vec![
        EstimatorSpec::Tree(DecisionTree::default()),
        EstimatorSpec::Logistic(LogisticRegression::default()),
        EstimatorSpec::Knn(KNearestNeighbors::default()),
        EstimatorSpec::NaiveBayes(GaussianNaiveBayes::default()),
    ]
}

/// Trained base models in serializable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseModel {
    Tree(TreeModel),
    Logistic(LogisticModel),
    Knn(KnnModel),
    NaiveBayes(NaiveBayesModel),
    Constant(ConstantModel),
}

impl BaseModel {
    /// Recovers the serializable form of a trained base model, if it is one.
    pub fn from_model(m: &dyn Model) -> Option<BaseModel> {
        let any = m.as_any();
        any.downcast_ref::<TreeModel>()
            .map(|t| BaseModel::Tree(t.clone()))
            .or_else(|| {
                any.downcast_ref::<LogisticModel>()
                    .map(|t| BaseModel::Logistic(t.clone()))
            })
            .or_else(|| {
                any.downcast_ref::<KnnModel>()
                    .map(|t| BaseModel::Knn(t.clone()))
            })
            .or_else(|| {
                any.downcast_ref::<NaiveBayesModel>()
                    .map(|t| BaseModel::NaiveBayes(t.clone()))
            })
            .or_else(|| {
                any.downcast_ref::<ConstantModel>()
                    .map(|t| BaseModel::Constant(t.clone()))
            })
    }

    fn inner(&self) -> &dyn Model {
        match self {
            BaseModel::Tree(m) => m,
            BaseModel::Logistic(m) => m,
            BaseModel::Knn(m) => m,
            BaseModel::NaiveBayes(m) => m,
            BaseModel::Constant(m) => m,
        }
    }
}

impl Model for BaseModel {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Vec<Proba>> {
        self.inner().predict_proba(x)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

pub const MODEL_FORMAT: &str = "fairens-model";
pub const MODEL_VERSION: u32 = 1;

/// Versioned envelope for a trained base model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub model: BaseModel,
}

impl ModelDocument {
    pub fn new(model: BaseModel) -> Self {
        ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model,
        }
    }

    /// Checks the envelope after deserializing.
    pub fn check(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Schema(alloc::format!(
                "unexpected model format `{}`",
                self.format
            )));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::Schema(alloc::format!(
                "unsupported model version {}",
                self.version
            )));
        }
        Ok(())
    }
}
