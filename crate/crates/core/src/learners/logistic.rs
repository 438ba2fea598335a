//! L2-regularized logistic regression fitted with L-BFGS.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::any::Any;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::model::{Capabilities, ConstantModel, FitContext, FitInput, Learner, Model, Proba};
use crate::optim::{self, LbfgsOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticRegression {
    pub l2: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticRegression {
    fn default() -> Self {
        LogisticRegression {
            l2: 1e-4,
            tol: 1e-8,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl LogisticModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        math::dot(&self.coef, row) + self.intercept
    }

    /// Splits a flat `[coef.., intercept]` parameter vector.
    pub fn from_params(params: &[f64]) -> Self {
        let (coef, b) = params.split_at(params.len() - 1);
        LogisticModel {
            coef: coef.to_vec(),
            intercept: b[0],
        }
    }
}

impl Model for LogisticModel {
    fn n_features(&self) -> usize {
        self.coef.len()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Vec<Proba>> {
        x.check_cols(self.coef.len())?;
        Ok(x.rows()
            .map(|r| {
                let p = math::sigmoid(self.decision(r));
                [1.0 - p, p]
            })
            .collect())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Weighted mean log loss plus `(l2 / 2)·‖coef‖²` over parameters laid out
/// as `[coef.., intercept]`. Writes the gradient into `grad`.
pub fn logistic_objective(data: &FitInput<'_>, l2: f64, params: &[f64], grad: &mut [f64]) -> f64 {
    let d = data.x.n_cols();
    let total: f64 = data.weights.iter().sum();
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for (i, row) in data.x.rows().enumerate() {
        let w = data.weights[i] / total;
        if w == 0.0 {
            continue;
        }
        let z = math::dot(&params[..d], row) + params[d];
        let y = if data.y[i] { 1.0 } else { 0.0 };
        loss += w * (math::softplus(z) - y * z);
        let r = w * (math::sigmoid(z) - y);
        for j in 0..d {
            grad[j] += r * row[j];
        }
        grad[d] += r;
    }
    for j in 0..d {
        loss += 0.5 * l2 * params[j] * params[j];
        grad[j] += l2 * params[j];
    }
    loss
}

impl LogisticRegression {
    pub fn options(&self) -> LbfgsOptions {
        LbfgsOptions {
            max_iter: self.max_iter,
            grad_tol: self.tol,
            ..Default::default()
        }
    }

    pub fn fit_logistic(&self, data: FitInput<'_>) -> Result<LogisticModel> {
        if data.weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidInput("sample weights sum to zero".into()));
        }
        let x0 = vec![0.0; data.x.n_cols() + 1];
        let m = optim::lbfgs(
            |p, g| logistic_objective(&data, self.l2, p, g),
            x0,
            self.options(),
        )?;
        if !m.converged {
            log::warn!(
                "logistic regression stopped after {} iterations",
                m.iterations
            );
        }
        Ok(LogisticModel::from_params(&m.x))
    }
}

impl Learner for LogisticRegression {
    fn notation(&self) -> String {
        "lr".into()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            supports_weights: true,
            supports_proba: true,
        }
    }

    fn fit(&self, data: FitInput<'_>, _ctx: &FitContext<'_>) -> Result<Box<dyn Model>> {
        if let Some(label) = data.single_class() {
            return Ok(Box::new(ConstantModel::new(label, data.x.n_cols())));
        }
        Ok(Box::new(self.fit_logistic(data)?))
    }
}
