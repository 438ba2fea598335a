//! Logistic regression with a mutual-information prejudice regularizer.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{logistic_objective, LogisticModel, LogisticRegression};
use crate::math;
use crate::model::{Capabilities, ConstantModel, FitContext, FitInput, Learner, Model};
use crate::optim;

const CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrejudiceRemover {
    pub eta: f64,
    pub l2: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PrejudiceRemover {
    fn default() -> Self {
        let lr = LogisticRegression::default();
        PrejudiceRemover {
            eta: 1.0,
            l2: lr.l2,
            tol: lr.tol,
            max_iter: lr.max_iter,
        }
    }
}

impl PrejudiceRemover {
    pub fn with_eta(eta: f64) -> Self {
        PrejudiceRemover {
            eta,
            ..Default::default()
        }
    }
}

/// Mutual information between the soft decision and group membership,
/// `I = Σ_s P(s)·KL(Bern(A_s) ‖ Bern(B))`, where `A_s` is the mean
/// favorable probability in group `s` and `B` the overall mean. Adds
/// `scale · dI/dparams` into `grad`.
pub fn prejudice_index(
    data: &FitInput<'_>,
    priv_mask: &[bool],
    params: &[f64],
    scale: f64,
    grad: &mut [f64],
) -> f64 {
    let d = data.x.n_cols();
    let total: f64 = data.weights.iter().sum();
    let q: Vec<f64> = data
        .x
        .rows()
        .map(|r| math::sigmoid(math::dot(&params[..d], r) + params[d]))
        .collect();
    let mut mass = [0.0; 2];
    let mut fav = [0.0; 2];
    for i in 0..q.len() {
        let g = priv_mask[i] as usize;
        mass[g] += data.weights[i] / total;
        fav[g] += data.weights[i] / total * q[i];
    }
    let clamp = |v: f64| v.clamp(CLAMP, 1.0 - CLAMP);
    let b = clamp(fav[0] + fav[1]);
    let a = [clamp(fav[0] / mass[0]), clamp(fav[1] / mass[1])];
    let mut mi = 0.0;
    let mut slope = [0.0; 2];
    for g in 0..2 {
        mi += mass[g]
            * (a[g] * math::ln(a[g] / b) + (1.0 - a[g]) * math::ln((1.0 - a[g]) / (1.0 - b)));
        slope[g] = math::ln(a[g] / b) - math::ln((1.0 - a[g]) / (1.0 - b));
    }
    if scale != 0.0 {
        for (i, row) in data.x.rows().enumerate() {
            let r = scale * data.weights[i] / total
                * slope[priv_mask[i] as usize]
                * q[i]
                * (1.0 - q[i]);
            for j in 0..d {
                grad[j] += r * row[j];
            }
            grad[d] += r;
        }
    }
    mi
}

impl PrejudiceRemover {
    pub fn fit_model(&self, data: FitInput<'_>, priv_mask: &[bool]) -> Result<LogisticModel> {
        if self.eta < 0.0 {
            return Err(Error::Config(format!(
                "eta must be non-negative, got {}",
                self.eta
            )));
        }
        if priv_mask.iter().all(|&p| p) || !priv_mask.iter().any(|&p| p) {
            return Err(Error::DegenerateGroup(
                "prejudice remover needs both groups".into(),
            ));
        }
        let lr = LogisticRegression {
            l2: self.l2,
            tol: self.tol,
            max_iter: self.max_iter,
        };
        let x0 = vec![0.0; data.x.n_cols() + 1];
        let eta = self.eta;
        let m = optim::lbfgs(
            |p, g| {
                let loss = logistic_objective(&data, self.l2, p, g);
                if eta == 0.0 {
                    return loss;
                }
                loss + eta * prejudice_index(&data, priv_mask, p, eta, g)
            },
            x0,
            lr.options(),
        )?;
        if !m.converged {
            log::warn!(
                "prejudice remover (eta={eta}) stopped after {} iterations",
                m.iterations
            );
        }
        Ok(LogisticModel::from_params(&m.x))
    }
}

impl Learner for PrejudiceRemover {
    fn notation(&self) -> String {
        "InMit".into()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            supports_weights: true,
            supports_proba: true,
        }
    }

    fn fit(&self, data: FitInput<'_>, ctx: &FitContext<'_>) -> Result<Box<dyn Model>> {
        if let Some(label) = data.single_class() {
            return Ok(Box::new(ConstantModel::new(label, data.x.n_cols())));
        }
        let priv_mask = ctx.protected.priv_mask(data.x);
        Ok(Box::new(InMitigatedModel {
            inner: self.fit_model(data, &priv_mask)?,
        }))
    }
}

/// Trained prejudice-remover model; counts as one mitigator fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InMitigatedModel {
    pub inner: LogisticModel,
}

impl Model for InMitigatedModel {
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    fn predict_proba(&self, x: &crate::matrix::Matrix) -> Result<Vec<crate::model::Proba>> {
        self.inner.predict_proba(x)
    }

    fn mitigator_fits(&self) -> usize {
        1
    }

    fn as_any(&self) -> &dyn core::any::Any {
        self
    }
}
