//! Gaussian naive Bayes with weighted moments.

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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianNaiveBayes {
    pub var_floor: f64,
}

impl Default for GaussianNaiveBayes {
    fn default() -> Self {
        GaussianNaiveBayes { var_floor: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    /// Class priors `[unfav, fav]`.
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

impl NaiveBayesModel {
    fn joint_log_likelihood(&self, row: &[f64], c: usize) -> f64 {
        let mut ll = math::ln(self.priors[c]);
        for (j, &v) in row.iter().enumerate() {
            let var = self.variances[c][j];
            let d = v - self.means[c][j];
            ll -= 0.5 * (math::ln(2.0 * core::f64::consts::PI * var) + d * d / var);
        }
        ll
    }
}

impl Model for NaiveBayesModel {
    fn n_features(&self) -> usize {
        self.means[0].len()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Vec<Proba>> {
        x.check_cols(self.n_features())?;
        Ok(x.rows()
            .map(|r| {
                let l0 = self.joint_log_likelihood(r, 0);
                let l1 = self.joint_log_likelihood(r, 1);
                let p1 = math::sigmoid(l1 - l0);
                [1.0 - p1, p1]
            })
            .collect())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

impl Learner for GaussianNaiveBayes {
    fn notation(&self) -> String {
        "nb".into()
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
        let d = data.x.n_cols();
        let mut mass = [0.0; 2];
        let mut means = [vec![0.0; d], vec![0.0; d]];
        for (i, row) in data.x.rows().enumerate() {
            let c = data.y[i] as usize;
            mass[c] += data.weights[i];
            for j in 0..d {
                means[c][j] += data.weights[i] * row[j];
            }
        }
        if mass[0] <= 0.0 || mass[1] <= 0.0 {
            let label = mass[1] > 0.0;
            if mass[0] <= 0.0 && mass[1] <= 0.0 {
                return Err(Error::InvalidInput("sample weights sum to zero".into()));
            }
            return Ok(Box::new(ConstantModel::new(label, d)));
        }
        for c in 0..2 {
            means[c].iter_mut().for_each(|m| *m /= mass[c]);
        }
        let mut variances = [vec![0.0; d], vec![0.0; d]];
        for (i, row) in data.x.rows().enumerate() {
            let c = data.y[i] as usize;
            for j in 0..d {
                let dv = row[j] - means[c][j];
                variances[c][j] += data.weights[i] * dv * dv;
            }
        }
        for c in 0..2 {
            variances[c]
                .iter_mut()
                .for_each(|v| *v = (*v / mass[c]).max(self.var_floor));
        }
        let total = mass[0] + mass[1];
        Ok(Box::new(NaiveBayesModel {
            priors: [mass[0] / total, mass[1] / total],
            means,
            variances,
        }))
    }
}
