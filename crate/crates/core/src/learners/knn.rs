//! k-nearest neighbors with weighted votes.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::any::Any;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::Matrix;
use crate::model::{Capabilities, ConstantModel, FitContext, FitInput, Learner, Model, Proba};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KNearestNeighbors {
    pub k: usize,
}

impl Default for KNearestNeighbors {
    fn default() -> Self {
        KNearestNeighbors { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub x: Matrix,
    pub y: Vec<bool>,
    pub weights: Vec<f64>,
}

impl KnnModel {
    /// Indices of the `k` nearest training rows by squared euclidean
    /// distance; equal distances go to the lower training index.
    pub fn neighbors(&self, row: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .rows()
            .enumerate()
            .map(|(i, t)| (t.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    fn vote(&self, row: &[f64]) -> Proba {
        let (mut neg, mut pos) = (0.0, 0.0);
        for i in self.neighbors(row) {
            if self.y[i] {
                pos += self.weights[i];
            } else {
                neg += self.weights[i];
            }
        }
        let total = neg + pos;
        if total > 0.0 {
            [neg / total, pos / total]
        } else {
            [0.5, 0.5]
        }
    }
}

impl Model for KnnModel {
    fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Vec<Proba>> {
        x.check_cols(self.x.n_cols())?;
        Ok(x.rows().map(|r| self.vote(r)).collect())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

impl Learner for KNearestNeighbors {
    fn notation(&self) -> String {
        "knn".into()
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
        Ok(Box::new(KnnModel {
            k: self.k.max(1),
            x: data.x.clone(),
            y: data.y.to_vec(),
            weights: data.weights.to_vec(),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Protected;
    use alloc::vec;

    #[test]
    fn one_neighbor_recovers_training_label() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![5.0, 5.0]]).unwrap();
        let y = vec![false, true, false];
        let w = vec![1.0; 3];
        let p = Protected::default();
        let ctx = FitContext {
            protected: &p,
            seed: 0,
        };
        let m = KNearestNeighbors { k: 1 }
            .fit(FitInput::new(&x, &y, &w).unwrap(), &ctx)
            .unwrap();
        let proba = m.predict_proba(&x).unwrap();
        assert_eq!(proba, vec![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn weights_scale_votes() {
        let x = Matrix::from_rows(&[vec![0.0], vec![0.1], vec![0.2]]).unwrap();
        let y = vec![true, false, false];
        let w = vec![3.0, 1.0, 1.0];
        let p = Protected::default();
        let ctx = FitContext {
            protected: &p,
            seed: 0,
        };
        let m = KNearestNeighbors { k: 3 }
            .fit(FitInput::new(&x, &y, &w).unwrap(), &ctx)
            .unwrap();
        assert_eq!(
            m.predict_proba(&Matrix::from_rows(&[vec![0.1]]).unwrap())
                .unwrap()[0],
            [0.4, 0.6]
        );
    }

    #[test]
    fn distance_ties_go_to_lower_index() {
        let m = KnnModel {
            k: 1,
            x: Matrix::from_rows(&[vec![-1.0], vec![1.0]]).unwrap(),
            y: vec![true, false],
            weights: vec![1.0; 2],
        };
        assert_eq!(m.neighbors(&[0.0]), vec![0]);
    }
}
