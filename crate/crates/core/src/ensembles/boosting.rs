//! Discrete AdaBoost (SAMME, two classes).

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::any::Any;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::model::{Capabilities, FitContext, FitInput, Learner, Model, Proba};
use crate::rng;

const MIN_ERROR: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Boosting {
    pub n: usize,
    pub base: Arc<dyn Learner>,
    /// Keep the normalized sample weights of every round.
    pub keep_history: bool,
}

impl Boosting {
    pub fn new(base: Arc<dyn Learner>, n: usize) -> Self {
        Boosting {
            n,
            base,
            keep_history: false,
        }
    }
}

#[derive(Debug)]
pub struct BoostingModel {
    pub members: Vec<Box<dyn Model>>,
    pub alphas: Vec<f64>,
    pub errors: Vec<f64>,
    /// Sample weights entering each round, when requested.
    pub history: Vec<Vec<f64>>,
    /// The first member had error 0 or at least 0.5 and is the only one.
    pub degenerate: bool,
}

/// `ln((1 − ε) / ε)` with ε clamped away from 0.
pub fn samme_alpha(error: f64) -> f64 {
    let e = error.max(MIN_ERROR);
    math::ln((1.0 - e) / e)
}

impl Learner for Boosting {
    fn notation(&self) -> String {
        format!("Boost({}, n={})", self.base.notation(), self.n)
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            supports_weights: true,
            supports_proba: true,
        }
    }

    fn fit(&self, data: FitInput<'_>, ctx: &FitContext<'_>) -> Result<Box<dyn Model>> {
        if self.n == 0 {
            return Err(Error::Config("boosting needs at least one round".into()));
        }
        if !self.base.capabilities().supports_proba {
            return Err(Error::NoProbabilities.in_stage("boosting member"));
        }
        let total: f64 = data.weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidInput("sample weights sum to zero".into()));
        }
        let mut w: Vec<f64> = data.weights.iter().map(|v| v / total).collect();
        let mut model = BoostingModel {
            members: Vec::new(),
            alphas: Vec::new(),
            errors: Vec::new(),
            history: Vec::new(),
            degenerate: false,
        };
        for t in 0..self.n {
            if self.keep_history {
                model.history.push(w.clone());
            }
            let member = self
                .base
                .fit(
                    FitInput::new(data.x, data.y, &w)?,
                    &ctx.with_seed(rng::mix(ctx.seed, t as u64)),
                )
                .map_err(|e| e.in_stage(format!("boosting round {t}")))?;
            let pred = member.predict(data.x)?;
            let miss: Vec<bool> = pred.iter().zip(data.y).map(|(p, y)| p != y).collect();
            let error: f64 = w
                .iter()
                .zip(&miss)
                .filter(|(_, &m)| m)
                .map(|(v, _)| v)
                .sum();
            if error >= 0.5 {
                if t == 0 {
                    log::warn!("first boosting round has error {error}; keeping a single member");
                    model.degenerate = true;
                    model.members.push(member);
                    model.alphas.push(1.0);
                    model.errors.push(error);
                }
                break;
            }
            let alpha = samme_alpha(error);
            model.members.push(member);
            model.alphas.push(alpha);
            model.errors.push(error);
            if error <= 0.0 {
                if t == 0 {
                    log::warn!("first boosting member is perfect; keeping a single member");
                    model.degenerate = true;
                }
                break;
            }
            let boost = math::exp(alpha);
            for (v, &m) in w.iter_mut().zip(&miss) {
                if m {
                    *v *= boost;
                }
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
        }
        Ok(Box::new(model))
    }
}

impl Model for BoostingModel {
    fn n_features(&self) -> usize {
        self.members[0].n_features()
    }

    /// Alpha-weighted mean of member probabilities.
    fn predict_proba(&self, x: &Matrix) -> Result<Vec<Proba>> {
        let mut out = vec![[0.0; 2]; x.n_rows()];
        let total: f64 = self.alphas.iter().sum();
        for (m, a) in self.members.iter().zip(&self.alphas) {
            for (o, p) in out.iter_mut().zip(m.predict_proba(x)?) {
                o[0] += a / total * p[0];
                o[1] += a / total * p[1];
            }
        }
        Ok(out)
    }

    fn mitigator_fits(&self) -> usize {
        self.members.iter().map(|m| m.mitigator_fits()).sum()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Protected;
    use crate::learners::DecisionTree;
    use rand::Rng as _;

    fn separable(seed: u64, n: usize) -> (Matrix, Vec<bool>) {
        let mut r = rng::seeded(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)])
            .collect();
        let y = rows.iter().map(|p| p[0] + 0.7 * p[1] > 0.1).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn alpha_formula() {
        assert!((samme_alpha(0.25) - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn stumps_fit_a_linear_boundary() {
        let (x, y) = separable(7, 200);
        let w = vec![1.0; 200];
        let p = Protected::default();
        let ctx = FitContext {
            protected: &p,
            seed: 0,
        };
        let b = Boosting {
            n: 50,
            base: Arc::new(DecisionTree::stump()),
            keep_history: true,
        };
        let m = b.fit(FitInput::new(&x, &y, &w).unwrap(), &ctx).unwrap();
        let pred = m.predict(&x).unwrap();
        let acc = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / 200.0;
        assert!(acc >= 0.99, "accuracy {acc}");
        let bm = m.as_any().downcast_ref::<BoostingModel>().unwrap();
        for h in &bm.history {
            assert!((h.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(h.iter().all(|&v| v >= 0.0));
        }
        assert!(bm.alphas.iter().all(|a| a.is_finite()));
    }

    #[test]
    fn single_round_equals_base() {
        let (x, y) = separable(1, 60);
        let w = vec![1.0; 60];
        let p = Protected::default();
        let ctx = FitContext {
            protected: &p,
            seed: 0,
        };
        let base = DecisionTree {
            max_depth: Some(2),
            ..Default::default()
        };
        let input = FitInput::new(&x, &y, &w).unwrap();
        let a = Boosting::new(Arc::new(base.clone()), 1)
            .fit(input, &ctx)
            .unwrap()
            .predict(&x)
            .unwrap();
        let b = base.fit(input, &ctx).unwrap().predict(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perfect_first_member_is_flagged() {
        let (x, y) = separable(2, 40);
        let w = vec![1.0; 40];
        let p = Protected::default();
        let ctx = FitContext {
            protected: &p,
            seed: 0,
        };
        let m = Boosting::new(Arc::new(DecisionTree::default()), 10)
            .fit(FitInput::new(&x, &y, &w).unwrap(), &ctx)
            .unwrap();
        let bm = m.as_any().downcast_ref::<BoostingModel>().unwrap();
        assert!(bm.degenerate);
        assert_eq!(bm.members.len(), 1);
    }
}
