use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::any::Any;

use rand::Rng as _;

use super::member_proba;
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::{take, Matrix};
use crate::model::{Capabilities, FitContext, FitInput, Learner, Model, Proba};
use crate::rng;

#[derive(Debug, Clone)]
pub struct Bagging {
    pub n: usize,
    pub base: Arc<dyn Learner>,
    /// Bootstrap size as a fraction of the training rows.
    pub fraction: f64,
    /// Train every member on the full training data instead of a bootstrap.
    pub full_sample: bool,
}

impl Bagging {
    pub fn new(base: Arc<dyn Learner>, n: usize) -> Self {
        Bagging {
            n,
            base,
            fraction: 1.0,
            full_sample: false,
        }
    }

    /// Row indices of one bootstrap, drawn with replacement with
    /// probability proportional to the sample weights.
    pub fn bootstrap(&self, weights: &[f64], seed: u64) -> Result<Vec<usize>> {
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in weights {
            acc += w;
            cumulative.push(acc);
        }
        if acc <= 0.0 {
            return Err(Error::InvalidInput("sample weights sum to zero".into()));
        }
        let size = math::ceil(self.fraction * weights.len() as f64).max(1.0) as usize;
        let mut r = rng::seeded(seed);
        Ok((0..size)
            .map(|_| {
                let u = r.random::<f64>() * acc;
                cumulative
                    .partition_point(|&c| c <= u)
                    .min(weights.len() - 1)
            })
            .collect())
    }
}

#[derive(Debug)]
pub struct BaggingModel {
    pub members: Vec<Box<dyn Model>>,
}

impl Learner for Bagging {
    fn notation(&self) -> String {
        format!("Bag({}, n={})", self.base.notation(), self.n)
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            supports_weights: true,
            supports_proba: true,
        }
    }

    fn fit(&self, data: FitInput<'_>, ctx: &FitContext<'_>) -> Result<Box<dyn Model>> {
        if self.n == 0 {
            return Err(Error::Config("bagging needs at least one member".into()));
        }
        if self.fraction.is_nan() || self.fraction <= 0.0 {
            return Err(Error::Config(format!(
                "bootstrap fraction must be positive, got {}",
                self.fraction
            )));
        }
        let mut members = Vec::with_capacity(self.n);
        for m in 0..self.n {
            let seed = rng::mix(ctx.seed, m as u64);
            let member = if self.full_sample {
                self.base.fit(data, &ctx.with_seed(seed))
            } else {
                let idx = self.bootstrap(data.weights, seed)?;
                let (x, y) = (data.x.select_rows(&idx), take(data.y, &idx));
                let w = vec![1.0; idx.len()];
                self.base
                    .fit(FitInput::new(&x, &y, &w)?, &ctx.with_seed(seed))
            };
            members.push(member.map_err(|e| e.in_stage(format!("bagging member {m}")))?);
        }
        Ok(Box::new(BaggingModel { members }))
    }
}

impl Model for BaggingModel {
    fn n_features(&self) -> usize {
        self.members[0].n_features()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Vec<Proba>> {
        let mut out = vec![[0.0; 2]; x.n_rows()];
        for m in &self.members {
            for (o, p) in out.iter_mut().zip(member_proba(m.as_ref(), x)?) {
                o[0] += p[0];
                o[1] += p[1];
            }
        }
        let n = self.members.len() as f64;
        for o in out.iter_mut() {
            o[0] /= n;
            o[1] /= n;
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
