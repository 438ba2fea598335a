use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::any::Any;

use rand::seq::SliceRandom;

use super::member_proba;
use crate::data::Protected;
use crate::error::{Error, Result};
use crate::matrix::{take, Matrix};
use crate::model::{Capabilities, FitContext, FitInput, Learner, Model, Proba};
use crate::rng;

#[derive(Debug, Clone)]
pub struct Stacking {
    pub members: Vec<Arc<dyn Learner>>,
    pub final_estimator: Arc<dyn Learner>,
    /// Feed the original features to the final estimator, ahead of the
    /// member probabilities.
    pub passthrough: bool,
    /// Internal folds for out-of-fold member probabilities.
    pub cv: usize,
}

#[derive(Debug)]
pub struct StackingModel {
    pub members: Vec<Box<dyn Model>>,
    pub final_model: Box<dyn Model>,
    pub passthrough: bool,
}

/// Label-stratified fold assignment of `y`.
fn fold_ids(y: &[bool], k: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::seeded(seed);
    let mut ids = alloc::vec![0; y.len()];
    let mut next = 0;
    for label in [false, true] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == label).collect();
        idx.shuffle(&mut r);
        for i in idx {
            ids[i] = next % k;
            next += 1;
        }
    }
    ids
}

/// Member probabilities laid out `[p0, p1]` per member.
fn meta_block(members: &[Box<dyn Model>], x: &Matrix) -> Result<Matrix> {
    let mut out = Matrix::zeros(x.n_rows(), 2 * members.len());
    for (j, m) in members.iter().enumerate() {
        for (i, p) in member_proba(m.as_ref(), x)?.into_iter().enumerate() {
            out.set(i, 2 * j, p[0]);
            out.set(i, 2 * j + 1, p[1]);
        }
    }
    Ok(out)
}

impl Stacking {
    pub fn new(
        members: Vec<Arc<dyn Learner>>,
        final_estimator: Arc<dyn Learner>,
        passthrough: bool,
    ) -> Self {
        Stacking {
            members,
            final_estimator,
            passthrough,
            cv: 5,
        }
    }

    pub fn meta_width(&self, n_features: usize) -> usize {
        2 * self.members.len() + if self.passthrough { n_features } else { 0 }
    }

    fn meta_features(&self, x: &Matrix, block: Matrix) -> Result<Matrix> {
        if self.passthrough {
            x.hstack(&block)
        } else {
            Ok(block)
        }
    }
}

impl Learner for Stacking {
    fn notation(&self) -> String {
        let names: Vec<String> = self.members.iter().map(|m| m.notation()).collect();
        format!(
            "Stack([{}], final={}, passthrough={})",
            names.join(", "),
            self.final_estimator.notation(),
            self.passthrough
        )
    }

    fn capabilities(&self) -> Capabilities {
        self.final_estimator.capabilities()
    }

    fn fit(&self, data: FitInput<'_>, ctx: &FitContext<'_>) -> Result<Box<dyn Model>> {
        if self.members.len() < 2 {
            return Err(Error::Config("stacking needs at least two members".into()));
        }
        if self.passthrough && data.x.n_cols() == 0 {
            return Err(Error::Config(
                "passthrough with zero original features".into(),
            ));
        }
        let n = data.n_rows();
        let k = self.cv.min(n);
        if k < 2 {
            return Err(Error::InvalidInput(
                "too few rows for out-of-fold predictions".into(),
            ));
        }
        let ids = fold_ids(data.y, k, rng::mix(ctx.seed, 0xF0));
        let mut block = Matrix::zeros(n, 2 * self.members.len());
        for f in 0..k {
            let train: Vec<usize> = (0..n).filter(|&i| ids[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| ids[i] == f).collect();
            let (xt, yt, wt) = (
                data.x.select_rows(&train),
                take(data.y, &train),
                take(data.weights, &train),
            );
            let xv = data.x.select_rows(&test);
            for (j, m) in self.members.iter().enumerate() {
                let fitted = m
                    .fit(
                        FitInput::new(&xt, &yt, &wt)?,
                        &ctx.with_seed(rng::mix(ctx.seed, (f * self.members.len() + j) as u64 + 1)),
                    )
                    .map_err(|e| e.in_stage(format!("stacking member {j}, fold {f}")))?;
                for (r, p) in test.iter().zip(member_proba(fitted.as_ref(), &xv)?) {
                    block.set(*r, 2 * j, p[0]);
                    block.set(*r, 2 * j + 1, p[1]);
                }
            }
        }
        let meta = self.meta_features(data.x, block)?;
        // without passthrough the protected columns are gone
        let no_groups = Protected::default();
        let final_ctx = FitContext {
            protected: if self.passthrough {
                ctx.protected
            } else {
                &no_groups
            },
            seed: rng::mix(ctx.seed, 0xFE),
        };
        let final_model = self
            .final_estimator
            .fit(FitInput::new(&meta, data.y, data.weights)?, &final_ctx)
            .map_err(|e| e.in_stage("stacking final estimator"))?;
        let members = self
            .members
            .iter()
            .enumerate()
            .map(|(j, m)| {
                m.fit(data, &ctx.with_seed(rng::mix(ctx.seed, 0x1000 + j as u64)))
                    .map_err(|e| e.in_stage(format!("stacking member {j}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Box::new(StackingModel {
            members,
            final_model,
            passthrough: self.passthrough,
        }))
    }
}

impl StackingModel {
    pub fn meta_features(&self, x: &Matrix) -> Result<Matrix> {
        let block = meta_block(&self.members, x)?;
        if self.passthrough {
            x.hstack(&block)
        } else {
            Ok(block)
        }
    }
}

impl Model for StackingModel {
    fn n_features(&self) -> usize {
        self.members[0].n_features()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Vec<Proba>> {
        self.final_model.predict_proba(&self.meta_features(x)?)
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<bool>> {
        self.final_model.predict(&self.meta_features(x)?)
    }

    fn supports_proba(&self) -> bool {
        self.final_model.supports_proba()
    }

    fn mitigator_fits(&self) -> usize {
        self.members
            .iter()
            .map(|m| m.mitigator_fits())
            .sum::<usize>()
            + self.final_model.mitigator_fits()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
