use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::any::Any;

use serde::{Deserialize, Serialize};

use super::member_proba;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{Capabilities, FitContext, FitInput, Learner, Model, Proba};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VotingMode {
    #[default]
    Hard,
    Soft,
}

#[derive(Debug, Clone)]
pub struct Voting {
    pub members: Vec<Arc<dyn Learner>>,
    pub mode: VotingMode,
}

#[derive(Debug)]
pub struct VotingModel {
    pub members: Vec<Box<dyn Model>>,
    pub mode: VotingMode,
}

impl Learner for Voting {
    fn notation(&self) -> String {
        let names: Vec<String> = self.members.iter().map(|m| m.notation()).collect();
        format!("Vote([{}])", names.join(", "))
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            supports_weights: true,
            supports_proba: true,
        }
    }

    fn fit(&self, data: FitInput<'_>, ctx: &FitContext<'_>) -> Result<Box<dyn Model>> {
        if self.members.len() < 2 {
            return Err(Error::Config("voting needs at least two members".into()));
        }
        let members = self
            .members
            .iter()
            .enumerate()
            .map(|(i, m)| {
                m.fit(data, &ctx.with_seed(rng::mix(ctx.seed, i as u64)))
                    .map_err(|e| e.in_stage(format!("voting member {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Box::new(VotingModel {
            members,
            mode: self.mode,
        }))
    }
}

impl Model for VotingModel {
    fn n_features(&self) -> usize {
        self.members[0].n_features()
    }

    /// Hard mode: vote fractions. Soft mode: mean member probabilities.
    fn predict_proba(&self, x: &Matrix) -> Result<Vec<Proba>> {
        let mut out = vec![[0.0; 2]; x.n_rows()];
        for m in &self.members {
            match self.mode {
                VotingMode::Hard => {
                    for (o, l) in out.iter_mut().zip(m.predict(x)?) {
                        o[l as usize] += 1.0;
                    }
                }
                VotingMode::Soft => {
                    for (o, p) in out.iter_mut().zip(member_proba(m.as_ref(), x)?) {
                        o[0] += p[0];
                        o[1] += p[1];
                    }
                }
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
