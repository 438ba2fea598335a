//! Pre-, in- and post-estimator bias mitigators and the learner wrappers
//! that place them around an estimator or an ensemble.

mod caleq;
mod di_remover;
mod lfr;
mod prejudice_remover;
mod reweighing;

pub use caleq::{group_cost, CalibratedEqOdds, CostConstraint};
pub use di_remover::{ks_distance, DisparateImpactRemover};
pub use lfr::{objective as lfr_objective, param_len as lfr_param_len, Lfr, LfrConfig, LfrData};
pub use prejudice_remover::{prejudice_index, InMitigatedModel, PrejudiceRemover};
pub use reweighing::Reweighing;

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::any::Any;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Protected;
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::{take, Matrix};
use crate::model::{argmax, Capabilities, FitContext, FitInput, Learner, Model, Proba};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MitigatorKind {
    None,
    Pre,
    In,
    Post,
}

impl MitigatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MitigatorKind::None => "none",
            MitigatorKind::Pre => "pre",
            MitigatorKind::In => "in",
            MitigatorKind::Post => "post",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "hyperparameters", rename_all = "snake_case")]
pub enum PreMitigator {
    Reweighing,
    DisparateImpactRemover { repair_level: f64 },
    Lfr(LfrConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "hyperparameters", rename_all = "snake_case")]
pub enum InMitigator {
    PrejudiceRemover(PrejudiceRemover),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalEqOddsConfig {
    pub cost_constraint: CostConstraint,
    pub holdout_fraction: f64,
    /// Whether the adjusted model exposes class probabilities.
    pub expose_proba: bool,
}

impl Default for CalEqOddsConfig {
    fn default() -> Self {
        CalEqOddsConfig {
            cost_constraint: CostConstraint::Weighted,
            holdout_fraction: 0.3,
            expose_proba: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "hyperparameters", rename_all = "snake_case")]
pub enum PostMitigator {
    CalibratedEqOdds(CalEqOddsConfig),
}

impl PostMitigator {
    pub fn exposes_proba(&self) -> bool {
        match self {
            PostMitigator::CalibratedEqOdds(c) => c.expose_proba,
        }
    }
}

/// A mitigator of any kind, serialized as
/// `{"kind": ..., "name": ..., "hyperparameters": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MitigatorConfig {
    Pre(PreMitigator),
    In(InMitigator),
    Post(PostMitigator),
}

impl MitigatorConfig {
    pub fn kind(&self) -> MitigatorKind {
        match self {
            MitigatorConfig::Pre(_) => MitigatorKind::Pre,
            MitigatorConfig::In(_) => MitigatorKind::In,
            MitigatorConfig::Post(_) => MitigatorKind::Post,
        }
    }

    /// Stable short label used as a configuration key.
    pub fn label(&self) -> String {
        match self {
            MitigatorConfig::Pre(PreMitigator::Reweighing) => "Reweighing".into(),
            MitigatorConfig::Pre(PreMitigator::DisparateImpactRemover { repair_level }) => {
                format!("DisparateImpactRemover(repair_level={repair_level})")
            }
            MitigatorConfig::Pre(PreMitigator::Lfr(c)) => {
                format!("LFR(k={}, Ax={}, Ay={}, Az={})", c.k, c.ax, c.ay, c.az)
            }
            MitigatorConfig::In(InMitigator::PrejudiceRemover(p)) => {
                format!("PrejudiceRemover(eta={})", p.eta)
            }
            MitigatorConfig::Post(PostMitigator::CalibratedEqOdds(c)) => {
                format!(
                    "CalibratedEqOdds(cost_constraint={})",
                    c.cost_constraint.as_str()
                )
            }
        }
    }
}

/// A fitted pre-estimator transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum FittedPre {
    Reweighing(Reweighing),
    DisparateImpactRemover {
        remover: DisparateImpactRemover,
        protected: Protected,
    },
    Lfr(Lfr),
}

impl FittedPre {
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            FittedPre::Reweighing(_) => Ok(x.clone()),
            FittedPre::DisparateImpactRemover { remover, protected } => {
                remover.transform(x, &protected.priv_mask(x))
            }
            FittedPre::Lfr(l) => l.transform(x),
        }
    }
}

/// Result of fitting a pre-estimator mitigator on training rows.
#[derive(Debug, Clone)]
pub struct PreFit {
    pub fitted: FittedPre,
    /// Training features as the downstream estimator sees them.
    pub x: Matrix,
    /// Training weights as the downstream estimator sees them.
    pub weights: Vec<f64>,
}

fn check_groups(priv_mask: &[bool]) -> Result<()> {
    if !priv_mask.iter().any(|&p| p) {
        return Err(Error::DegenerateGroup("privileged group is empty".into()));
    }
    if priv_mask.iter().all(|&p| p) {
        return Err(Error::DegenerateGroup("unprivileged group is empty".into()));
    }
    Ok(())
}

impl PreMitigator {
    pub fn fit(&self, data: FitInput<'_>, ctx: &FitContext<'_>) -> Result<PreFit> {
        let priv_mask = ctx.protected.priv_mask(data.x);
        check_groups(&priv_mask)?;
        match self {
            PreMitigator::Reweighing => {
                let r = Reweighing::fit(&priv_mask, data.y, data.weights)?;
                Ok(PreFit {
                    weights: r.apply(&priv_mask, data.y, data.weights),
                    x: data.x.clone(),
                    fitted: FittedPre::Reweighing(r),
                })
            }
            PreMitigator::DisparateImpactRemover { repair_level } => {
                let skip = ctx.protected.columns().collect();
                let remover = DisparateImpactRemover::fit(data.x, &priv_mask, skip, *repair_level)?;
                Ok(PreFit {
                    x: remover.transform(data.x, &priv_mask)?,
                    weights: data.weights.to_vec(),
                    fitted: FittedPre::DisparateImpactRemover {
                        remover,
                        protected: ctx.protected.clone(),
                    },
                })
            }
            PreMitigator::Lfr(cfg) => {
                let lfr = Lfr::fit(
                    cfg,
                    LfrData {
                        x: data.x,
                        y: data.y,
                        priv_mask: &priv_mask,
                        weights: data.weights,
                    },
                    ctx.seed,
                )?;
                Ok(PreFit {
                    x: lfr.transform(data.x)?,
                    weights: data.weights.to_vec(),
                    fitted: FittedPre::Lfr(lfr),
                })
            }
        }
    }
}

impl InMitigator {
    pub fn learner(&self) -> Arc<dyn Learner> {
        match self {
            InMitigator::PrejudiceRemover(p) => Arc::new(p.clone()),
        }
    }
}

/// `PreMit(inner)`: a pre-estimator mitigator feeding `inner`.
#[derive(Debug, Clone)]
pub struct PreMitigated {
    pub mitigator: PreMitigator,
    pub inner: Arc<dyn Learner>,
}

#[derive(Debug)]
pub struct PreMitigatedModel {
    pub fitted: FittedPre,
    /// Training weights after mitigation, kept for inspection.
    pub train_weights: Vec<f64>,
    pub inner: Box<dyn Model>,
}

impl Learner for PreMitigated {
    fn notation(&self) -> String {
        format!("PreMit({})", self.inner.notation())
    }

    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }

    fn fit(&self, data: FitInput<'_>, ctx: &FitContext<'_>) -> Result<Box<dyn Model>> {
        let pre = self
            .mitigator
            .fit(data, ctx)
            .map_err(|e| e.in_stage("pre-estimator"))?;
        let input = FitInput::new(&pre.x, data.y, &pre.weights)?;
        let inner = self
            .inner
            .fit(input, &ctx.with_seed(rng::mix(ctx.seed, 1)))?;
        Ok(Box::new(PreMitigatedModel {
            fitted: pre.fitted,
            train_weights: pre.weights,
            inner,
        }))
    }
}

impl Model for PreMitigatedModel {
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Vec<Proba>> {
        self.inner.predict_proba(&self.fitted.transform(x)?)
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<bool>> {
        self.inner.predict(&self.fitted.transform(x)?)
    }

    fn supports_proba(&self) -> bool {
        self.inner.supports_proba()
    }

    fn mitigator_fits(&self) -> usize {
        1 + self.inner.mitigator_fits()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// `PostMit(inner)`: `inner` trained on part of the rows, adjusted on the
/// held-out remainder.
#[derive(Debug, Clone)]
pub struct PostMitigated {
    pub mitigator: PostMitigator,
    pub inner: Arc<dyn Learner>,
}

#[derive(Debug)]
pub struct PostMitigatedModel {
    pub adjust: CalibratedEqOdds,
    pub protected: Protected,
    pub expose_proba: bool,
    pub inner: Box<dyn Model>,
}

/// Seeded split stratified by group and label; returns `(train, holdout)`.
pub fn holdout_split(
    priv_mask: &[bool],
    y: &[bool],
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut r = rng::seeded(seed);
    let (mut train, mut hold) = (Vec::new(), Vec::new());
    for (g, c) in [(false, false), (false, true), (true, false), (true, true)] {
        let mut idx: Vec<usize> = (0..y.len())
            .filter(|&i| priv_mask[i] == g && y[i] == c)
            .collect();
        idx.shuffle(&mut r);
        let mut n_hold = math::floor(fraction * idx.len() as f64 + 0.5) as usize;
        if idx.len() >= 2 {
            n_hold = n_hold.clamp(1, idx.len() - 1);
        }
        hold.extend_from_slice(&idx[..n_hold]);
        train.extend_from_slice(&idx[n_hold..]);
    }
    train.sort_unstable();
    hold.sort_unstable();
    (train, hold)
}

impl Learner for PostMitigated {
    fn notation(&self) -> String {
        format!("PostMit({})", self.inner.notation())
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            supports_weights: self.inner.capabilities().supports_weights,
            supports_proba: self.mitigator.exposes_proba(),
        }
    }

    fn fit(&self, data: FitInput<'_>, ctx: &FitContext<'_>) -> Result<Box<dyn Model>> {
        let PostMitigator::CalibratedEqOdds(cfg) = &self.mitigator;
        if !self.inner.capabilities().supports_proba {
            return Err(Error::NoProbabilities.in_stage("post-estimator upstream"));
        }
        let priv_mask = ctx.protected.priv_mask(data.x);
        check_groups(&priv_mask)?;
        let (train, hold) = holdout_split(
            &priv_mask,
            data.y,
            cfg.holdout_fraction,
            rng::mix(ctx.seed, 2),
        );
        let (xt, yt, wt) = (
            data.x.select_rows(&train),
            take(data.y, &train),
            take(data.weights, &train),
        );
        let inner = self.inner.fit(
            FitInput::new(&xt, &yt, &wt)?,
            &ctx.with_seed(rng::mix(ctx.seed, 3)),
        )?;
        let xh = data.x.select_rows(&hold);
        let scores: Vec<f64> = inner.predict_proba(&xh)?.iter().map(|p| p[1]).collect();
        let adjust = CalibratedEqOdds::fit(
            cfg.cost_constraint,
            &scores,
            &take(data.y, &hold),
            &take(&priv_mask, &hold),
            &take(data.weights, &hold),
            ctx.seed,
        )
        .map_err(|e| e.in_stage("post-estimator"))?;
        Ok(Box::new(PostMitigatedModel {
            adjust,
            protected: ctx.protected.clone(),
            expose_proba: cfg.expose_proba,
            inner,
        }))
    }
}

impl PostMitigatedModel {
    fn scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        let priv_mask = self.protected.priv_mask(x);
        Ok(self
            .inner
            .predict_proba(x)?
            .iter()
            .zip(&priv_mask)
            .map(|(p, &g)| self.adjust.adjust(p[1], g))
            .collect())
    }

    /// Labels drawn by randomized mixing rather than expected scores.
    pub fn predict_sampled(&self, x: &Matrix, seed: u64) -> Result<Vec<bool>> {
        let scores: Vec<f64> = self.inner.predict_proba(x)?.iter().map(|p| p[1]).collect();
        Ok(self
            .adjust
            .sample(&scores, &self.protected.priv_mask(x), seed))
    }
}

impl Model for PostMitigatedModel {
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Vec<Proba>> {
        if !self.expose_proba {
            return Err(Error::NoProbabilities);
        }
        Ok(self.scores(x)?.into_iter().map(|s| [1.0 - s, s]).collect())
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<bool>> {
        Ok(self
            .scores(x)?
            .into_iter()
            .map(|s| argmax(&[1.0 - s, s]))
            .collect())
    }

    fn supports_proba(&self) -> bool {
        self.expose_proba
    }

    fn mitigator_fits(&self) -> usize {
        1 + self.inner.mitigator_fits()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
