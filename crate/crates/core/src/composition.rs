//! Mitigation plans: where a mitigator sits relative to an ensemble, which
//! placements are feasible, and how a plan becomes a trainable learner.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Protected;
use crate::ensembles::{Bagging, Boosting, EnsembleKind, Stacking, Voting, VotingMode};
use crate::error::{Error, Result};
use crate::learners::{heterogeneous_roster, DecisionTree, EstimatorSpec, LogisticRegression};
use crate::matrix::Matrix;
use crate::mitigators::{
    CalEqOddsConfig, InMitigator, MitigatorConfig, MitigatorKind, PostMitigated, PostMitigator,
    PreMitigated, PreMitigator, PrejudiceRemover,
};
use crate::model::{FitContext, FitInput, Learner, Model, Proba};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    #[default]
    Estimator,
    Ensemble,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Estimator => "estimator",
            Level::Ensemble => "ensemble",
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One coordinate of the ensemble × mitigator grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationPlan {
    pub ensemble: EnsembleKind,
    /// Member count for bagging and boosting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub mitigator: MitigatorKind,
    #[serde(default)]
    pub level: Level,
    #[serde(default, skip_serializing_if = "is_false")]
    pub passthrough: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub mitigate_base: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub mitigate_final: bool,
    /// Concrete mitigator; the kind's default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<MitigatorConfig>,
}

pub const DEFAULT_SIZE: usize = 10;

impl MitigationPlan {
    pub fn new(ensemble: EnsembleKind, mitigator: MitigatorKind, level: Level) -> Self {
        MitigationPlan {
            ensemble,
            n: None,
            mitigator,
            level,
            passthrough: false,
            mitigate_base: false,
            mitigate_final: false,
            config: None,
        }
    }

    pub fn baseline() -> Self {
        MitigationPlan::new(EnsembleKind::None, MitigatorKind::None, Level::Estimator)
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_stacking(
        mut self,
        passthrough: bool,
        mitigate_base: bool,
        mitigate_final: bool,
    ) -> Self {
        self.passthrough = passthrough;
        self.mitigate_base = mitigate_base;
        self.mitigate_final = mitigate_final;
        self
    }

    pub fn with_config(mut self, config: MitigatorConfig) -> Self {
        self.config = Some(config);
        self
    }

    pub fn size(&self) -> usize {
        self.n.unwrap_or(DEFAULT_SIZE)
    }

    /// The concrete mitigator, falling back to the kind's default.
    pub fn mitigator_config(&self) -> Option<MitigatorConfig> {
        if let Some(c) = &self.config {
            return Some(c.clone());
        }
        match self.mitigator {
            MitigatorKind::None => None,
            MitigatorKind::Pre => Some(MitigatorConfig::Pre(PreMitigator::Reweighing)),
            MitigatorKind::In => Some(MitigatorConfig::In(InMitigator::PrejudiceRemover(
                PrejudiceRemover::default(),
            ))),
            MitigatorKind::Post => Some(MitigatorConfig::Post(PostMitigator::CalibratedEqOdds(
                CalEqOddsConfig::default(),
            ))),
        }
    }

    /// Pseudo-code notation, e.g. `Bag(PreMit(est), n=5)`.
    pub fn notation(&self) -> String {
        let wrap = |inner: &str| -> String {
            match self.mitigator {
                MitigatorKind::Pre => format!("PreMit({inner})"),
                MitigatorKind::Post => format!("PostMit({inner})"),
                MitigatorKind::In | MitigatorKind::None => String::from(inner),
            }
        };
        let est = |many: bool| -> String {
            let e = if many { "est_i" } else { "est" };
            match self.mitigator {
                MitigatorKind::In => String::from(if many { "InMit_i" } else { "InMit" }),
                _ => wrap(e),
            }
        };
        let plain = |many: bool| String::from(if many { "est_i" } else { "est" });
        let at_est = self.level == Level::Estimator;
        match self.ensemble {
            EnsembleKind::None => format!("NoEnsemble({})", est(false)),
            EnsembleKind::Bagging | EnsembleKind::Boosting => {
                let name = if self.ensemble == EnsembleKind::Bagging {
                    "Bag"
                } else {
                    "Boost"
                };
                if at_est {
                    format!("{name}({}, n={})", est(false), self.size())
                } else {
                    wrap(&format!("{name}(est, n={})", self.size()))
                }
            }
            EnsembleKind::Voting => {
                if at_est {
                    format!("Vote({})", est(true))
                } else {
                    wrap("Vote(est_i)")
                }
            }
            EnsembleKind::Stacking => {
                let pt = if self.passthrough {
                    ", passthrough"
                } else {
                    ""
                };
                if at_est && self.mitigator != MitigatorKind::None {
                    let base = if self.mitigate_base {
                        est(true)
                    } else {
                        plain(true)
                    };
                    let fin = if self.mitigate_final {
                        est(false)
                    } else {
                        plain(false)
                    };
                    format!("Stack({base}, final={fin}{pt})")
                } else {
                    wrap(&format!("Stack(est_i, final=est{pt})"))
                }
            }
        }
    }

    /// Notation plus the concrete mitigator, unique within a search grid.
    pub fn key(&self) -> String {
        match &self.config {
            Some(c) => format!("{} [{}]", self.notation(), c.label()),
            None => self.notation(),
        }
    }
}

impl fmt::Display for MitigationPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.notation())
    }
}

/// Why a plan is infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    /// An in-estimator mitigator is itself the estimator.
    InEstimatorAtEnsembleLevel,
    /// The ensemble consumes member probabilities the post-estimator hides.
    PostWithoutProba,
    /// Passthrough stacking may mitigate the base or the final estimator, not both.
    PassthroughBothMitigated,
    /// A mitigated final estimator needs the original features, protected
    /// attributes included, via passthrough.
    FinalWithoutPassthrough,
    /// Estimator-level stacking must mitigate the base or the final estimator.
    StackingWithoutTarget,
    /// Without an ensemble both levels coincide; only the estimator level is listed.
    NoEnsembleAtEnsembleLevel,
    /// An unmitigated plan has no placement.
    UnmitigatedPlacement,
    /// Stacking options on a non-stacking ensemble.
    StackingOptionsOutsideStacking,
    /// Ensemble-level stacking mitigates the whole stack, not its parts.
    StackingTargetsAtEnsembleLevel,
    /// Mitigator configuration of a different kind.
    ConfigKindMismatch,
    /// Bagging or boosting with zero members.
    EmptyEnsemble,
}

impl Rejection {
    pub fn reason(self) -> &'static str {
        match self {
            Rejection::InEstimatorAtEnsembleLevel => {
                "an in-estimator mitigator is itself the estimator, so it cannot be applied at the ensemble level"
            }
            Rejection::PostWithoutProba => {
                "the ensemble needs member class probabilities but the post-estimator mitigator does not expose them"
            }
            Rejection::PassthroughBothMitigated => {
                "with passthrough, the base estimators or the final estimator could be mitigated, but not both"
            }
            Rejection::FinalWithoutPassthrough => {
                "mitigating the final estimator requires passthrough, since it otherwise never sees the protected attributes"
            }
            Rejection::StackingWithoutTarget => "estimator-level stacking must mitigate the base or the final estimator",
            Rejection::NoEnsembleAtEnsembleLevel => "without an ensemble the estimator and ensemble levels coincide",
            Rejection::UnmitigatedPlacement => "an unmitigated plan has no mitigation level or targets",
            Rejection::StackingOptionsOutsideStacking => "passthrough and base/final targets only apply to stacking",
            Rejection::StackingTargetsAtEnsembleLevel => {
                "ensemble-level stacking mitigates the whole stack, so base/final targets do not apply"
            }
            Rejection::ConfigKindMismatch => "mitigator configuration does not match the mitigator kind",
            Rejection::EmptyEnsemble => "bagging and boosting need at least one member",
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.reason())
    }
}

/// Checks a plan against the feasibility rules.
pub fn validate_plan(p: &MitigationPlan) -> core::result::Result<(), Rejection> {
    use EnsembleKind as E;
    use MitigatorKind as M;
    if let Some(c) = &p.config {
        if c.kind() != p.mitigator {
            return Err(Rejection::ConfigKindMismatch);
        }
    }
    if matches!(p.ensemble, E::Bagging | E::Boosting) && p.n == Some(0) {
        return Err(Rejection::EmptyEnsemble);
    }
    let targets = p.mitigate_base || p.mitigate_final;
    if p.ensemble != E::Stacking && (targets || p.passthrough) {
        return Err(Rejection::StackingOptionsOutsideStacking);
    }
    if p.mitigator == M::None {
        if p.level != Level::Estimator || targets {
            return Err(Rejection::UnmitigatedPlacement);
        }
        return Ok(());
    }
    if p.mitigator == M::In && p.level == Level::Ensemble {
        return Err(Rejection::InEstimatorAtEnsembleLevel);
    }
    if p.ensemble == E::None && p.level == Level::Ensemble {
        return Err(Rejection::NoEnsembleAtEnsembleLevel);
    }
    if p.ensemble == E::Stacking {
        match p.level {
            Level::Ensemble if targets => return Err(Rejection::StackingTargetsAtEnsembleLevel),
            Level::Ensemble => {}
            Level::Estimator => {
                if !targets {
                    return Err(Rejection::StackingWithoutTarget);
                }
                if p.passthrough && p.mitigate_base && p.mitigate_final {
                    return Err(Rejection::PassthroughBothMitigated);
                }
                if !p.passthrough && p.mitigate_final {
                    return Err(Rejection::FinalWithoutPassthrough);
                }
            }
        }
    }
    let hides_proba = p.mitigator == M::Post
        && matches!(p.mitigator_config(), Some(MitigatorConfig::Post(ref post)) if !post.exposes_proba());
    if hides_proba && p.level == Level::Estimator {
        let needs_proba = match p.ensemble {
            E::Boosting => true,
            E::Stacking => p.mitigate_base,
            _ => false,
        };
        if needs_proba {
            return Err(Rejection::PostWithoutProba);
        }
    }
    Ok(())
}

/// Every structural combination of ensemble, mitigator kind, level and
/// stacking options, accepted or not.
pub fn all_structures() -> Vec<MitigationPlan> {
    let mut out = Vec::new();
    for e in EnsembleKind::ALL {
        for m in [
            MitigatorKind::None,
            MitigatorKind::Pre,
            MitigatorKind::In,
            MitigatorKind::Post,
        ] {
            for level in [Level::Estimator, Level::Ensemble] {
                for bits in 0..8u8 {
                    out.push(MitigationPlan::new(e, m, level).with_stacking(
                        bits & 1 != 0,
                        bits & 2 != 0,
                        bits & 4 != 0,
                    ));
                }
            }
        }
    }
    out
}

/// The accepted structural cells of the grid.
pub fn accepted_cells() -> Vec<MitigationPlan> {
    all_structures()
        .into_iter()
        .filter(|p| validate_plan(p).is_ok())
        .collect()
}

/// Estimators a plan is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Roster {
    /// Lone estimator and bagging member.
    pub base: EstimatorSpec,
    pub boosting_base: EstimatorSpec,
    /// Voting and stacking members.
    pub heterogeneous: Vec<EstimatorSpec>,
    pub final_estimator: EstimatorSpec,
    /// In-estimator stand-ins for a heterogeneous roster.
    pub in_variants: Vec<PrejudiceRemover>,
    pub voting: VotingMode,
}

impl Default for Roster {
    fn default() -> Self {
        Roster {
            base: EstimatorSpec::Tree(DecisionTree::default()),
            boosting_base: EstimatorSpec::Tree(DecisionTree::stump()),
            heterogeneous: heterogeneous_roster(),
            final_estimator: EstimatorSpec::Logistic(LogisticRegression::default()),
            in_variants: [1.0, 10.0, 100.0, 1000.0]
                .into_iter()
                .map(PrejudiceRemover::with_eta)
                .collect(),
            voting: VotingMode::Hard,
        }
    }
}

fn shared(spec: &EstimatorSpec) -> Arc<dyn Learner> {
    Arc::new(spec.clone())
}

fn mitigate(inner: Arc<dyn Learner>, cfg: &MitigatorConfig) -> Arc<dyn Learner> {
    match cfg {
        MitigatorConfig::Pre(p) => Arc::new(PreMitigated {
            mitigator: p.clone(),
            inner,
        }),
        MitigatorConfig::In(i) => i.learner(),
        MitigatorConfig::Post(p) => Arc::new(PostMitigated {
            mitigator: p.clone(),
            inner,
        }),
    }
}

/// A validated plan turned into a trainable learner.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub plan: MitigationPlan,
    pub learner: Arc<dyn Learner>,
}

/// Builds the learner for a plan; rejects infeasible plans.
pub fn build_pipeline(plan: &MitigationPlan, roster: &Roster) -> Result<Pipeline> {
    validate_plan(plan)
        .map_err(|r| Error::Config(format!("{}: {}", plan.notation(), r.reason())))?;
    let cfg = plan.mitigator_config();
    let at_est = plan.level == Level::Estimator;
    let member = |spec: &EstimatorSpec| -> Arc<dyn Learner> {
        match (&cfg, at_est) {
            (Some(c), true) => mitigate(shared(spec), c),
            _ => shared(spec),
        }
    };
    let outer = |l: Arc<dyn Learner>| -> Arc<dyn Learner> {
        match (&cfg, at_est) {
            (Some(c), false) => mitigate(l, c),
            _ => l,
        }
    };
    let heterogeneous = |mitigated: bool| -> Vec<Arc<dyn Learner>> {
        match (&cfg, mitigated) {
            (Some(MitigatorConfig::In(_)), true) => roster
                .in_variants
                .iter()
                .map(|p| Arc::new(p.clone()) as Arc<dyn Learner>)
                .collect(),
            (Some(c), true) => roster
                .heterogeneous
                .iter()
                .map(|s| mitigate(shared(s), c))
                .collect(),
            _ => roster.heterogeneous.iter().map(shared).collect(),
        }
    };
    if roster.heterogeneous.len() < 2
        && matches!(plan.ensemble, EnsembleKind::Voting | EnsembleKind::Stacking)
    {
        return Err(Error::Config(
            "voting and stacking need at least two roster members".into(),
        ));
    }
    let learner: Arc<dyn Learner> = match plan.ensemble {
        EnsembleKind::None => member(&roster.base),
        EnsembleKind::Bagging => outer(Arc::new(Bagging::new(member(&roster.base), plan.size()))),
        EnsembleKind::Boosting => {
            let base = member(&roster.boosting_base);
            if !base.capabilities().supports_proba {
                return Err(Error::NoProbabilities.in_stage("boosting member"));
            }
            outer(Arc::new(Boosting::new(base, plan.size())))
        }
        EnsembleKind::Voting => outer(Arc::new(Voting {
            members: heterogeneous(at_est),
            mode: roster.voting,
        })),
        EnsembleKind::Stacking => {
            let members = heterogeneous(at_est && plan.mitigate_base);
            let final_est = match (&cfg, at_est && plan.mitigate_final) {
                (Some(c), true) => mitigate(shared(&roster.final_estimator), c),
                _ => shared(&roster.final_estimator),
            };
            outer(Arc::new(Stacking::new(
                members,
                final_est,
                plan.passthrough,
            )))
        }
    };
    Ok(Pipeline {
        plan: plan.clone(),
        learner,
    })
}

/// A fitted pipeline.
#[derive(Debug)]
pub struct TrainedPipeline {
    pub notation: String,
    pub model: Box<dyn Model>,
}

impl Pipeline {
    pub fn fit(
        &self,
        x: &Matrix,
        y: &[bool],
        weights: &[f64],
        protected: &Protected,
        seed: u64,
    ) -> Result<TrainedPipeline> {
        let ctx = FitContext { protected, seed };
        let model = self
            .learner
            .fit(FitInput::new(x, y, weights)?, &ctx)
            .map_err(|e| e.in_stage(self.plan.notation()))?;
        Ok(TrainedPipeline {
            notation: self.plan.notation(),
            model,
        })
    }
}

impl TrainedPipeline {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<bool>> {
        self.model.predict(x)
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<Proba>> {
        self.model.predict_proba(x)
    }

    /// Number of mitigator fits inside the trained pipeline.
    pub fn mitigator_fits(&self) -> usize {
        self.model.mitigator_fits()
    }
}

/// The homogeneous ensemble sizes and stacking variants of the main grid for
/// one mitigator kind, using `config` when given.
pub fn grid_plans(
    kind: MitigatorKind,
    config: Option<&MitigatorConfig>,
    bagging: &[usize],
    boosting: &[usize],
) -> Vec<MitigationPlan> {
    let mut out = Vec::new();
    let with = |p: MitigationPlan| match config {
        Some(c) => p.with_config(c.clone()),
        None => p,
    };
    let levels: &[Level] = match kind {
        MitigatorKind::None | MitigatorKind::In => &[Level::Estimator],
        _ => &[Level::Estimator, Level::Ensemble],
    };
    out.push(with(MitigationPlan::new(
        EnsembleKind::None,
        kind,
        Level::Estimator,
    )));
    for (e, sizes) in [
        (EnsembleKind::Bagging, bagging),
        (EnsembleKind::Boosting, boosting),
    ] {
        for &level in levels {
            for &n in sizes {
                out.push(with(MitigationPlan::new(e, kind, level).with_n(n)));
            }
        }
    }
    for &level in levels {
        out.push(with(MitigationPlan::new(EnsembleKind::Voting, kind, level)));
    }
    for cell in accepted_cells() {
        if cell.ensemble == EnsembleKind::Stacking && cell.mitigator == kind {
            out.push(with(cell));
        }
    }
    out.retain(|p| validate_plan(p).is_ok());
    out
}
