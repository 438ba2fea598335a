//! Bagging, boosting, voting and stacking over any [`Learner`].

mod bagging;
mod boosting;
mod stacking;
mod voting;

pub use bagging::{Bagging, BaggingModel};
pub use boosting::{Boosting, BoostingModel};
pub use stacking::{Stacking, StackingModel};
pub use voting::{Voting, VotingMode, VotingModel};

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::Matrix;
use crate::model::{Model, Proba};

pub const BAGGING_SIZES: [usize; 5] = [1, 5, 10, 50, 100];
pub const BOOSTING_SIZES: [usize; 5] = [1, 10, 50, 100, 500];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    None,
    Bagging,
    Boosting,
    Voting,
    Stacking,
}

impl EnsembleKind {
    pub const ALL: [EnsembleKind; 5] = [
        EnsembleKind::None,
        EnsembleKind::Bagging,
        EnsembleKind::Boosting,
        EnsembleKind::Voting,
        EnsembleKind::Stacking,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleKind::None => "none",
            EnsembleKind::Bagging => "bagging",
            EnsembleKind::Boosting => "boosting",
            EnsembleKind::Voting => "voting",
            EnsembleKind::Stacking => "stacking",
        }
    }
}

/// Member probabilities, or one-hot votes for members without them.
pub fn member_proba(m: &dyn Model, x: &Matrix) -> Result<Vec<Proba>> {
    if m.supports_proba() {
        m.predict_proba(x)
    } else {
        Ok(m.predict(x)?
            .into_iter()
            .map(|l| if l { [0.0, 1.0] } else { [1.0, 0.0] })
            .collect())
    }
}
