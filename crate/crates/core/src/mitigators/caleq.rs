//! Calibrated equalized-odds post-processing.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostConstraint {
    Fpr,
    Fnr,
    #[default]
    Weighted,
}

impl CostConstraint {
    /// `(fp weight, fn weight)`.
    pub fn rates(self) -> (f64, f64) {
        match self {
            CostConstraint::Fpr => (1.0, 0.0),
            CostConstraint::Fnr => (0.0, 1.0),
            CostConstraint::Weighted => (1.0, 1.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CostConstraint::Fpr => "fpr",
            CostConstraint::Fnr => "fnr",
            CostConstraint::Weighted => "weighted",
        }
    }
}

fn group_name(privileged: bool) -> &'static str {
    if privileged {
        "privileged"
    } else {
        "unprivileged"
    }
}

/// Generalized cost of favorable-probability `scores` for one group:
/// `fp·GFPR·(1 − br) + fn·GFNR·br`, normalized by `fp + fn` when both
/// weights are nonzero.
pub fn group_cost(
    constraint: CostConstraint,
    scores: &[f64],
    y: &[bool],
    priv_mask: &[bool],
    weights: &[f64],
    privileged: bool,
) -> Result<f64> {
    let (fp, fnr) = constraint.rates();
    let (mut neg, mut pos, mut neg_score, mut pos_miss) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..scores.len() {
        if priv_mask[i] != privileged {
            continue;
        }
        if y[i] {
            pos += weights[i];
            pos_miss += weights[i] * (1.0 - scores[i]);
        } else {
            neg += weights[i];
            neg_score += weights[i] * scores[i];
        }
    }
    if fp != 0.0 && neg <= 0.0 {
        return Err(Error::UndefinedCost(format!(
            "({}, unfavorable)",
            group_name(privileged)
        )));
    }
    if fnr != 0.0 && pos <= 0.0 {
        return Err(Error::UndefinedCost(format!(
            "({}, favorable)",
            group_name(privileged)
        )));
    }
    let br = pos / (pos + neg);
    let norm = if fp != 0.0 && fnr != 0.0 {
        fp + fnr
    } else {
        1.0
    };
    let gfpr = if neg > 0.0 { neg_score / neg } else { 0.0 };
    let gfnr = if pos > 0.0 { pos_miss / pos } else { 0.0 };
    Ok(fp / norm * gfpr * (1.0 - br) + fnr / norm * gfnr * br)
}

/// Cost of the trivial classifier that scores every row at the group's
/// base rate.
fn trivial_cost(constraint: CostConstraint, br: f64) -> f64 {
    let (fp, fnr) = constraint.rates();
    let norm = if fp != 0.0 && fnr != 0.0 {
        fp + fnr
    } else {
        1.0
    };
    fp / norm * br * (1.0 - br) + fnr / norm * (1.0 - br) * br
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedEqOdds {
    pub cost_constraint: CostConstraint,
    /// Base rates indexed `[unprivileged, privileged]`.
    pub base_rate: [f64; 2],
    /// Mixing probabilities indexed like `base_rate`; at most one is nonzero.
    pub mix_rate: [f64; 2],
    pub seed: u64,
}

impl CalibratedEqOdds {
    /// Fits mixing rates from upstream favorable probabilities on a holdout.
    pub fn fit(
        constraint: CostConstraint,
        scores: &[f64],
        y: &[bool],
        priv_mask: &[bool],
        weights: &[f64],
        seed: u64,
    ) -> Result<Self> {
        if priv_mask.iter().all(|&p| p) || !priv_mask.iter().any(|&p| p) {
            return Err(Error::DegenerateGroup("holdout needs both groups".into()));
        }
        let mut base_rate = [0.0; 2];
        for g in [false, true] {
            let (mut pos, mut all) = (0.0, 0.0);
            for i in 0..y.len() {
                if priv_mask[i] == g {
                    all += weights[i];
                    if y[i] {
                        pos += weights[i];
                    }
                }
            }
            base_rate[g as usize] = pos / all;
        }
        let cost = [
            group_cost(constraint, scores, y, priv_mask, weights, false)?,
            group_cost(constraint, scores, y, priv_mask, weights, true)?,
        ];
        let trivial = [
            trivial_cost(constraint, base_rate[0]),
            trivial_cost(constraint, base_rate[1]),
        ];
        let mut mix_rate = [0.0; 2];
        // the cheaper group is mixed toward its trivial classifier
        let (cheap, dear) = if cost[0] > cost[1] { (1, 0) } else { (0, 1) };
        let denom = trivial[cheap] - cost[cheap];
        if cost[dear] > cost[cheap] && denom > 0.0 {
            mix_rate[cheap] = ((cost[dear] - cost[cheap]) / denom).clamp(0.0, 1.0);
        }
        Ok(CalibratedEqOdds {
            cost_constraint: constraint,
            base_rate,
            mix_rate,
            seed,
        })
    }

    /// Expected score after mixing.
    pub fn adjust(&self, score: f64, privileged: bool) -> f64 {
        let g = privileged as usize;
        (1.0 - self.mix_rate[g]) * score + self.mix_rate[g] * self.base_rate[g]
    }

    /// Randomized variant: each row of the mixed group is replaced by its
    /// base rate with the mixing probability, then thresholded at 0.5.
    pub fn sample(&self, scores: &[f64], priv_mask: &[bool], seed: u64) -> Vec<bool> {
        let mut r = rng::seeded(rng::mix(self.seed, seed));
        scores
            .iter()
            .zip(priv_mask)
            .map(|(&s, &p)| {
                let g = p as usize;
                let s = if r.random::<f64>() < self.mix_rate[g] {
                    self.base_rate[g]
                } else {
                    s
                };
                s >= 0.5
            })
            .collect()
    }
}
