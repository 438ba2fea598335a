//! CART-style binary decision tree with weighted impurity.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::any::Any;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::model::{Capabilities, ConstantModel, FitContext, FitInput, Learner, Model, Proba};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
}

impl Criterion {
    /// Impurity of a node with class weights `(unfav, fav)`.
    fn impurity(self, neg: f64, pos: f64) -> f64 {
        let total = neg + pos;
        if total <= 0.0 {
            return 0.0;
        }
        let (p0, p1) = (neg / total, pos / total);
        match self {
            Criterion::Gini => 1.0 - p0 * p0 - p1 * p1,
            Criterion::Entropy => {
                let h = |p: f64| if p > 0.0 { -p * math::ln(p) } else { 0.0 };
                h(p0) + h(p1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecisionTree {
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub criterion: Criterion,
}

impl Default for DecisionTree {
    fn default() -> Self {
        DecisionTree {
            max_depth: None,
            min_samples_leaf: 1,
            criterion: Criterion::Gini,
        }
    }
}

impl DecisionTree {
    pub fn stump() -> Self {
        DecisionTree {
            max_depth: Some(1),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        proba: Proba,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub n_features: usize,
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl TreeModel {
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn leaf_for(&self, row: &[f64]) -> Proba {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { proba } => return proba,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }
}

impl Model for TreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Vec<Proba>> {
        x.check_cols(self.n_features)?;
        Ok(x.rows().map(|r| self.leaf_for(r)).collect())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    score: f64,
}

struct Builder<'a> {
    data: FitInput<'a>,
    params: &'a DecisionTree,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn class_weights(&self, idx: &[usize]) -> (f64, f64) {
        idx.iter().fold((0.0, 0.0), |(n, p), &i| {
            let w = self.data.weights[i];
            if self.data.y[i] {
                (n, p + w)
            } else {
                (n + w, p)
            }
        })
    }

    /// Best split by weighted child impurity. Features are scanned in
    /// ascending order and thresholds in ascending order; a candidate only
    /// replaces the incumbent when strictly better.
    fn best_split(&self, idx: &[usize]) -> Option<SplitChoice> {
        let min_leaf = self.params.min_samples_leaf.max(1);
        if idx.len() < 2 * min_leaf {
            return None;
        }
        let (neg, pos) = self.class_weights(idx);
        let mut best: Option<SplitChoice> = None;
        let mut order = idx.to_vec();
        for f in 0..self.data.x.n_cols() {
            let x = self.data.x;
            order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
            let (mut ln, mut lp) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let i = order[k];
                if self.data.y[i] {
                    lp += self.data.weights[i];
                } else {
                    ln += self.data.weights[i];
                }
                let (a, b) = (x.get(i, f), x.get(order[k + 1], f));
                if a == b || k + 1 < min_leaf || order.len() - k - 1 < min_leaf {
                    continue;
                }
                let (rn, rp) = (neg - ln, pos - lp);
                let score = (ln + lp) * self.params.criterion.impurity(ln, lp)
                    + (rn + rp) * self.params.criterion.impurity(rn, rp);
                let better = match &best {
                    None => true,
                    Some(b) => score < b.score - 1e-12 * (neg + pos),
                };
                if better {
                    let mut threshold = 0.5 * (a + b);
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(SplitChoice {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let (neg, pos) = self.class_weights(&idx);
        let id = self.nodes.len();
        let total = neg + pos;
        let proba = if total > 0.0 {
            [neg / total, pos / total]
        } else {
            [0.5, 0.5]
        };
        self.nodes.push(Node::Leaf { proba });
        let pure = neg <= 0.0 || pos <= 0.0;
        if pure || self.params.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let Some(split) = self.best_split(&idx) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.data.x.get(i, split.feature) <= split.threshold);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        id
    }
}

impl Learner for DecisionTree {
    fn notation(&self) -> String {
        "tree".into()
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
        if data.weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidInput("sample weights sum to zero".into()));
        }
        Ok(Box::new(self.fit_tree(data)))
    }
}

impl DecisionTree {
    pub fn fit_tree(&self, data: FitInput<'_>) -> TreeModel {
        let mut b = Builder {
            data,
            params: self,
            nodes: Vec::new(),
        };
        b.grow((0..data.n_rows()).collect(), 0);
        TreeModel {
            n_features: data.x.n_cols(),
            nodes: b.nodes,
        }
    }
}
