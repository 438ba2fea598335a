use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

/// Per-feature quantile maps of each group, repaired toward the median
/// quantile function across groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparateImpactRemover {
    pub repair_level: f64,
    /// Columns left untouched (the protected attributes).
    pub skip: Vec<usize>,
    /// `sorted[feature][group]`: training values of the group in ascending
    /// order, with group 0 unprivileged and 1 privileged.
    pub sorted: Vec<[Vec<f64>; 2]>,
}

impl DisparateImpactRemover {
    pub fn fit(
        x: &Matrix,
        priv_mask: &[bool],
        skip: Vec<usize>,
        repair_level: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&repair_level) {
            return Err(Error::Config(alloc::format!(
                "repair_level {repair_level} outside [0, 1]"
            )));
        }
        if priv_mask.iter().all(|&p| p) || !priv_mask.iter().any(|&p| p) {
            return Err(Error::DegenerateGroup("repair needs both groups".into()));
        }
        let sorted = (0..x.n_cols())
            .map(|j| {
                let mut groups = [Vec::new(), Vec::new()];
                for (i, row) in x.rows().enumerate() {
                    groups[priv_mask[i] as usize].push(row[j]);
                }
                for g in groups.iter_mut() {
                    g.sort_by(f64::total_cmp);
                }
                groups
            })
            .collect();
        Ok(DisparateImpactRemover {
            repair_level,
            skip,
            sorted,
        })
    }

    /// Quantile of `v` within a sorted group sample, `(#{< v} + 0.5) / n`.
    fn quantile(sorted: &[f64], v: f64) -> f64 {
        let below = sorted.partition_point(|&s| s < v);
        (below as f64 + 0.5) / sorted.len() as f64
    }

    fn inverse(sorted: &[f64], u: f64) -> f64 {
        let i = math::floor(u * sorted.len() as f64) as usize;
        sorted[i.min(sorted.len() - 1)]
    }

    /// Repaired value of `v` for a row in group `g` on feature `j`.
    pub fn repair(&self, j: usize, g: bool, v: f64) -> f64 {
        let groups = &self.sorted[j];
        let u = Self::quantile(&groups[g as usize], v);
        let targets: Vec<f64> = groups.iter().map(|s| Self::inverse(s, u)).collect();
        let target = math::median(&targets);
        (1.0 - self.repair_level) * v + self.repair_level * target
    }

    pub fn transform(&self, x: &Matrix, priv_mask: &[bool]) -> Result<Matrix> {
        x.check_cols(self.sorted.len())?;
        if priv_mask.len() != x.n_rows() {
            return Err(Error::Shape {
                expected: x.n_rows(),
                got: priv_mask.len(),
            });
        }
        let mut out = x.clone();
        if self.repair_level == 0.0 {
            return Ok(out);
        }
        for (i, &p) in priv_mask.iter().enumerate().take(x.n_rows()) {
            for j in 0..x.n_cols() {
                if self.skip.contains(&j) {
                    continue;
                }
                out.set(i, j, self.repair(j, p, x.get(i, j)));
            }
        }
        Ok(out)
    }
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max(math::abs(
            i as f64 / a.len() as f64 - j as f64 / b.len() as f64,
        ));
    }
    d
}
