use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learned weight table `w(g, c)`, indexed `[privileged][favorable]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reweighing {
    pub table: [[f64; 2]; 2],
}

impl Reweighing {
    /// Fits `w(g,c) = P(g)·P(c) / P(g,c)` from weighted frequencies.
    pub fn fit(priv_mask: &[bool], fav: &[bool], weights: &[f64]) -> Result<Self> {
        let mut cell = [[0.0; 2]; 2];
        for ((&g, &c), &w) in priv_mask.iter().zip(fav).zip(weights) {
            cell[g as usize][c as usize] += w;
        }
        let total: f64 = cell.iter().flatten().sum();
        let mut table = [[0.0; 2]; 2];
        for g in 0..2 {
            for c in 0..2 {
                if cell[g][c] <= 0.0 {
                    return Err(Error::DegenerateCell(format!(
                        "({}, {})",
                        if g == 1 { "privileged" } else { "unprivileged" },
                        if c == 1 { "favorable" } else { "unfavorable" }
                    )));
                }
                let pg = (cell[g][0] + cell[g][1]) / total;
                let pc = (cell[0][c] + cell[1][c]) / total;
                table[g][c] = pg * pc / (cell[g][c] / total);
            }
        }
        Ok(Reweighing { table })
    }

    pub fn weight(&self, privileged: bool, favorable: bool) -> f64 {
        self.table[privileged as usize][favorable as usize]
    }

    /// Input weights multiplied by the learned cell weights.
    pub fn apply(&self, priv_mask: &[bool], fav: &[bool], weights: &[f64]) -> Vec<f64> {
        priv_mask
            .iter()
            .zip(fav)
            .zip(weights)
            .map(|((&g, &c), &w)| w * self.weight(g, c))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    #[test]
    fn independent_data_gets_unit_weights() {
        let g = vec![true, true, false, false];
        let c = vec![true, false, true, false];
        let r = Reweighing::fit(&g, &c, &[1.0; 4]).unwrap();
        assert_eq!(r.table, [[1.0; 2]; 2]);
    }

    #[test]
    fn closed_form_cell() {
        // P(priv)=0.5, P(fav)=0.5, P(priv,fav)=0.375
        let mut g = vec![true; 4];
        g.extend(vec![false; 4]);
        let c = vec![true, true, true, false, true, false, false, false];
        let r = Reweighing::fit(&g, &c, &[1.0; 8]).unwrap();
        assert!((r.weight(true, true) - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.weight(false, true) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn empty_cell_is_an_error() {
        let r = Reweighing::fit(&[true, false], &[true, true], &[1.0, 1.0]);
        assert!(matches!(r, Err(Error::DegenerateCell(_))));
    }

    proptest! {
        #[test]
        fn weights_make_group_and_class_independent(
            rows in prop::collection::vec((any::<bool>(), any::<bool>(), 0.1..3.0f64), 8..60)
        ) {
            let g: Vec<bool> = rows.iter().map(|r| r.0).collect();
            let c: Vec<bool> = rows.iter().map(|r| r.1).collect();
            let w: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let Ok(r) = Reweighing::fit(&g, &c, &w) else { return Ok(()) };
            let nw = r.apply(&g, &c, &w);
            let total: f64 = w.iter().sum();
            let new_total: f64 = nw.iter().sum();
            prop_assert!((new_total - total).abs() <= 1e-9 * total);
            for gv in [false, true] {
                for cv in [false, true] {
                    let pg: f64 = (0..g.len()).filter(|&i| g[i] == gv).map(|i| w[i]).sum::<f64>() / total;
                    let pc: f64 = (0..g.len()).filter(|&i| c[i] == cv).map(|i| w[i]).sum::<f64>() / total;
                    let got: f64 = (0..g.len()).filter(|&i| g[i] == gv && c[i] == cv).map(|i| nw[i]).sum::<f64>() / new_total;
                    prop_assert!((got - pg * pc).abs() <= 1e-9);
                }
            }
        }
    }
}
