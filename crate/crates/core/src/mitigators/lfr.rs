//! Learned fair representations: prototypes with softmax assignments,
//! trained on reconstruction, prediction and group-parity losses.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::optim::{self, DescentOptions};
use crate::rng;

const EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LfrConfig {
    pub k: usize,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LfrConfig {
    fn default() -> Self {
        LfrConfig {
            k: 5,
            ax: 0.01,
            ay: 1.0,
            az: 50.0,
            max_iter: 3000,
            tol: 1e-6,
        }
    }
}

/// Training rows for the LFR objective.
#[derive(Debug, Clone, Copy)]
pub struct LfrData<'a> {
    pub x: &'a Matrix,
    pub y: &'a [bool],
    pub priv_mask: &'a [bool],
    pub weights: &'a [f64],
}

/// Fitted prototypes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lfr {
    /// `k × d` prototype locations.
    pub prototypes: Matrix,
    /// Label logit per prototype.
    pub omega: Vec<f64>,
    /// Log inverse temperature of the assignments.
    pub beta: f64,
    pub objective: f64,
    pub iterations: usize,
}

/// Parameters are laid out `[V (k·d, row-major), ω (k), β]`.
pub fn param_len(k: usize, d: usize) -> usize {
    k * d + k + 1
}

/// Soft assignments `M = softmax(−e^β‖x − v‖²)` of one row, plus the
/// logits `a`.
fn assign(row: &[f64], v: &[f64], k: usize, beta: f64, m: &mut [f64], a: &mut [f64]) {
    let d = row.len();
    let scale = math::exp(beta);
    let mut max = f64::NEG_INFINITY;
    for c in 0..k {
        let dist: f64 = row
            .iter()
            .zip(&v[c * d..(c + 1) * d])
            .map(|(x, p)| (x - p) * (x - p))
            .sum();
        a[c] = -scale * dist;
        max = max.max(a[c]);
    }
    let mut z = 0.0;
    for c in 0..k {
        m[c] = math::exp(a[c] - max);
        z += m[c];
    }
    m.iter_mut().take(k).for_each(|v| *v /= z);
}

/// Value of `J = Ax·Lx + Ay·Ly + Az·Lz` and its gradient.
pub fn objective(cfg: &LfrConfig, data: &LfrData<'_>, params: &[f64], grad: &mut [f64]) -> f64 {
    let (n, d, k) = (data.x.n_rows(), data.x.n_cols(), cfg.k);
    let v = &params[..k * d];
    let omega = &params[k * d..k * d + k];
    let beta = params[k * d + k];
    let scale = math::exp(beta);
    grad.iter_mut().for_each(|g| *g = 0.0);

    let total: f64 = data.weights.iter().sum();
    let mass = [0usize, 1].map(|g| {
        (0..n)
            .filter(|&i| data.priv_mask[i] == (g == 1))
            .map(|i| data.weights[i])
            .sum::<f64>()
    });
    let sig: Vec<f64> = omega.iter().map(|w| math::sigmoid(*w)).collect();

    let mut m = vec![0.0; n * k];
    let mut a = vec![0.0; n * k];
    for i in 0..n {
        assign(
            data.x.row(i),
            v,
            k,
            beta,
            &mut m[i * k..(i + 1) * k],
            &mut a[i * k..(i + 1) * k],
        );
    }
    // group mean assignments for Lz
    let mut group_mean = [vec![0.0; k], vec![0.0; k]];
    for i in 0..n {
        let g = data.priv_mask[i] as usize;
        for c in 0..k {
            group_mean[g][c] += data.weights[i] / mass[g] * m[i * k + c];
        }
    }
    let sign: Vec<f64> = (0..k)
        .map(|c| {
            let diff = group_mean[1][c] - group_mean[0][c];
            if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .collect();
    let lz: f64 = (0..k)
        .map(|c| math::abs(group_mean[1][c] - group_mean[0][c]))
        .sum();

    let (mut lx, mut ly) = (0.0, 0.0);
    let mut xhat = vec![0.0; d];
    let mut dm = vec![0.0; k];
    let (gv, rest) = grad.split_at_mut(k * d);
    let (gw, gb) = rest.split_at_mut(k);
    for i in 0..n {
        let row = data.x.row(i);
        let u = data.weights[i] / total;
        let mi = &m[i * k..(i + 1) * k];
        xhat.iter_mut().for_each(|x| *x = 0.0);
        for c in 0..k {
            for j in 0..d {
                xhat[j] += mi[c] * v[c * d + j];
            }
        }
        let resid: Vec<f64> = row.iter().zip(&xhat).map(|(x, h)| x - h).collect();
        lx += u * math::dot(&resid, &resid);
        let p: f64 = mi.iter().zip(&sig).map(|(a, b)| a * b).sum();
        let yhat = EPS + (1.0 - 2.0 * EPS) * p;
        let yv = if data.y[i] { 1.0 } else { 0.0 };
        ly -= u * (yv * math::ln(yhat) + (1.0 - yv) * math::ln(1.0 - yhat));
        let dy = -u * (yv / yhat - (1.0 - yv) / (1.0 - yhat)) * cfg.ay * (1.0 - 2.0 * EPS);
        let g = data.priv_mask[i] as usize;
        let zcoef = if g == 1 {
            data.weights[i] / mass[1]
        } else {
            -data.weights[i] / mass[0]
        };

        for c in 0..k {
            let vc = &v[c * d..(c + 1) * d];
            // dJ/dM through reconstruction, prediction and parity
            dm[c] =
                -2.0 * u * cfg.ax * math::dot(&resid, vc) + dy * sig[c] + cfg.az * sign[c] * zcoef;
            // explicit reconstruction path to the prototypes
            for j in 0..d {
                gv[c * d + j] += -2.0 * u * cfg.ax * mi[c] * resid[j];
            }
            gw[c] += dy * mi[c] * sig[c] * (1.0 - sig[c]);
        }
        // softmax backprop to the logits
        let mean_dm: f64 = mi.iter().zip(&dm).map(|(a, b)| a * b).sum();
        for c in 0..k {
            let da = mi[c] * (dm[c] - mean_dm);
            gb[0] += da * a[i * k + c];
            let vc = &v[c * d..(c + 1) * d];
            for j in 0..d {
                gv[c * d + j] += da * 2.0 * scale * (row[j] - vc[j]);
            }
        }
    }
    cfg.ax * lx + cfg.ay * ly + cfg.az * lz
}

impl Lfr {
    /// Seeded starting point: prototypes at random training rows, small
    /// label logits, and a temperature matched to the typical distance.
    pub fn initial_params(cfg: &LfrConfig, x: &Matrix, seed: u64) -> Vec<f64> {
        let (n, d, k) = (x.n_rows(), x.n_cols(), cfg.k);
        let mut r = rng::seeded(seed);
        let mut params = Vec::with_capacity(param_len(k, d));
        for _ in 0..k {
            let row = x.row(r.random_range(0..n));
            params.extend(row.iter().map(|v| v + 0.01 * rng::normal(&mut r)));
        }
        params.extend((0..k).map(|_| r.random_range(-0.1..0.1)));
        let mut spread = 0.0;
        for _ in 0..n.min(64) {
            let (p, q) = (x.row(r.random_range(0..n)), x.row(r.random_range(0..n)));
            spread += p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        spread /= n.min(64) as f64;
        params.push(-math::ln(spread.max(1e-3)));
        params
    }

    pub fn fit(cfg: &LfrConfig, data: LfrData<'_>, seed: u64) -> Result<Self> {
        if cfg.k < 2 {
            return Err(Error::Config("LFR needs at least 2 prototypes".into()));
        }
        if data.priv_mask.iter().all(|&p| p) || !data.priv_mask.iter().any(|&p| p) {
            return Err(Error::DegenerateGroup("LFR needs both groups".into()));
        }
        let d = data.x.n_cols();
        let x0 = Self::initial_params(cfg, data.x, seed);
        let m = optim::gradient_descent(
            |p, g| objective(cfg, &data, p, g),
            x0,
            DescentOptions {
                max_iter: cfg.max_iter,
                tol: cfg.tol,
            },
        )?;
        if !m.converged {
            log::warn!(
                "LFR returned its best iterate after {} iterations",
                m.iterations
            );
        }
        Ok(Lfr {
            prototypes: Matrix::new(cfg.k, d, m.x[..cfg.k * d].to_vec())?,
            omega: m.x[cfg.k * d..cfg.k * d + cfg.k].to_vec(),
            beta: m.x[cfg.k * d + cfg.k],
            objective: m.value,
            iterations: m.iterations,
        })
    }

    /// Soft assignments of each row (rows sum to 1).
    pub fn assignments(&self, x: &Matrix) -> Result<Matrix> {
        x.check_cols(self.prototypes.n_cols())?;
        let k = self.prototypes.n_rows();
        let mut out = Matrix::zeros(x.n_rows(), k);
        let mut a = vec![0.0; k];
        for i in 0..x.n_rows() {
            assign(
                x.row(i),
                self.prototypes.as_slice(),
                k,
                self.beta,
                out.row_mut(i),
                &mut a,
            );
        }
        Ok(out)
    }

    /// Reconstructed features `M·V`.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        let m = self.assignments(x)?;
        let (k, d) = (self.prototypes.n_rows(), self.prototypes.n_cols());
        let mut out = Matrix::zeros(x.n_rows(), d);
        for i in 0..x.n_rows() {
            let mi = m.row(i);
            let o = out.row_mut(i);
            for (c, &a) in mi.iter().enumerate().take(k) {
                for (oj, &v) in o.iter_mut().zip(self.prototypes.row(c)) {
                    *oj += a * v;
                }
            }
        }
        Ok(out)
    }

    /// Prototype-weighted favorable probability.
    pub fn predict_label_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        let m = self.assignments(x)?;
        Ok(m.rows()
            .map(|r| {
                r.iter()
                    .zip(&self.omega)
                    .map(|(a, w)| a * math::sigmoid(*w))
                    .sum()
            })
            .collect())
    }
}
