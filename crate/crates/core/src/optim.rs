//! Smooth unconstrained minimizers: L-BFGS and plain gradient descent,
//! both with Armijo backtracking.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    /// Stop when the gradient's max-norm falls below this.
    pub grad_tol: f64,
    pub memory: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iter: 1000,
            grad_tol: 1e-8,
            memory: 10,
        }
    }
}

fn inf_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |m, v| m.max(math::abs(*v)))
}

fn check_finite(value: f64, grad: &[f64], iteration: usize) -> Result<()> {
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Diverged {
            iteration,
            grad_norm: math::norm(grad),
        });
    }
    Ok(())
}

/// Backtracking search along `dir`. Returns the accepted step, new point,
/// value and gradient, or `None` when no decrease was found.
fn backtrack<F>(
    f: &mut F,
    x: &[f64],
    value: f64,
    grad: &[f64],
    dir: &[f64],
    mut step: f64,
) -> Option<(Vec<f64>, f64, Vec<f64>)>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let slope = math::dot(grad, dir);
    if slope >= 0.0 {
        return None;
    }
    let mut trial = vec![0.0; x.len()];
    let mut trial_grad = vec![0.0; x.len()];
    for _ in 0..60 {
        for i in 0..x.len() {
            trial[i] = x[i] + step * dir[i];
        }
        let v = f(&trial, &mut trial_grad);
        if v.is_finite() && v <= value + 1e-4 * step * slope {
            return Some((trial, v, trial_grad));
        }
        step *= 0.5;
    }
    None
}

/// Minimizes `f`, which returns the objective and writes its gradient.
pub fn lbfgs<F>(mut f: F, x0: Vec<f64>, opts: LbfgsOptions) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut grad = vec![0.0; n];
    let mut value = f(&x, &mut grad);
    check_finite(value, &grad, 0)?;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);

    for iteration in 0..opts.max_iter {
        if inf_norm(&grad) <= opts.grad_tol {
            return Ok(Minimum {
                x,
                value,
                iterations: iteration,
                converged: true,
            });
        }
        // two-loop recursion
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * math::dot(s, &q);
            for i in 0..n {
                q[i] -= a * y[i];
            }
            alphas.push(a);
        }
        let gamma = history
            .back()
            .map(|(s, y, _)| math::dot(s, y) / math::dot(y, y))
            .unwrap_or(1.0 / math::norm(&grad).max(1.0));
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * math::dot(y, &q);
            for i in 0..n {
                q[i] += s[i] * (a - b);
            }
        }
        let dir: Vec<f64> = q.iter().map(|v| -v).collect();

        let Some((next, next_value, next_grad)) = backtrack(&mut f, &x, value, &grad, &dir, 1.0)
        else {
            // no descent along the quasi-Newton direction; restart once from
            // steepest descent before giving up
            if history.is_empty() {
                return Ok(Minimum {
                    x,
                    value,
                    iterations: iteration,
                    converged: false,
                });
            }
            history.clear();
            continue;
        };
        check_finite(next_value, &next_grad, iteration + 1)?;
        let s: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = math::dot(&s, &y);
        if sy > 1e-12 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let improvement = value - next_value;
        x = next;
        value = next_value;
        grad = next_grad;
        if improvement <= f64::EPSILON * value.abs().max(1.0)
            && inf_norm(&grad) <= math::sqrt(opts.grad_tol)
        {
            return Ok(Minimum {
                x,
                value,
                iterations: iteration + 1,
                converged: true,
            });
        }
    }
    Ok(Minimum {
        x,
        value,
        iterations: opts.max_iter,
        converged: inf_norm(&grad) <= opts.grad_tol,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct DescentOptions {
    pub max_iter: usize,
    /// Stop when the objective changes by less than this between iterations.
    pub tol: f64,
}

/// Batch gradient descent with a backtracking line search. The step grows
/// after each accepted iteration and shrinks until the Armijo condition
/// holds.
pub fn gradient_descent<F>(mut f: F, x0: Vec<f64>, opts: DescentOptions) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut grad = vec![0.0; n];
    let mut value = f(&x, &mut grad);
    check_finite(value, &grad, 0)?;
    let mut step = 1.0;
    for iteration in 0..opts.max_iter {
        let dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        let Some((next, next_value, next_grad)) = backtrack(&mut f, &x, value, &grad, &dir, step)
        else {
            return Ok(Minimum {
                x,
                value,
                iterations: iteration,
                converged: true,
            });
        };
        check_finite(next_value, &next_grad, iteration + 1)?;
        let moved = math::norm(&next.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>());
        let gnorm = math::norm(&grad);
        if gnorm > 0.0 {
            step = 2.0 * moved / gnorm;
        }
        let change = value - next_value;
        x = next;
        value = next_value;
        grad = next_grad;
        if change.abs() < opts.tol {
            return Ok(Minimum {
                x,
                value,
                iterations: iteration + 1,
                converged: true,
            });
        }
    }
    log::warn!(
        "gradient descent stopped after {} iterations without converging",
        opts.max_iter
    );
    Ok(Minimum {
        x,
        value,
        iterations: opts.max_iter,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a)
    }

    #[test]
    fn lbfgs_finds_rosenbrock_minimum() {
        let m = lbfgs(rosenbrock, vec![-1.2, 1.0], LbfgsOptions::default()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-6, "{:?}", m);
        assert!((m.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn descent_on_a_quadratic() {
        let quad = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] - 3.0);
            g[1] = 8.0 * (x[1] + 1.0);
            (x[0] - 3.0) * (x[0] - 3.0) + 4.0 * (x[1] + 1.0) * (x[1] + 1.0)
        };
        let m = gradient_descent(
            quad,
            vec![0.0, 0.0],
            DescentOptions {
                max_iter: 3000,
                tol: 1e-14,
            },
        )
        .unwrap();
        assert!(
            (m.x[0] - 3.0).abs() < 1e-5 && (m.x[1] + 1.0).abs() < 1e-5,
            "{:?}",
            m
        );
    }

    #[test]
    fn non_finite_objective_is_divergence() {
        let bad = |_: &[f64], g: &mut [f64]| {
            g[0] = f64::NAN;
            f64::NAN
        };
        assert!(matches!(
            lbfgs(bad, vec![0.0], LbfgsOptions::default()),
            Err(Error::Diverged { iteration: 0, .. })
        ));
    }
}
