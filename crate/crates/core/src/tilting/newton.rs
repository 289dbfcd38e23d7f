//! Damped Newton for smooth convex objectives over a tilting domain.

use super::family::TiltFamily;
use nalgebra::{DMatrix, DVector};

pub(crate) struct NewtonOut {
    pub theta: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) type Eval = (f64, Vec<f64>, DMatrix<f64>);

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn solve_psd(h: &DMatrix<f64>, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let rhs = DVector::from_iterator(k, g.iter().map(|x| -x));
    let scale = (0..k).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..40 {
        let m = h + DMatrix::identity(k, k) * ridge;
        if let Some(c) = m.cholesky() {
            let x = c.solve(&rhs);
            if x.iter().all(|v| v.is_finite()) {
                return x.iter().copied().collect();
            }
        }
        ridge = if ridge == 0.0 { 1e-12 * scale } else { ridge * 10.0 };
    }
    // steepest descent as a last resort
    g.iter().map(|x| -x / scale).collect()
}

/// Minimize `eval` starting at `theta0`. `eval` returns None outside the domain.
/// Steps are capped at 0.95 of the distance to the domain boundary and backtracked
/// until the Armijo condition holds.
pub(crate) fn damped_newton<F>(family: &TiltFamily, eval: F, theta0: &[f64], tol: f64, max_iters: usize) -> NewtonOut
where
    F: Fn(&[f64]) -> Option<Eval>,
{
    let mut theta = theta0.to_vec();
    let Some(mut cur) = eval(&theta) else {
        return NewtonOut { theta, value: f64::NAN, grad_norm: f64::NAN, iterations: 0, converged: false };
    };
    let mut iters = 0;
    loop {
        let gn = norm(&cur.1);
        if gn <= tol {
            return NewtonOut { theta, value: cur.0, grad_norm: gn, iterations: iters, converged: true };
        }
        if iters >= max_iters {
            return NewtonOut { theta, value: cur.0, grad_norm: gn, iterations: iters, converged: false };
        }
        iters += 1;
        let dir = solve_psd(&cur.2, &cur.1);
        let slope: f64 = dir.iter().zip(&cur.1).map(|(a, b)| a * b).sum();
        let mut alpha = (0.95 * family.max_step(&theta, &dir)).min(1.0);
        let slack = 1e-13 * (1.0 + cur.0.abs());
        let mut accepted = None;
        for _ in 0..80 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + alpha * d).collect();
            if let Some(e) = eval(&cand) {
                if e.0 <= cur.0 + 1e-4 * alpha * slope + slack {
                    accepted = Some((cand, e));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((t, e)) => {
                let moved = t.iter().zip(&theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                theta = t;
                cur = e;
                if moved == 0.0 {
                    let gn = norm(&cur.1);
                    return NewtonOut { theta, value: cur.0, grad_norm: gn, iterations: iters, converged: gn <= tol };
                }
            }
            None => {
                return NewtonOut { theta, value: cur.0, grad_norm: gn, iterations: iters, converged: false };
            }
        }
    }
}
