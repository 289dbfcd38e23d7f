//! Deterministic Gaussian-copula tilt from truncated normal first moments.

use super::family::TiltFamily;
use super::newton::{damped_newton, Eval};
use super::{SolveMethod, TiltSolution};
use crate::copulas::Direction;
use crate::error::{Error, Result};
use crate::oracle::mvn_sf;
use crate::randkit::special::norm_pdf;
use nalgebra::DMatrix;

/// T̃_q = f_q(c_q) P(X₋q > c₋q | X_q = c_q) / P(X > c) and P(X > c), for X ~ MN(0, Σ).
fn tallis_terms(sigma: &DMatrix<f64>, c: &[f64]) -> Result<(Vec<f64>, f64)> {
    let d = c.len();
    let zero = vec![0.0; d];
    let tail = mvn_sf(&zero, sigma, c)?;
    let mut t = vec![0.0; d];
    for q in 0..d {
        let sq = sigma[(q, q)].sqrt();
        let dens = norm_pdf(c[q] / sq) / sq;
        let idx: Vec<usize> = (0..d).filter(|&i| i != q).collect();
        let cond = if idx.is_empty() {
            1.0
        } else {
            let m = idx.len();
            let mean: Vec<f64> = idx.iter().map(|&i| sigma[(i, q)] / sigma[(q, q)] * c[q]).collect();
            let cov = DMatrix::from_fn(m, m, |a, b| {
                sigma[(idx[a], idx[b])] - sigma[(idx[a], q)] * sigma[(q, idx[b])] / sigma[(q, q)]
            });
            let thr: Vec<f64> = idx.iter().map(|&i| c[i]).collect();
            mvn_sf(&mean, &cov, &thr)?
        };
        t[q] = dens * cond / tail;
    }
    Ok((t, tail))
}

fn matvec(s: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..x.len()).map(|i| (0..x.len()).map(|j| s[(i, j)] * x[j]).sum()).collect()
}

/// E[V | V > lower] for V ~ MN(−Σθ, Σ).
pub fn truncated_mvn_first_moment(sigma: &DMatrix<f64>, lower: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    let d = lower.len();
    if sigma.nrows() != d || theta.len() != d {
        return Err(Error::Shape("Σ, thresholds and θ disagree in dimension".into()));
    }
    let st = matvec(sigma, theta);
    let c: Vec<f64> = lower.iter().zip(&st).map(|(a, b)| a + b).collect();
    let (t, tail) = tallis_terms(sigma, &c)?;
    if !(tail > 0.0) {
        return Err(Error::Domain("truncation region has zero probability".into()));
    }
    Ok(matvec(sigma, &t).iter().zip(&st).map(|(m, s)| m - s).collect())
}

/// ln G(θ) = θ′Σθ + ln Φ̄_d(a* + Σθ; Σ) and its gradient Σ(2θ − T̃).
fn log_g(sigma: &DMatrix<f64>, a: &[f64], theta: &[f64]) -> Option<(f64, Vec<f64>)> {
    let st = matvec(sigma, theta);
    let c: Vec<f64> = a.iter().zip(&st).map(|(x, y)| x + y).collect();
    let (t, tail) = tallis_terms(sigma, &c).ok()?;
    if !(tail > 0.0) {
        return None;
    }
    let q: f64 = theta.iter().zip(&st).map(|(x, y)| x * y).sum();
    let r: Vec<f64> = theta.iter().zip(&t).map(|(th, ti)| 2.0 * th - ti).collect();
    Some((q + tail.ln(), matvec(sigma, &r)))
}

/// Solve Σ T̃(a* + Σθ) = 2Σθ for an upper corner (lower corners by reflection).
pub fn solve_theta_gaussian_tallis(sigma: &DMatrix<f64>, a_star: &[f64], direction: Direction) -> Result<TiltSolution> {
    let d = a_star.len();
    let family = TiltFamily::mvn_shift(sigma.clone())?;
    if d != family.theta_dim() {
        return Err(Error::Shape("a* and Σ disagree in dimension".into()));
    }
    let reflected = direction == Direction::Lower;
    let a: Vec<f64> = if reflected { a_star.iter().map(|x| -x).collect() } else { a_star.to_vec() };
    let eval = |th: &[f64]| -> Option<Eval> {
        let (v, g) = log_g(sigma, &a, th)?;
        let mut h = DMatrix::zeros(d, d);
        for j in 0..d {
            let e = 1e-5 * (1.0 + th[j].abs());
            let mut p = th.to_vec();
            let mut m = th.to_vec();
            p[j] += e;
            m[j] -= e;
            let gp = log_g(sigma, &a, &p)?.1;
            let gm = log_g(sigma, &a, &m)?.1;
            for i in 0..d {
                h[(i, j)] = (gp[i] - gm[i]) / (2.0 * e);
            }
        }
        let h = (&h + h.transpose()) * 0.5;
        Some((v, g, h))
    };
    let tol = 1e-8;
    let out = damped_newton(&family, eval, &vec![0.0; d], tol, 100);
    let (mut theta, mut value, mut res, mut conv) = (out.theta, out.value, out.grad_norm, out.converged);
    if !conv && exchangeable(sigma, &a) {
        // convex 1-d reduction along the diagonal
        let slope = |t: f64| log_g(sigma, &a, &vec![t; d]).map(|(_, g)| g.iter().sum::<f64>());
        let (mut lo, mut hi) = (-1.0, 1.0);
        while slope(lo).map_or(false, |s| s > 0.0) {
            lo *= 2.0;
        }
        while slope(hi).map_or(false, |s| s < 0.0) {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            match slope(m) {
                Some(s) if s < 0.0 => lo = m,
                _ => hi = m,
            }
        }
        let t = vec![0.5 * (lo + hi); d];
        if let Some((v, g)) = log_g(sigma, &a, &t) {
            theta = t;
            value = v;
            res = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            conv = res <= 1e-6;
        }
    }
    if reflected {
        theta.iter_mut().for_each(|t| *t = -*t);
    }
    Ok(TiltSolution {
        theta,
        g_hat: value.exp(),
        residual_norm: res,
        iterations: out.iterations,
        pilot_size: 0,
        pilot_hits: 0,
        method: SolveMethod::TallisNewton,
        converged: conv,
        reflected,
    })
}

fn exchangeable(sigma: &DMatrix<f64>, a: &[f64]) -> bool {
    let d = a.len();
    let off = if d > 1 { sigma[(0, 1)] } else { 0.0 };
    a.iter().all(|&x| x == a[0])
        && (0..d).all(|i| (0..d).all(|j| if i == j { sigma[(i, i)] == sigma[(0, 0)] } else { sigma[(i, j)] == off }))
}
