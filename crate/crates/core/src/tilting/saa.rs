//! Sample-average approximation of the second moment G(θ) and its minimization.

use super::family::{TiltFamily, TiltKind};
use super::newton::{damped_newton, Eval};
use super::scheme::Scheme;
use super::{SolveMethod, TiltSolution};
use crate::copulas::{Direction, Model, PreparedEvent};
use crate::error::{domain, Error, Result};
use crate::randkit::RngStream;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PilotConfig {
    pub n_pilot: usize,
    pub min_hits: usize,
    /// stop when ‖∇ ln Ĝ‖ falls below this
    pub tol: f64,
    pub max_iters: usize,
    /// extra SAA rounds, each re-drawing the pilot at the previous solution
    pub refine_rounds: usize,
    pub elite_frac: f64,
    pub max_levels: usize,
}

impl Default for PilotConfig {
    fn default() -> Self {
        PilotConfig { n_pilot: 20_000, min_hits: 200, tol: 1e-6, max_iters: 100, refine_rounds: 1, elite_frac: 0.1, max_levels: 40 }
    }
}

/// Event hits of a batch of draws from Q_θ̂: their statistics and log dP/dQ_θ̂.
#[derive(Clone, Debug)]
pub struct Pilot {
    k: usize,
    n: usize,
    stats: Vec<f64>,
    log_lr: Vec<f64>,
}

impl Pilot {
    /// `stats` holds one row of length k per hit; `n` counts all draws, hits or not.
    pub fn from_parts(k: usize, n: usize, stats: Vec<f64>, log_lr: Vec<f64>) -> Result<Self> {
        if k == 0 || stats.len() != k * log_lr.len() || log_lr.len() > n {
            return Err(Error::Shape("pilot rows do not match its dimension".into()));
        }
        Ok(Pilot { k, n, stats, log_lr })
    }

    /// n draws from Q_θ under `scheme`, keeping the hits.
    pub fn draw(scheme: &Scheme, theta: &[f64], n: usize, s: &mut RngStream) -> Result<Self> {
        let pt = scheme.family().prepare(theta)?;
        let mut ws = scheme.workspace();
        let k = scheme.family().theta_dim();
        let (mut stats, mut log_lr) = (Vec::new(), Vec::new());
        for _ in 0..n {
            let (hit, l) = scheme.draw(s, &pt, &mut ws, false);
            if hit {
                stats.extend_from_slice(&ws.stat);
                log_lr.push(l);
            }
        }
        Ok(Pilot { k, n, stats, log_lr })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn hits(&self) -> usize {
        self.log_lr.len()
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.stats[i * self.k..(i + 1) * self.k]
    }

    /// ln Ĝ(θ) with gradient and Hessian; None outside Θ.
    pub(crate) fn log_g_eval(&self, family: &TiltFamily, theta: &[f64]) -> Option<Eval> {
        if !family.in_domain(theta) || self.hits() == 0 {
            return None;
        }
        let k = self.k;
        let t: Vec<f64> = (0..self.hits())
            .map(|i| self.log_lr[i] - self.row(i).iter().zip(theta).map(|(v, th)| v * th).sum::<f64>())
            .collect();
        let m = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = t.iter().map(|x| (x - m).exp()).collect();
        let sw: f64 = w.iter().sum();
        let mut mean = vec![0.0; k];
        for (i, wi) in w.iter().enumerate() {
            for (a, v) in mean.iter_mut().zip(self.row(i)) {
                *a += wi * v;
            }
        }
        mean.iter_mut().for_each(|a| *a /= sw);
        let mut cov = DMatrix::zeros(k, k);
        for (i, wi) in w.iter().enumerate() {
            let r = self.row(i);
            for a in 0..k {
                let da = r[a] - mean[a];
                for b in 0..=a {
                    cov[(a, b)] += wi * da * (r[b] - mean[b]);
                }
            }
        }
        for a in 0..k {
            for b in 0..=a {
                let c = cov[(a, b)] / sw;
                cov[(a, b)] = c;
                cov[(b, a)] = c;
            }
        }
        let psi = family.psi(theta).ok()?;
        let value = psi + m + sw.ln() - (self.n as f64).ln();
        let g: Vec<f64> = family.grad_psi(theta).ok()?.iter().zip(&mean).map(|(a, b)| a - b).collect();
        let h = family.hess_psi(theta).ok()? + cov;
        if !value.is_finite() {
            return None;
        }
        Some((value, g, h))
    }
}

/// Sample-average second moment (1/N) Σ 1{A} e^{ℓ_k − θ′V_k + ψ(θ)}.
pub fn g_hat(family: &TiltFamily, theta: &[f64], pilot: &Pilot) -> Result<f64> {
    if pilot.size() == 0 || pilot.hits() == 0 {
        return Err(Error::DegeneratePilot("pilot contains no event hits".into()));
    }
    if pilot.dim() != family.theta_dim() {
        return Err(Error::Shape("pilot statistic dimension does not match the family".into()));
    }
    family.psi(theta)?;
    Ok(pilot.log_g_eval(family, theta).map(|e| e.0.exp()).unwrap_or(f64::INFINITY))
}

/// ln Ĝ(θ) with its gradient and Hessian.
pub fn log_g_hat_derivatives(family: &TiltFamily, theta: &[f64], pilot: &Pilot) -> Result<(f64, Vec<f64>, DMatrix<f64>)> {
    g_hat(family, theta, pilot)?;
    pilot.log_g_eval(family, theta).ok_or_else(|| Error::Domain("ln Ĝ is not finite at this θ".into()))
}

/// Minimize ln Ĝ over Θ for a fixed pilot.
pub fn minimize_g_hat(family: &TiltFamily, pilot: &Pilot, theta0: &[f64], cfg: &PilotConfig) -> Result<TiltSolution> {
    if pilot.hits() == 0 {
        return Err(Error::DegeneratePilot("pilot contains no event hits".into()));
    }
    family.psi(theta0)?;
    let out = damped_newton(family, |t| pilot.log_g_eval(family, t), theta0, cfg.tol, cfg.max_iters);
    Ok(TiltSolution {
        theta: out.theta,
        g_hat: out.value.exp(),
        residual_norm: out.grad_norm,
        iterations: out.iterations,
        pilot_size: pilot.size(),
        pilot_hits: pilot.hits(),
        method: SolveMethod::Saa,
        converged: out.converged,
        reflected: false,
    })
}

/// θ with ∇ψ(θ) = m.
pub fn moment_match(family: &TiltFamily, m: &[f64], theta0: &[f64]) -> Result<Vec<f64>> {
    let tol = 1e-10 * (1.0 + m.iter().map(|x| x.abs()).fold(0.0, f64::max));
    let eval = |t: &[f64]| -> Option<Eval> {
        let psi = family.psi(t).ok()?;
        let g = family.grad_psi(t).ok()?;
        let v = psi - t.iter().zip(m).map(|(a, b)| a * b).sum::<f64>();
        let g: Vec<f64> = g.iter().zip(m).map(|(a, b)| a - b).collect();
        Some((v, g, family.hess_psi(t).ok()?))
    };
    let out = damped_newton(family, eval, theta0, tol, 200);
    if out.theta.iter().all(|x| x.is_finite()) && family.in_domain(&out.theta) {
        Ok(out.theta)
    } else {
        Err(Error::NonConvergence(format!("moment matching failed for target mean {m:?}")))
    }
}

struct Batch {
    k: usize,
    stats: Vec<f64>,
    log_lr: Vec<f64>,
    hit: Vec<bool>,
    score: Vec<f64>,
}

fn draw_batch(scheme: &Scheme, theta: &[f64], n: usize, s: &mut RngStream) -> Result<Batch> {
    let pt = scheme.family().prepare(theta)?;
    let mut ws = scheme.workspace();
    let k = scheme.family().theta_dim();
    let mut b = Batch { k, stats: Vec::with_capacity(n * k), log_lr: Vec::with_capacity(n), hit: Vec::with_capacity(n), score: Vec::with_capacity(n) };
    for _ in 0..n {
        let (hit, l) = scheme.draw(s, &pt, &mut ws, true);
        b.stats.extend_from_slice(&ws.stat);
        b.log_lr.push(l);
        b.hit.push(hit);
        b.score.push(scheme.score(&ws));
    }
    Ok(b)
}

fn weighted_mean(b: &Batch, keep: impl Fn(usize) -> bool) -> Vec<f64> {
    let idx: Vec<usize> = (0..b.log_lr.len()).filter(|&i| keep(i)).collect();
    let m = idx.iter().map(|&i| b.log_lr[i]).fold(f64::NEG_INFINITY, f64::max);
    let mut out = vec![0.0; b.k];
    let mut sw = 0.0;
    for &i in &idx {
        let w = (b.log_lr[i] - m).exp();
        sw += w;
        for (o, v) in out.iter_mut().zip(&b.stats[i * b.k..(i + 1) * b.k]) {
            *o += w * v;
        }
    }
    out.iter_mut().for_each(|o| *o /= sw);
    out
}

/// Coarse tilt that makes the event common: moment matching on the event-conditional
/// mean, reached through elite levels of the corner score when the event is too rare.
pub fn pre_tilt(scheme: &Scheme, start: &[f64], cfg: &PilotConfig, s: &mut RngStream) -> Result<Vec<f64>> {
    let family = scheme.family();
    let mut theta = start.to_vec();
    let started_nonzero = theta.iter().any(|&t| t != 0.0);
    let n = cfg.n_pilot.max(10);
    for level in 0..cfg.max_levels {
        let b = draw_batch(scheme, &theta, n, s)?;
        let hits = b.hit.iter().filter(|&&h| h).count();
        if hits >= cfg.min_hits {
            if level == 0 && started_nonzero {
                return Ok(theta);
            }
            let m = weighted_mean(&b, |i| b.hit[i]);
            return moment_match(family, &m, &theta);
        }
        if !scheme.event().is_corner() {
            return Err(Error::DegeneratePilot(format!(
                "{hits} of {n} pilot draws hit the event (need {}) and indicator events have no level score",
                cfg.min_hits
            )));
        }
        let mut sc = b.score.clone();
        sc.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let n_elite = ((cfg.elite_frac * n as f64).ceil() as usize).clamp(1, n);
        let gamma = sc[n_elite - 1].min(0.0);
        let m = weighted_mean(&b, |i| b.score[i] >= gamma);
        theta = moment_match(family, &m, &theta)?;
    }
    Err(Error::DegeneratePilot(format!("no proposal reached {} hits within {} levels", cfg.min_hits, cfg.max_levels)))
}

/// SAA solution for θ_o: pre-tilt, draw a pilot at the pre-tilt, minimize ln Ĝ by Newton,
/// then optionally re-draw the pilot at the solution and minimize again.
pub fn solve_theta_saa(scheme: &Scheme, cfg: &PilotConfig, s: &mut RngStream) -> Result<TiltSolution> {
    let family = scheme.family();
    let k = family.theta_dim();
    let mut start = vec![0.0; k];
    if family.kind() == TiltKind::TGammaNormal && family.a_star().iter().all(|&a| a > 0.0) {
        start = super::large_deviation::ld_theta(family)?;
    }
    let mut theta = pre_tilt(scheme, &start, cfg, s)?;
    let mut sol = None;
    for _ in 0..=cfg.refine_rounds {
        let pilot = Pilot::draw(scheme, &theta, cfg.n_pilot, s)?;
        if pilot.hits() < cfg.min_hits {
            return Err(Error::DegeneratePilot(format!(
                "pilot at θ = {theta:?} produced {} hits, need {}",
                pilot.hits(),
                cfg.min_hits
            )));
        }
        let r = minimize_g_hat(family, &pilot, &theta, cfg)?;
        theta = r.theta.clone();
        sol = Some(r);
    }
    let mut sol = sol.unwrap();
    sol.reflected = scheme.reflected();
    Ok(sol)
}

/// The optimality condition compared on an independent batch: the self-normalized
/// estimate of E_P[V e^{−θ′V} | A]/E_P[e^{−θ′V} | A] against ∇ψ(θ).
#[derive(Clone, Debug, Serialize)]
pub struct FocCheck {
    pub estimate: Vec<f64>,
    pub grad_psi: Vec<f64>,
    pub std_err: Vec<f64>,
    pub max_abs_z: f64,
    pub hits: usize,
}

pub fn first_order_check(scheme: &Scheme, theta: &[f64], n: usize, s: &mut RngStream) -> Result<FocCheck> {
    let family = scheme.family();
    let pilot = Pilot::draw(scheme, theta, n, s)?;
    if pilot.hits() < 2 {
        return Err(Error::DegeneratePilot("too few hits for the first-order check".into()));
    }
    let k = family.theta_dim();
    let lw: Vec<f64> = pilot.log_lr.iter().map(|l| 2.0 * l).collect();
    let m = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|x| (x - m).exp()).collect();
    let sw: f64 = w.iter().sum();
    let mut est = vec![0.0; k];
    for (i, wi) in w.iter().enumerate() {
        for (e, v) in est.iter_mut().zip(pilot.row(i)) {
            *e += wi * v / sw;
        }
    }
    let mut var = vec![0.0; k];
    for (i, wi) in w.iter().enumerate() {
        for (j, v) in pilot.row(i).iter().enumerate() {
            var[j] += (wi / sw).powi(2) * (v - est[j]).powi(2);
        }
    }
    let se: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
    let gp = family.grad_psi(theta)?;
    let max_abs_z = (0..k).map(|j| ((est[j] - gp[j]) / se[j]).abs()).fold(0.0, f64::max);
    Ok(FocCheck { estimate: est, grad_psi: gp, std_err: se, max_abs_z, hits: pilot.hits() })
}

/// Scalar hazard-rate tilt by SAA, restricted to [0, 1).
pub fn solve_hrt_theta(model: &Model, event: &PreparedEvent, cfg: &PilotConfig, s: &mut RngStream) -> Result<TiltSolution> {
    let scheme = Scheme::new(model.clone(), event.clone(), TiltKind::HazardRate)?;
    let mut sol = solve_theta_saa(&scheme, cfg, s)?;
    if sol.theta[0] < 0.0 {
        sol.theta[0] = 0.0;
    }
    Ok(sol)
}

/// The asymptotic hazard-rate rule θ = 1 − d / min_{v∈A} Σ −ln(1 − v_i), with the minimum
/// taken at the corner's image under the forward conditional transform.
pub fn hrt_theta_asymptotic(model: &Model, event: &PreparedEvent) -> Result<TiltSolution> {
    if !event.is_corner() || event.always {
        return domain("the asymptotic hazard-rate rule needs a corner event");
    }
    let d = model.dim();
    let u: Vec<f64> = event.thr.iter().map(|&t| model.latent_cdf(t)).collect();
    let v = model.rosenblatt_forward(&u)?;
    let h: f64 = v
        .iter()
        .map(|&vi| match event.direction {
            Direction::Upper => -(-vi).ln_1p(),
            Direction::Lower => -vi.ln(),
        })
        .sum();
    let theta = (1.0 - d as f64 / h).max(0.0);
    Ok(TiltSolution {
        theta: vec![theta],
        g_hat: f64::NAN,
        residual_norm: 0.0,
        iterations: 0,
        pilot_size: 0,
        pilot_hits: 0,
        method: SolveMethod::Asymptotic,
        converged: true,
        reflected: event.direction == Direction::Lower,
    })
}
