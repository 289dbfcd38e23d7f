//! Exponential-tilting families: cumulant functions ψ, their derivatives, the domain Θ,
//! and samplers for Q_θ.

use crate::error::{domain, param, Error, Result};
use crate::randkit::samplers::{trunc_exp_mean, trunc_exp_quantile};
use crate::randkit::{GammaSampler, MvnFactor, RngStream};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiltKind {
    TruncExpProduct,
    MvnShift,
    TGammaNormal,
    ClaytonMo,
    HazardRate,
}

impl TiltKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "trunc-exp-product" | "trunc-exp" => TiltKind::TruncExpProduct,
            "mvn-shift" => TiltKind::MvnShift,
            "t-gamma-normal" => TiltKind::TGammaNormal,
            "clayton-mo" => TiltKind::ClaytonMo,
            "hazard-rate" => TiltKind::HazardRate,
            o => return Err(Error::Config(format!("unknown tilting family '{o}'"))),
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            TiltKind::TruncExpProduct => "trunc-exp-product",
            TiltKind::MvnShift => "mvn-shift",
            TiltKind::TGammaNormal => "t-gamma-normal",
            TiltKind::ClaytonMo => "clayton-mo",
            TiltKind::HazardRate => "hazard-rate",
        }
    }
}

/// ln((e^t − 1)/t)
#[inline]
pub fn psi1(t: f64) -> f64 {
    if t.abs() < 1e-2 {
        let t2 = t * t;
        t / 2.0 + t2 / 24.0 - t2 * t2 / 2880.0 + t2 * t2 * t2 / 181440.0
    } else if t > 0.0 {
        t + (-(-t).exp_m1()).ln() - t.ln()
    } else {
        (-t.exp_m1()).ln() - (-t).ln()
    }
}

#[inline]
pub fn dpsi1(t: f64) -> f64 {
    trunc_exp_mean(t)
}

/// 1/t² − 1/(4 sinh²(t/2))
#[inline]
pub fn d2psi1(t: f64) -> f64 {
    if t.abs() < 0.1 {
        let t2 = t * t;
        1.0 / 12.0 - t2 / 240.0 + t2 * t2 / 6048.0 - t2 * t2 * t2 / 172800.0 + t2 * t2 * t2 * t2 / 5322240.0
    } else {
        let s = (0.5 * t).sinh();
        1.0 / (t * t) - 1.0 / (4.0 * s * s)
    }
}

#[derive(Clone, Debug)]
pub struct TiltFamily {
    kind: TiltKind,
    d: usize,
    sigma: Option<DMatrix<f64>>,
    factor: Option<MvnFactor>,
    nu: f64,
    a_star: Vec<f64>,
    delta: f64,
    gamma: Option<GammaSampler>,
}

/// θ with the quantities every draw needs precomputed.
#[derive(Clone, Debug)]
pub struct PreparedTheta {
    pub theta: Vec<f64>,
    pub psi: f64,
    // Σθ (mvn / t), 1 − θ_W (clayton), 1/(1−θ) (hazard)
    shift: Vec<f64>,
    rate: f64,
}

/// One draw from Q_θ at family level.
#[derive(Clone, Debug, PartialEq)]
pub struct TiltedSample {
    /// the tilted statistic V (W for t, (W, V₁..V_d) for clayton-mo, Σ hazards for hazard-rate)
    pub stat: Vec<f64>,
    /// latent inputs: V (trunc-exp, mvn), (Y, Z) for t, (W, V) for clayton-mo, uniforms for hazard-rate
    pub aux: Vec<f64>,
    /// −θ′V + ψ(θ)
    pub log_lr: f64,
}

fn quad(s: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let d = a.len();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += a[i] * s[(i, j)] * b[j];
        }
    }
    acc
}

fn matvec(s: &DMatrix<f64>, a: &[f64]) -> Vec<f64> {
    let d = a.len();
    (0..d).map(|i| (0..d).map(|j| s[(i, j)] * a[j]).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl TiltFamily {
    pub fn trunc_exp_product(d: usize) -> Self {
        Self::bare(TiltKind::TruncExpProduct, d)
    }

    pub fn hazard_rate(d: usize) -> Self {
        Self::bare(TiltKind::HazardRate, d)
    }

    fn bare(kind: TiltKind, d: usize) -> Self {
        TiltFamily { kind, d, sigma: None, factor: None, nu: 0.0, a_star: vec![], delta: 0.0, gamma: None }
    }

    pub fn mvn_shift(sigma: DMatrix<f64>) -> Result<Self> {
        let factor = MvnFactor::new(&sigma)?;
        let d = sigma.nrows();
        Ok(TiltFamily { sigma: Some(sigma), factor: Some(factor), ..Self::bare(TiltKind::MvnShift, d) })
    }

    pub fn t_gamma_normal(nu: f64, sigma: DMatrix<f64>, a_star: Vec<f64>) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return param(format!("nu must be positive, got {nu}"));
        }
        let factor = MvnFactor::new(&sigma)?;
        let d = sigma.nrows();
        if a_star.len() != d || a_star.iter().any(|x| !x.is_finite()) {
            return Err(Error::Shape("a* must be a finite vector matching Σ".into()));
        }
        Ok(TiltFamily {
            sigma: Some(sigma),
            factor: Some(factor),
            nu,
            a_star,
            gamma: Some(GammaSampler::new(0.5 * nu)?),
            ..Self::bare(TiltKind::TGammaNormal, d)
        })
    }

    pub fn clayton_mo(delta: f64, d: usize) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return param(format!("delta must be positive, got {delta}"));
        }
        Ok(TiltFamily { delta, gamma: Some(GammaSampler::new(1.0 / delta)?), ..Self::bare(TiltKind::ClaytonMo, d) })
    }

    pub fn kind(&self) -> TiltKind {
        self.kind
    }

    /// Model dimension d.
    pub fn model_dim(&self) -> usize {
        self.d
    }

    pub fn theta_dim(&self) -> usize {
        match self.kind {
            TiltKind::ClaytonMo => self.d + 1,
            TiltKind::HazardRate => 1,
            _ => self.d,
        }
    }

    pub fn aux_dim(&self) -> usize {
        match self.kind {
            TiltKind::TGammaNormal | TiltKind::ClaytonMo => self.d + 1,
            _ => self.d,
        }
    }

    pub fn a_star(&self) -> &[f64] {
        &self.a_star
    }

    pub fn sigma(&self) -> Option<&DMatrix<f64>> {
        self.sigma.as_ref()
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    fn t_d(&self, theta: &[f64]) -> f64 {
        let s = self.sigma.as_ref().unwrap();
        1.0 - (2.0 / self.nu) * (0.5 * quad(s, theta, theta) - dot(theta, &self.a_star))
    }

    pub fn in_domain(&self, theta: &[f64]) -> bool {
        if theta.len() != self.theta_dim() || theta.iter().any(|x| !x.is_finite()) {
            return false;
        }
        match self.kind {
            TiltKind::TruncExpProduct | TiltKind::MvnShift => true,
            TiltKind::TGammaNormal => self.t_d(theta) > 0.0,
            TiltKind::ClaytonMo | TiltKind::HazardRate => theta[0] < 1.0,
        }
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta_dim() {
            return Err(Error::Shape(format!("θ must have length {}, got {}", self.theta_dim(), theta.len())));
        }
        if self.in_domain(theta) {
            return Ok(());
        }
        let why = match self.kind {
            TiltKind::TGammaNormal => "1 − (2/ν)(½θ′Σθ − θ′a*) > 0",
            TiltKind::ClaytonMo => "θ_W < 1",
            TiltKind::HazardRate => "θ < 1",
            _ => "finite θ",
        };
        domain(format!("θ = {theta:?} violates {why}"))
    }

    pub fn psi(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        Ok(self.psi_unchecked(theta))
    }

    pub fn psi_unchecked(&self, theta: &[f64]) -> f64 {
        match self.kind {
            TiltKind::TruncExpProduct => theta.iter().map(|&t| psi1(t)).sum(),
            TiltKind::MvnShift => 0.5 * quad(self.sigma.as_ref().unwrap(), theta, theta),
            TiltKind::TGammaNormal => -0.5 * self.nu * self.t_d(theta).ln(),
            TiltKind::ClaytonMo => {
                -(-theta[0]).ln_1p() / self.delta + theta[1..].iter().map(|&t| psi1(t)).sum::<f64>()
            }
            TiltKind::HazardRate => -(self.d as f64) * (-theta[0]).ln_1p(),
        }
    }

    pub fn grad_psi(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        Ok(match self.kind {
            TiltKind::TruncExpProduct => theta.iter().map(|&t| dpsi1(t)).collect(),
            TiltKind::MvnShift => matvec(self.sigma.as_ref().unwrap(), theta),
            TiltKind::TGammaNormal => {
                let dd = self.t_d(theta);
                let st = matvec(self.sigma.as_ref().unwrap(), theta);
                st.iter().zip(&self.a_star).map(|(s, a)| (s - a) / dd).collect()
            }
            TiltKind::ClaytonMo => {
                let mut g = vec![1.0 / (self.delta * (1.0 - theta[0]))];
                g.extend(theta[1..].iter().map(|&t| dpsi1(t)));
                g
            }
            TiltKind::HazardRate => vec![self.d as f64 / (1.0 - theta[0])],
        })
    }

    pub fn hess_psi(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check(theta)?;
        let k = self.theta_dim();
        Ok(match self.kind {
            TiltKind::TruncExpProduct => DMatrix::from_fn(k, k, |i, j| if i == j { d2psi1(theta[i]) } else { 0.0 }),
            TiltKind::MvnShift => self.sigma.clone().unwrap(),
            TiltKind::TGammaNormal => {
                let dd = self.t_d(theta);
                let g = self.grad_psi(theta)?;
                let s = self.sigma.as_ref().unwrap();
                DMatrix::from_fn(k, k, |i, j| s[(i, j)] / dd + 2.0 / self.nu * g[i] * g[j])
            }
            TiltKind::ClaytonMo => DMatrix::from_fn(k, k, |i, j| {
                if i != j {
                    0.0
                } else if i == 0 {
                    1.0 / (self.delta * (1.0 - theta[0]).powi(2))
                } else {
                    d2psi1(theta[i])
                }
            }),
            TiltKind::HazardRate => DMatrix::from_element(1, 1, self.d as f64 / (1.0 - theta[0]).powi(2)),
        })
    }

    /// Largest α such that θ + α·dir stays in Θ for all smaller steps (∞ when unbounded).
    pub fn max_step(&self, theta: &[f64], dir: &[f64]) -> f64 {
        match self.kind {
            TiltKind::TruncExpProduct | TiltKind::MvnShift => f64::INFINITY,
            TiltKind::ClaytonMo | TiltKind::HazardRate => {
                if dir[0] > 0.0 {
                    (1.0 - theta[0]) / dir[0]
                } else {
                    f64::INFINITY
                }
            }
            TiltKind::TGammaNormal => {
                let s = self.sigma.as_ref().unwrap();
                let nu = self.nu;
                let st = matvec(s, theta);
                let a = -quad(s, dir, dir) / nu;
                let b = -(2.0 / nu) * dir.iter().zip(st.iter().zip(&self.a_star)).map(|(d, (x, y))| d * (x - y)).sum::<f64>();
                let c = self.t_d(theta);
                if a.abs() < 1e-300 {
                    return if b < 0.0 { -c / b } else { f64::INFINITY };
                }
                let disc = (b * b - 4.0 * a * c).max(0.0);
                (-b - disc.sqrt()) / (2.0 * a)
            }
        }
    }

    pub fn prepare(&self, theta: &[f64]) -> Result<PreparedTheta> {
        self.check(theta)?;
        let psi = self.psi_unchecked(theta);
        let (shift, rate) = match self.kind {
            TiltKind::TruncExpProduct => (vec![], 0.0),
            TiltKind::MvnShift => (matvec(self.sigma.as_ref().unwrap(), theta), 0.0),
            TiltKind::TGammaNormal => (matvec(self.sigma.as_ref().unwrap(), theta), 0.5 * self.t_d(theta)),
            TiltKind::ClaytonMo => (vec![], 1.0 - theta[0]),
            TiltKind::HazardRate => (vec![], 1.0 / (1.0 - theta[0])),
        };
        Ok(PreparedTheta { theta: theta.to_vec(), psi, shift, rate })
    }

    /// Draw from Q_θ into `stat` (length theta_dim) and `aux` (length aux_dim); `z` is
    /// scratch of length d. Returns the log likelihood ratio −θ′stat + ψ(θ).
    #[inline]
    pub fn sample_into(&self, s: &mut RngStream, pt: &PreparedTheta, stat: &mut [f64], aux: &mut [f64], z: &mut [f64]) -> f64 {
        let th = &pt.theta;
        let d = self.d;
        match self.kind {
            TiltKind::TruncExpProduct => {
                for i in 0..d {
                    let v = trunc_exp_quantile(s.uniform(), th[i]);
                    stat[i] = v;
                    aux[i] = v;
                }
            }
            TiltKind::MvnShift => {
                for zi in z[..d].iter_mut() {
                    *zi = s.normal();
                }
                self.factor.as_ref().unwrap().apply(&z[..d], stat);
                for i in 0..d {
                    stat[i] += pt.shift[i];
                    aux[i] = stat[i];
                }
            }
            TiltKind::TGammaNormal => {
                let y = self.gamma.as_ref().unwrap().sample(s, pt.rate);
                for zi in z[..d].iter_mut() {
                    *zi = s.normal();
                }
                let r = (y / self.nu).sqrt();
                self.factor.as_ref().unwrap().apply(&z[..d], &mut aux[1..]);
                aux[0] = y;
                for i in 0..d {
                    let zz = r * pt.shift[i] + aux[1 + i];
                    aux[1 + i] = zz;
                    stat[i] = r * zz - (y / self.nu) * self.a_star[i];
                }
            }
            TiltKind::ClaytonMo => {
                let w = self.gamma.as_ref().unwrap().sample(s, pt.rate);
                stat[0] = w;
                aux[0] = w;
                for i in 0..d {
                    let v = trunc_exp_quantile(s.uniform(), th[1 + i]);
                    stat[1 + i] = v;
                    aux[1 + i] = v;
                }
            }
            TiltKind::HazardRate => {
                let mut h = 0.0;
                for i in 0..d {
                    let u = s.uniform();
                    if th[0] == 0.0 {
                        aux[i] = u;
                        h -= (-u).ln_1p();
                    } else {
                        // hazard −ln(1 − v) is Exp(1 − θ)
                        let hi = -(-u).ln_1p() * pt.rate;
                        aux[i] = (-(-hi).exp_m1()).min(1.0 - f64::EPSILON / 2.0);
                        h += hi;
                    }
                }
                stat[0] = h;
            }
        }
        let k = self.theta_dim();
        let mut acc = 0.0;
        for i in 0..k {
            acc += th[i] * stat[i];
        }
        -acc + pt.psi
    }

    /// Draw from Q_θ, or from the conjugate measure Q̄_θ = Q_{−θ} when `conjugate` is set.
    pub fn sample_tilted(&self, s: &mut RngStream, theta: &[f64], conjugate: bool) -> Result<TiltedSample> {
        let th: Vec<f64> = if conjugate { theta.iter().map(|t| -t).collect() } else { theta.to_vec() };
        let pt = self.prepare(&th)?;
        let mut stat = vec![0.0; self.theta_dim()];
        let mut aux = vec![0.0; self.aux_dim()];
        let mut z = vec![0.0; self.d];
        let log_lr = self.sample_into(s, &pt, &mut stat, &mut aux, &mut z);
        Ok(TiltedSample { stat, aux, log_lr })
    }
}
