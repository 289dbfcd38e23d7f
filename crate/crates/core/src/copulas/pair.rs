//! Bivariate pair copulas and their h-functions h(v2|v1) = ∂C(v1,v2)/∂v1.
//!
//! Every family here is exchangeable, so the orientation of an edge does not matter.

use crate::error::{param, Error, Result};
use crate::randkit::special::{norm_cdf, norm_ppf, softplus, StudentT};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PairFamily {
    Independence,
    Gaussian { rho: f64 },
    StudentT { nu: f64, rho: f64 },
    Clayton { delta: f64 },
    Gumbel { delta: f64 },
    Frank { delta: f64 },
    Joe { delta: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairCopula {
    family: PairFamily,
    // cached: √(1−ρ²), and t_ν, t_{ν+1}
    rc: f64,
    t: Option<(StudentT, StudentT)>,
}

const EPS: f64 = 1e-300;

#[inline]
fn clamp01(x: f64) -> f64 {
    x.clamp(EPS, 1.0 - f64::EPSILON / 2.0)
}

impl PairCopula {
    pub fn new(family: PairFamily) -> Result<Self> {
        let mut rc = 1.0;
        let mut t = None;
        match family {
            PairFamily::Independence => {}
            PairFamily::Gaussian { rho } => {
                if !(rho.abs() < 1.0) {
                    return param(format!("gaussian pair copula needs |rho| < 1, got {rho}"));
                }
                rc = (1.0 - rho * rho).sqrt();
            }
            PairFamily::StudentT { nu, rho } => {
                if !(rho.abs() < 1.0) {
                    return param(format!("t pair copula needs |rho| < 1, got {rho}"));
                }
                rc = (1.0 - rho * rho).sqrt();
                t = Some((StudentT::new(nu)?, StudentT::new(nu + 1.0)?));
            }
            PairFamily::Clayton { delta } => {
                if !(delta > 0.0 && delta.is_finite()) {
                    return param(format!("clayton needs delta > 0, got {delta}"));
                }
            }
            PairFamily::Gumbel { delta } | PairFamily::Joe { delta } => {
                if !(delta >= 1.0 && delta.is_finite()) {
                    return param(format!("gumbel/joe need delta >= 1, got {delta}"));
                }
            }
            PairFamily::Frank { delta } => {
                if !(delta != 0.0 && delta.is_finite()) {
                    return param(format!("frank needs delta != 0, got {delta}"));
                }
            }
        }
        Ok(PairCopula { family, rc, t })
    }

    pub fn independence() -> Self {
        PairCopula { family: PairFamily::Independence, rc: 1.0, t: None }
    }

    pub fn family(&self) -> PairFamily {
        self.family
    }

    /// Parse `gaussian rho=0.5`, `t nu=5 rho=0.5`, `clayton delta=3`, `indep`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut it = s.split_whitespace();
        let name = it.next().ok_or_else(|| Error::Config("empty pair-copula spec".into()))?.to_ascii_lowercase();
        let mut kv = std::collections::HashMap::new();
        for tok in it {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got '{tok}'")))?;
            let v: f64 = v.parse().map_err(|_| Error::Config(format!("bad number in '{tok}'")))?;
            kv.insert(k.to_ascii_lowercase(), v);
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| Error::Config(format!("pair copula '{name}' needs {k}=")));
        let fam = match name.as_str() {
            "indep" | "independence" => PairFamily::Independence,
            "gaussian" | "normal" => PairFamily::Gaussian { rho: get("rho")? },
            "t" | "student-t" => PairFamily::StudentT { nu: get("nu")?, rho: get("rho")? },
            "clayton" => PairFamily::Clayton { delta: get("delta")? },
            "gumbel" => PairFamily::Gumbel { delta: get("delta")? },
            "frank" => PairFamily::Frank { delta: get("delta")? },
            "joe" => PairFamily::Joe { delta: get("delta")? },
            other => return Err(Error::Config(format!("unknown pair-copula family '{other}'"))),
        };
        Self::new(fam)
    }

    pub fn label(&self) -> String {
        match self.family {
            PairFamily::Independence => "indep".into(),
            PairFamily::Gaussian { rho } => format!("gaussian rho={rho}"),
            PairFamily::StudentT { nu, rho } => format!("t nu={nu} rho={rho}"),
            PairFamily::Clayton { delta } => format!("clayton delta={delta}"),
            PairFamily::Gumbel { delta } => format!("gumbel delta={delta}"),
            PairFamily::Frank { delta } => format!("frank delta={delta}"),
            PairFamily::Joe { delta } => format!("joe delta={delta}"),
        }
    }

    /// Copula cdf for the Archimedean families and independence.
    pub fn cdf(&self, u1: f64, u2: f64) -> Option<f64> {
        Some(match self.family {
            PairFamily::Independence => u1 * u2,
            PairFamily::Clayton { delta } => (u1.powf(-delta) + u2.powf(-delta) - 1.0).powf(-1.0 / delta),
            PairFamily::Gumbel { delta } => {
                (-((-u1.ln()).powf(delta) + (-u2.ln()).powf(delta)).powf(1.0 / delta)).exp()
            }
            PairFamily::Frank { delta } => {
                let a = (-delta * u1).exp_m1();
                let b = (-delta * u2).exp_m1();
                -(a * b / (-delta).exp_m1()).ln_1p() / delta
            }
            PairFamily::Joe { delta } => {
                let a = (1.0 - u1).powf(delta);
                let b = (1.0 - u2).powf(delta);
                1.0 - (a + b - a * b).powf(1.0 / delta)
            }
            _ => return None,
        })
    }

    #[inline]
    pub fn h(&self, v2: f64, v1: f64) -> f64 {
        let (v1, v2) = (clamp01(v1), clamp01(v2));
        let r = match self.family {
            PairFamily::Independence => v2,
            PairFamily::Gaussian { rho } => norm_cdf((norm_ppf(v2) - rho * norm_ppf(v1)) / self.rc),
            PairFamily::StudentT { nu, rho } => {
                let (tn, tn1) = self.t.as_ref().unwrap();
                let x1 = tn.quantile(v1);
                let x2 = tn.quantile(v2);
                let scale = ((nu + x1 * x1) / (nu + 1.0)).sqrt() * self.rc;
                tn1.cdf((x2 - rho * x1) / scale)
            }
            PairFamily::Clayton { delta } => {
                // (1 + v1^δ (v2^{−δ} − 1))^{−(1+δ)/δ}
                let ln_a = delta * v1.ln() + (-delta * v2.ln()).exp_m1().ln();
                (-(1.0 + delta) / delta * softplus(ln_a)).exp()
            }
            PairFamily::Gumbel { delta } => {
                let x = -v1.ln();
                let y = -v2.ln();
                let z = gumbel_z(x, y, delta);
                (-(z - x) + (delta - 1.0) * (x.ln() - z.ln())).exp()
            }
            PairFamily::Frank { delta } => {
                let a = (-delta * v1).exp_m1();
                let b = (-delta * v2).exp_m1();
                let c = (-delta).exp_m1();
                (a + 1.0) * b / (c + a * b)
            }
            PairFamily::Joe { delta } => {
                let ub = 1.0 - v1;
                let a = ub.powf(delta);
                let y = (1.0 - v2).powf(delta);
                let s = a + y * (1.0 - a);
                ((1.0 / delta - 1.0) * s.ln() + (delta - 1.0) * ub.ln()).exp() * (1.0 - y)
            }
        };
        r.clamp(0.0, 1.0)
    }

    /// Inverse of v2 ↦ h(v2|v1).
    #[inline]
    pub fn h_inv(&self, q: f64, v1: f64) -> f64 {
        let (v1, q) = (clamp01(v1), clamp01(q));
        let r = match self.family {
            PairFamily::Independence => q,
            PairFamily::Gaussian { rho } => norm_cdf(self.rc * norm_ppf(q) + rho * norm_ppf(v1)),
            PairFamily::StudentT { nu, rho } => {
                let (tn, tn1) = self.t.as_ref().unwrap();
                let x1 = tn.quantile(v1);
                let scale = ((nu + x1 * x1) / (nu + 1.0)).sqrt() * self.rc;
                tn.cdf(tn1.quantile(q) * scale + rho * x1)
            }
            PairFamily::Clayton { delta } => {
                // (1 + (q^{−δ/(1+δ)} − 1) v1^{−δ})^{−1/δ}
                let ln_b = (-delta / (1.0 + delta) * q.ln()).exp_m1().ln() - delta * v1.ln();
                (-softplus(ln_b) / delta).exp()
            }
            PairFamily::Gumbel { delta } => gumbel_h_inv(q, v1, delta),
            PairFamily::Frank { delta } => {
                let a = (-delta * v1).exp_m1();
                let c = (-delta).exp_m1();
                let b = q * c / (1.0 + a * (1.0 - q));
                -b.ln_1p() / delta
            }
            PairFamily::Joe { delta } => joe_h_inv(q, v1, delta),
        };
        clamp01(r)
    }
}

// z = (x^δ + y^δ)^{1/δ} computed as max·(1 + (min/max)^δ)^{1/δ}
#[inline]
fn gumbel_z(x: f64, y: f64, delta: f64) -> f64 {
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    if hi == 0.0 {
        return 0.0;
    }
    hi * ((lo / hi).powf(delta).ln_1p() / delta).exp()
}

fn gumbel_h_inv(q: f64, v1: f64, delta: f64) -> f64 {
    let x = -v1.ln();
    if delta == 1.0 {
        return q;
    }
    let lq = q.ln();
    // g(z) = −(z − x) + (δ−1)(ln x − ln z) − ln q, decreasing and convex on z ≥ x
    let g = |z: f64| -(z - x) + (delta - 1.0) * (x.ln() - z.ln()) - lq;
    let mut lo = x;
    let mut hi = x + 1.0;
    while g(hi) > 0.0 {
        lo = hi;
        hi = x + 2.0 * (hi - x);
    }
    let mut z = x;
    for _ in 0..100 {
        let gz = g(z);
        if gz > 0.0 {
            lo = lo.max(z);
        } else {
            hi = hi.min(z);
        }
        let dg = -1.0 - (delta - 1.0) / z;
        let mut zn = z - gz / dg;
        if !(zn >= lo && zn <= hi) {
            zn = 0.5 * (lo + hi);
        }
        let done = (zn - z).abs() <= 1e-14 * z.max(1e-300);
        z = zn;
        if done || hi - lo <= 1e-15 * hi {
            break;
        }
    }
    // y = (z^δ − x^δ)^{1/δ}
    let r = (x / z).max(0.0);
    let y = z * (-(delta * r.ln()).exp_m1()).max(0.0).powf(1.0 / delta);
    (-y).exp()
}

fn joe_h_inv(q: f64, v1: f64, delta: f64) -> f64 {
    let ub = 1.0 - v1;
    let a = ub.powf(delta);
    let lq = q.ln();
    let lub = ub.ln();
    // unknown t = ln(ū2^δ); f(t) = ln h − ln q is decreasing in t < 0
    let f = |t: f64| {
        let y = t.exp();
        let s = a + y * (1.0 - a);
        (1.0 / delta - 1.0) * s.ln() + (delta - 1.0) * lub + (-t.exp_m1()).ln() - lq
    };
    let df = |t: f64| {
        let y = t.exp();
        let s = a + y * (1.0 - a);
        (1.0 / delta - 1.0) * (1.0 - a) * y / s + y / t.exp_m1()
    };
    let mut lo = a.ln().max(-700.0) - 10.0;
    while f(lo) <= 0.0 && lo > -1e4 {
        lo *= 2.0;
    }
    let mut hi = -1e-300_f64.max(f64::MIN_POSITIVE);
    let mut t = if q > 0.5 { lo.max(a.ln()) } else { 0.5 * lo };
    for _ in 0..300 {
        let ft = f(t);
        if ft > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut tn = t - ft / df(t);
        if !(tn > lo && tn < hi) {
            tn = 0.5 * (lo + hi);
        }
        let done = (tn - t).abs() <= 1e-14 * t.abs().max(1e-12) || (hi - lo).abs() <= 1e-15 * lo.abs();
        t = tn;
        if done {
            break;
        }
    }
    -(t / delta).exp_m1()
}

pub fn h_func(pc: &PairCopula, v2: f64, v1: f64) -> Result<f64> {
    check_unit(v1)?;
    check_unit(v2)?;
    Ok(pc.h(v2, v1))
}

pub fn h_inv(pc: &PairCopula, q: f64, v1: f64) -> Result<f64> {
    check_unit(v1)?;
    check_unit(q)?;
    Ok(pc.h_inv(q, v1))
}

fn check_unit(x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("argument must lie in (0,1), got {x}")))
    }
}
