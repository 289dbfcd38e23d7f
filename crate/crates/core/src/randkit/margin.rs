use super::special::{norm_cdf, norm_ppf, norm_sf, StudentT};
use crate::error::{domain, param, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum MarginKind {
    StdNormal,
    Exponential { rate: f64 },
    StudentT { nu: f64 },
    Uniform01,
}

/// A marginal law F_i with cdf/quantile.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginSpec {
    kind: MarginKind,
    t: Option<StudentT>,
}

impl MarginSpec {
    pub fn new(kind: MarginKind) -> Result<Self> {
        let t = match kind {
            MarginKind::Exponential { rate } if !(rate > 0.0 && rate.is_finite()) => {
                return param(format!("exponential rate must be positive, got {rate}"))
            }
            MarginKind::StudentT { nu } => Some(StudentT::new(nu)?),
            _ => None,
        };
        Ok(MarginSpec { kind, t })
    }

    pub fn std_normal() -> Self {
        MarginSpec { kind: MarginKind::StdNormal, t: None }
    }

    pub fn uniform01() -> Self {
        MarginSpec { kind: MarginKind::Uniform01, t: None }
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(MarginKind::Exponential { rate })
    }

    pub fn student_t(nu: f64) -> Result<Self> {
        Self::new(MarginKind::StudentT { nu })
    }

    pub fn kind(&self) -> MarginKind {
        self.kind
    }

    /// Parse `std-normal`, `uniform`, `exponential(1.5)`/`exp:1.5`, `t(2)`/`t:2`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.find(['(', ':']) {
            Some(i) => (&s[..i], Some(s[i + 1..].trim_end_matches(')').trim())),
            None => (s.as_str(), None),
        };
        let num = |a: Option<&str>, default: Option<f64>| -> Result<f64> {
            match (a, default) {
                (Some(a), _) => a
                    .parse::<f64>()
                    .map_err(|_| crate::Error::Config(format!("bad margin parameter '{a}'"))),
                (None, Some(d)) => Ok(d),
                (None, None) => Err(crate::Error::Config(format!("margin '{name}' needs a parameter"))),
            }
        };
        match name {
            "std-normal" | "normal" | "n01" => Ok(Self::std_normal()),
            "uniform" | "uniform01" => Ok(Self::uniform01()),
            "exponential" | "exp" => Self::exponential(num(arg, Some(1.0))?),
            "t" | "student-t" => Self::student_t(num(arg, None)?),
            other => Err(crate::Error::Config(format!("unknown margin family '{other}'"))),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            MarginKind::StdNormal => norm_cdf(x),
            MarginKind::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            MarginKind::StudentT { .. } => self.t.as_ref().unwrap().cdf(x),
            MarginKind::Uniform01 => x.clamp(0.0, 1.0),
        }
    }

    /// 1 − F(x), evaluated without cancellation where the family allows.
    pub fn sf(&self, x: f64) -> f64 {
        match self.kind {
            MarginKind::StdNormal => norm_sf(x),
            MarginKind::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            MarginKind::StudentT { .. } => self.t.as_ref().unwrap().sf(x),
            MarginKind::Uniform01 => 1.0 - x.clamp(0.0, 1.0),
        }
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return domain(format!("quantile level must lie in (0,1), got {q}"));
        }
        Ok(self.quantile_unchecked(q))
    }

    #[inline]
    pub fn quantile_unchecked(&self, q: f64) -> f64 {
        match self.kind {
            MarginKind::StdNormal => norm_ppf(q),
            MarginKind::Exponential { rate } => -(-q).ln_1p() / rate,
            MarginKind::StudentT { .. } => self.t.as_ref().unwrap().quantile(q),
            MarginKind::Uniform01 => q,
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        match self.kind {
            MarginKind::StdNormal | MarginKind::StudentT { .. } => x.is_finite(),
            MarginKind::Exponential { .. } => x.is_finite() && x >= 0.0,
            MarginKind::Uniform01 => (0.0..=1.0).contains(&x),
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            MarginKind::StdNormal => "std-normal".into(),
            MarginKind::Exponential { rate } => format!("exponential({rate})"),
            MarginKind::StudentT { nu } => format!("t({nu})"),
            MarginKind::Uniform01 => "uniform".into(),
        }
    }
}

pub fn margin_cdf(m: &MarginSpec, x: f64) -> f64 {
    m.cdf(x)
}

pub fn margin_quantile(m: &MarginSpec, q: f64) -> Result<f64> {
    m.quantile(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let n = MarginSpec::std_normal();
        assert_eq!(n.cdf(0.0), 0.5);
        assert!((n.cdf(1.282) - 0.9).abs() < 1e-3);
        assert_eq!(n.quantile(0.5).unwrap(), 0.0);
        let t2 = MarginSpec::student_t(2.0).unwrap();
        assert!((t2.cdf(1.886) - 0.9).abs() < 1e-3);
        assert!((t2.quantile(0.9).unwrap() - 1.8856).abs() < 1e-4);
        assert!(MarginSpec::student_t(0.0).is_err());
        assert!(n.quantile(1.0).is_err());
        assert!(n.quantile(0.0).is_err());
    }

    #[test]
    fn round_trips() {
        let ms = [
            MarginSpec::std_normal(),
            MarginSpec::exponential(1.0).unwrap(),
            MarginSpec::exponential(0.3).unwrap(),
            MarginSpec::student_t(2.0).unwrap(),
            MarginSpec::student_t(5.0).unwrap(),
            MarginSpec::uniform01(),
        ];
        for m in &ms {
            for k in 1..200 {
                let e = -8.0 * k as f64 / 200.0;
                for q in [10f64.powf(e), 1.0 - 10f64.powf(e), k as f64 / 200.0] {
                    if q <= 0.0 || q >= 1.0 {
                        continue;
                    }
                    let x = m.quantile(q).unwrap();
                    assert!((m.cdf(x) - q).abs() < 1e-9, "{} q={q}", m.label());
                }
            }
            for &x in &[0.1, 0.5, 0.9] {
                let xx = match m.kind() {
                    MarginKind::Uniform01 => x,
                    _ => 4.0 * x - 1.0,
                };
                if m.in_support(xx) && m.cdf(xx) > 0.0 {
                    assert!((m.quantile(m.cdf(xx)).unwrap() - xx).abs() < 1e-10 * xx.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn parse_forms() {
        assert_eq!(MarginSpec::parse("std-normal").unwrap().kind(), MarginKind::StdNormal);
        assert_eq!(MarginSpec::parse("t(2)").unwrap().kind(), MarginKind::StudentT { nu: 2.0 });
        assert_eq!(MarginSpec::parse("exp:2").unwrap().kind(), MarginKind::Exponential { rate: 2.0 });
        assert_eq!(MarginSpec::parse("exponential").unwrap().kind(), MarginKind::Exponential { rate: 1.0 });
        assert!(MarginSpec::parse("weibull").is_err());
    }
}
