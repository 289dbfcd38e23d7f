//! Run configuration: a JSON file and/or flags, merged key by key.

use crate::copulas::{equicorrelation, CopulaSpec, CornerEvent, Direction, Model, RVineSpec};
use crate::error::{Error, Result};
use crate::estimators::{CrudeRoute, EventSpec, ExperimentConfig, HrtRule, Method, ThetaSource};
use crate::randkit::MarginSpec;
use crate::tilting::PilotConfig;
use clap::Args;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Every key is optional; flags win over the file given with `--config`.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// JSON file with any of the keys below (snake_case)
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// gaussian | t | clayton | vine
    #[arg(long)]
    pub copula: Option<String>,
    /// equicorrelation coefficient
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// correlation matrix: "1,0.5;0.5,1", "equi:R" or "tridiag:R"
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<String>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// one margin for all coordinates, or a comma list (std-normal, uniform, exp:RATE, t:NU)
    #[arg(long)]
    pub margins: Option<String>,
    /// 3d | 4d | indep:D
    #[arg(long)]
    pub vine_preset: Option<String>,
    #[arg(long)]
    pub vine_file: Option<PathBuf>,

    /// common threshold on every coordinate
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<f64>,
    /// per-coordinate thresholds
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a: Option<Vec<f64>>,
    /// upper | lower
    #[arg(long)]
    pub direction: Option<String>,
    /// Clayton oracle: common uniform threshold
    #[arg(long)]
    pub u0: Option<f64>,

    /// naive | is-t1 | is-t2 | is-t3 | is-ld, or a comma list
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// fixed tilting parameter instead of solving
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Option<Vec<f64>>,
    /// saa | asymptotic
    #[arg(long)]
    pub hrt_rule: Option<String>,
    /// direct | conditional-inverse
    #[arg(long)]
    pub crude_route: Option<String>,
    /// trunc-exp | mvn-shift | t-gamma-normal | clayton-mo | hazard-rate
    #[arg(long)]
    pub family: Option<String>,
    /// saa | tallis | large-deviation | asymptotic
    #[arg(long)]
    pub solver: Option<String>,
    #[arg(long)]
    pub n_pilot: Option<usize>,
    #[arg(skip)]
    pub pilot: Option<PilotConfig>,
    /// reference probability for WNRV
    #[arg(long)]
    pub u_ref: Option<f64>,
    /// sample size of the vine Monte Carlo oracle
    #[arg(long)]
    pub oracle_n: Option<u64>,

    /// CSV report path (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON diagnostics path
    #[arg(long)]
    pub json: Option<PathBuf>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr; $($f:ident),*) => {
        RunConfig { $($f: $hi.$f.or($lo.$f),)* }
    };
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| cfg_err(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Keys set here take precedence over `lower`.
    pub fn over(self, lower: RunConfig) -> RunConfig {
        overlay!(self, lower; config, copula, rho, sigma, nu, delta, dim, margins, vine_preset, vine_file, p, a, direction, u0,
            method, n, reps, seed, theta, hrt_rule, crude_route, family, solver, n_pilot, pilot, u_ref, oracle_n, out, json)
    }

    /// Flags merged over the file named by `--config`, if any.
    pub fn resolve(self) -> Result<RunConfig> {
        match &self.config {
            Some(p) => Ok(self.clone().over(Self::load(p)?)),
            None => Ok(self),
        }
    }

    pub fn direction(&self) -> Result<Direction> {
        self.direction.as_deref().map(Direction::parse).transpose().map(|d| d.unwrap_or(Direction::Upper))
    }

    fn sigma_matrix(&self, d: usize) -> Result<DMatrix<f64>> {
        let Some(s) = self.sigma.as_deref() else {
            return Ok(equicorrelation(d, self.rho.unwrap_or(0.0)));
        };
        let s = s.trim();
        if let Some((kind, r)) = s.split_once(':') {
            let r: f64 = r.trim().parse().map_err(|_| cfg_err(format!("sigma: bad coefficient in '{s}'")))?;
            return match kind.trim() {
                "equi" => Ok(equicorrelation(d, r)),
                "tridiag" => Ok(DMatrix::from_fn(d, d, |i, j| match i.abs_diff(j) {
                    0 => 1.0,
                    1 => r,
                    _ => 0.0,
                })),
                k => Err(cfg_err(format!("sigma: unknown pattern '{k}'"))),
            };
        }
        let rows: Vec<Vec<f64>> = s
            .split(';')
            .map(|r| r.split(',').map(|x| x.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| cfg_err(format!("sigma: cannot parse '{s}'")))?;
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(cfg_err("sigma: matrix must be square"));
        }
        if k != d {
            return Err(cfg_err(format!("sigma is {k}x{k} but the model has dimension {d}")));
        }
        Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
    }

    fn sigma_dim(&self) -> Option<usize> {
        let s = self.sigma.as_deref()?;
        (!s.contains(':')).then(|| s.split(';').count())
    }

    fn margin_list(&self, d: usize, default: MarginSpec) -> Result<Vec<MarginSpec>> {
        let Some(m) = self.margins.as_deref() else { return Ok(vec![default; d]) };
        let parts: Vec<&str> = m.split(',').collect();
        match parts.len() {
            1 => Ok(vec![MarginSpec::parse(parts[0])?; d]),
            k if k == d => parts.iter().map(|p| MarginSpec::parse(p)).collect(),
            k => Err(cfg_err(format!("margins lists {k} entries for a {d}-dimensional model"))),
        }
    }

    fn vine_spec(&self) -> Result<RVineSpec> {
        let rv = match (&self.vine_preset, &self.vine_file) {
            (Some(_), Some(_)) => return Err(cfg_err("give either vine_preset or vine_file, not both")),
            (_, Some(f)) => {
                let text = std::fs::read_to_string(f).map_err(|e| Error::Io(format!("{}: {e}", f.display())))?;
                RVineSpec::parse(&text)?
            }
            (Some(p), None) => match p.to_ascii_lowercase().as_str() {
                "3d" => RVineSpec::example_3d(),
                "4d" => RVineSpec::example_4d(),
                s => match s.strip_prefix("indep:") {
                    Some(d) => RVineSpec::independence(d.parse().map_err(|_| cfg_err(format!("vine_preset: bad dimension in '{p}'")))?),
                    None => return Err(cfg_err(format!("unknown vine_preset '{p}'"))),
                },
            },
            (None, None) => return Err(cfg_err("copula 'vine' needs vine_preset or vine_file")),
        };
        if self.margins.is_none() {
            return Ok(rv);
        }
        let d = rv.dim();
        RVineSpec::new(d, rv.edges().to_vec(), self.margin_list(d, MarginSpec::uniform01())?)
    }

    pub fn model(&self) -> Result<Model> {
        let copula = self.copula.as_deref().ok_or_else(|| cfg_err("missing key 'copula'"))?;
        let d = self.dim.or(self.a.as_ref().map(|a| a.len())).or(self.sigma_dim()).unwrap_or(2);
        let need = |v: Option<f64>, k: &str| v.ok_or_else(|| cfg_err(format!("copula '{copula}' needs key '{k}'")));
        let normal = MarginSpec::std_normal();
        Ok(match copula.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => CopulaSpec::gaussian(self.sigma_matrix(d)?, self.margin_list(d, normal)?)?.into(),
            "t" | "student-t" => CopulaSpec::student_t(need(self.nu, "nu")?, self.sigma_matrix(d)?, self.margin_list(d, normal)?)?.into(),
            "clayton" => CopulaSpec::clayton(need(self.delta, "delta")?, d, self.margin_list(d, normal)?)?.into(),
            "vine" | "r-vine" => self.vine_spec()?.into(),
            other => return Err(cfg_err(format!("unknown copula '{other}' (key 'copula')"))),
        })
    }

    pub fn corner(&self, d: usize) -> Result<CornerEvent> {
        let dir = self.direction()?;
        match (&self.a, self.p) {
            (Some(_), Some(_)) => Err(cfg_err("give either p or a, not both")),
            (Some(a), None) if a.len() != d => Err(cfg_err(format!("a has {} thresholds for a {d}-dimensional model", a.len()))),
            (Some(a), None) => Ok(CornerEvent::new(dir, a.clone())),
            (None, Some(p)) => Ok(CornerEvent::equal(d, p, dir)),
            (None, None) => Err(cfg_err("missing event threshold: key 'p' or 'a'")),
        }
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        match self.method.as_deref() {
            None => Ok(vec![]),
            Some(m) => m.split(',').map(|s| Method::parse(s.trim())).collect(),
        }
    }

    pub fn hrt(&self) -> Result<HrtRule> {
        Ok(match self.hrt_rule.as_deref() {
            None | Some("saa") => HrtRule::Saa,
            Some("asymptotic") => HrtRule::Asymptotic,
            Some(o) => return Err(cfg_err(format!("unknown hrt_rule '{o}'"))),
        })
    }

    pub fn route(&self) -> Result<CrudeRoute> {
        Ok(match self.crude_route.as_deref() {
            None | Some("direct") => CrudeRoute::Direct,
            Some("conditional-inverse") | Some("cim") => CrudeRoute::ConditionalInverse,
            Some(o) => return Err(cfg_err(format!("unknown crude_route '{o}'"))),
        })
    }

    pub fn pilot_config(&self) -> PilotConfig {
        let mut p = self.pilot.clone().unwrap_or_default();
        if let Some(n) = self.n_pilot {
            p.n_pilot = n;
        }
        p
    }

    /// Experiment for one method; θ is solved unless given.
    pub fn experiment(&self, model: &Model, method: Method) -> Result<ExperimentConfig> {
        let event = EventSpec::Corner(self.corner(model.dim())?);
        let mut e = ExperimentConfig::new(model.clone(), event, method);
        if let Some(n) = self.n {
            e.n = n;
        }
        if let Some(r) = self.reps {
            e.reps = r;
        }
        e.seed = self.seed.unwrap_or(0);
        if let Some(t) = &self.theta {
            e.theta = ThetaSource::Explicit(t.clone());
        }
        e.pilot = self.pilot_config();
        e.hrt_rule = self.hrt()?;
        e.crude_route = self.route()?;
        e.u_ref = self.u_ref;
        Ok(e)
    }
}
