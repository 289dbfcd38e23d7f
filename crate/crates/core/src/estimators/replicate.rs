use super::{CrudeRoute, EstimateResult, Method, SdKind};
use crate::copulas::{CopulaFamily, CornerEvent, CrudeSampler, Indicator, Model, PreparedEvent};
use crate::error::{domain, Error, Result};
use crate::parallel;
use crate::randkit::{make_stream, RngStream};
use crate::tilting::{
    hrt_theta_asymptotic, solve_hrt_theta, solve_theta_large_deviation, solve_theta_saa, PilotConfig, Scheme, TiltKind, TiltSolution,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Stream id reserved for θ solving, disjoint from replication ids.
pub const SOLVER_STREAM: u64 = 1 << 62;

#[derive(Clone)]
pub enum EventSpec {
    Corner(CornerEvent),
    Indicator(Indicator),
    Whole,
}

impl std::fmt::Debug for EventSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EventSpec::Corner(c) => f.debug_tuple("Corner").field(c).finish(),
            EventSpec::Indicator(_) => f.write_str("Indicator(..)"),
            EventSpec::Whole => f.write_str("Whole"),
        }
    }
}

impl EventSpec {
    pub fn prepare(&self, model: &Model) -> Result<PreparedEvent> {
        match self {
            EventSpec::Corner(c) => model.prepare_event(c),
            EventSpec::Indicator(f) => Ok(PreparedEvent::from_indicator(f.clone())),
            EventSpec::Whole => Ok(PreparedEvent::whole_space(model.dim())),
        }
    }

    pub fn label(&self) -> String {
        match self {
            EventSpec::Corner(c) if c.a.iter().all(|&x| x == c.a[0]) => format!("{}", c.a[0]),
            EventSpec::Corner(c) => c.a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"),
            EventSpec::Indicator(_) => "custom".into(),
            EventSpec::Whole => "whole".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaSource {
    Solved,
    Explicit(Vec<f64>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HrtRule {
    /// minimize the sampled second moment
    #[default]
    Saa,
    /// θ = 1 − d / Σ −ln(1 − v*) at the corner
    Asymptotic,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub model: Model,
    pub event: EventSpec,
    pub method: Method,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub theta: ThetaSource,
    pub pilot: PilotConfig,
    pub hrt_rule: HrtRule,
    pub crude_route: CrudeRoute,
    pub u_ref: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(model: Model, event: EventSpec, method: Method) -> Self {
        ExperimentConfig {
            model,
            event,
            method,
            n: 500,
            reps: 5000,
            seed: 0,
            theta: ThetaSource::Solved,
            pilot: PilotConfig::default(),
            hrt_rule: HrtRule::Saa,
            crude_route: CrudeRoute::Direct,
            u_ref: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.reps == 0 {
            return Err(Error::Config("n and reps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-replication sums of the weights 1{A}·dP/dQ.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RepStat {
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
    pub hits: u64,
    pub max_w: f64,
}

impl RepStat {
    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    #[inline]
    fn push(&mut self, w: f64) {
        self.sum += w;
        self.sum_sq += w * w;
        self.hits += 1;
        if w > self.max_w {
            self.max_w = w;
        }
    }
}

fn tilt_kind(model: &Model, method: Method) -> Result<Option<TiltKind>> {
    Ok(Some(match method {
        Method::Naive => return Ok(None),
        Method::IsT1 => TiltKind::TruncExpProduct,
        Method::IsT3 => TiltKind::HazardRate,
        Method::IsLd => TiltKind::TGammaNormal,
        Method::IsT2 => match model.as_copula().map(|c| c.family()) {
            Some(CopulaFamily::Gaussian { .. }) => TiltKind::MvnShift,
            Some(CopulaFamily::StudentT { .. }) => TiltKind::TGammaNormal,
            Some(CopulaFamily::Clayton { .. }) => TiltKind::ClaytonMo,
            None => return Err(Error::Config("is-t2 has no direct tilting family for vine models".into())),
        },
    }))
}

/// The sampling scheme behind a method (None for the crude estimator).
pub fn scheme_for(cfg: &ExperimentConfig) -> Result<Option<Scheme>> {
    let Some(kind) = tilt_kind(&cfg.model, cfg.method)? else { return Ok(None) };
    Ok(Some(Scheme::new(cfg.model.clone(), cfg.event.prepare(&cfg.model)?, kind)?))
}

/// θ for the configured method, from its own solver stream.
pub fn solve_for(cfg: &ExperimentConfig, scheme: &Scheme) -> Result<TiltSolution> {
    let mut s = make_stream(cfg.seed, SOLVER_STREAM);
    match cfg.method {
        Method::Naive => Err(Error::Config("the naive estimator has no tilting parameter".into())),
        Method::IsLd => {
            let mut sol = solve_theta_large_deviation(scheme.family())?;
            sol.reflected = scheme.reflected();
            Ok(sol)
        }
        Method::IsT3 => match cfg.hrt_rule {
            HrtRule::Saa => solve_hrt_theta(&cfg.model, &cfg.event.prepare(&cfg.model)?, &cfg.pilot, &mut s),
            HrtRule::Asymptotic => hrt_theta_asymptotic(&cfg.model, &cfg.event.prepare(&cfg.model)?),
        },
        Method::IsT1 | Method::IsT2 => solve_theta_saa(scheme, &cfg.pilot, &mut s),
    }
}

fn rep_scheme(scheme: &Scheme, theta: &[f64], n: usize, s: &mut RngStream) -> RepStat {
    let pt = scheme.family().prepare(theta).expect("θ checked before replication");
    let mut ws = scheme.workspace();
    let mut st = RepStat { n, ..Default::default() };
    for _ in 0..n {
        let (hit, llr) = scheme.draw(s, &pt, &mut ws, false);
        if hit {
            st.push(llr.exp());
        }
    }
    st
}

fn rep_crude(sampler: &CrudeSampler, event: &PreparedEvent, n: usize, s: &mut RngStream) -> RepStat {
    let model = sampler.model();
    let d = model.dim();
    let mut lat = vec![0.0; d];
    let mut x = vec![0.0; d];
    let mut scratch = vec![0.0; d.max(model.scratch_len())];
    let mut st = RepStat { n, ..Default::default() };
    for _ in 0..n {
        sampler.draw_latent(s, &mut lat, &mut scratch);
        let hit = match &event.indicator {
            None => event.hit_latent(&lat),
            Some(f) => {
                model.latent_to_x(&lat, &mut x);
                f(&x)
            }
        };
        if hit {
            st.push(1.0);
        }
    }
    st
}

fn aggregate(cfg: &ExperimentConfig, method: Method, stats: &[RepStat], seconds: f64, theta: Vec<f64>) -> Result<EstimateResult> {
    let m = stats.len();
    let means: Vec<f64> = stats.iter().map(|r| r.mean()).collect();
    let u_hat = means.iter().sum::<f64>() / m as f64;
    let (sd, sd_kind) = if m > 1 {
        let v = means.iter().map(|x| (x - u_hat).powi(2)).sum::<f64>() / (m as f64 - 1.0);
        (v.sqrt(), SdKind::AcrossReplications)
    } else {
        let r = &stats[0];
        let n = r.n as f64;
        let v = if r.n > 1 { ((r.sum_sq - n * u_hat * u_hat) / (n * (n - 1.0))).max(0.0) } else { 0.0 };
        (v.sqrt(), SdKind::WithinRun)
    };
    let mut res = EstimateResult {
        method,
        family: cfg.model.name().into(),
        params: cfg.model.params_label(),
        p_label: cfg.event.label(),
        u_hat,
        sd,
        sd_kind,
        n: cfg.n,
        reps: m,
        seconds,
        wnrv: None,
        theta,
        seed: cfg.seed,
        hits: stats.iter().map(|r| r.hits).sum(),
        max_weight: stats.iter().map(|r| r.max_w).fold(0.0, f64::max),
        solution: None,
        solve_seconds: 0.0,
    };
    if let Some(u) = cfg.u_ref {
        res = res.with_wnrv(u)?;
    }
    Ok(res)
}

fn run_reps<F>(pool: &rayon::ThreadPool, cfg: &ExperimentConfig, f: F) -> (Vec<RepStat>, f64)
where
    F: Fn(&mut RngStream) -> RepStat + Sync,
{
    let t0 = Instant::now();
    let stats = pool.install(|| (0..cfg.reps as u64).into_par_iter().map(|r| f(&mut make_stream(cfg.seed, r))).collect());
    (stats, t0.elapsed().as_secs_f64())
}

fn crude_in(pool: &rayon::ThreadPool, cfg: &ExperimentConfig) -> Result<EstimateResult> {
    cfg.validate()?;
    let event = cfg.event.prepare(&cfg.model)?;
    let (stats, secs) = match cfg.crude_route {
        CrudeRoute::Direct => {
            let sampler = CrudeSampler::new(cfg.model.clone())?;
            run_reps(pool, cfg, |s| rep_crude(&sampler, &event, cfg.n, s))
        }
        CrudeRoute::ConditionalInverse => {
            let scheme = Scheme::new(cfg.model.clone(), event, TiltKind::TruncExpProduct)?;
            let zero = vec![0.0; cfg.model.dim()];
            run_reps(pool, cfg, |s| rep_scheme(&scheme, &zero, cfg.n, s))
        }
    };
    aggregate(cfg, Method::Naive, &stats, secs, vec![])
}

fn tilted_in(pool: &rayon::ThreadPool, cfg: &ExperimentConfig, scheme: &Scheme, theta: &[f64]) -> Result<EstimateResult> {
    cfg.validate()?;
    scheme.family().prepare(theta)?;
    let (stats, secs) = run_reps(pool, cfg, |s| rep_scheme(scheme, theta, cfg.n, s));
    aggregate(cfg, cfg.method, &stats, secs, theta.to_vec())
}

/// Crude Monte Carlo, whatever `cfg.method` says.
pub fn estimate_crude(cfg: &ExperimentConfig) -> Result<EstimateResult> {
    crude_in(parallel::pool(), cfg)
}

/// Tilted estimator for `cfg.method` at a given θ.
pub fn estimate_is(cfg: &ExperimentConfig, theta: &[f64]) -> Result<EstimateResult> {
    if cfg.method == Method::Naive {
        return Err(Error::Config("estimate_is needs an importance-sampling method".into()));
    }
    let scheme = scheme_for(cfg)?.unwrap();
    tilted_in(parallel::pool(), cfg, &scheme, theta)
}

/// Hazard-rate twisting at scalar θ ∈ [0, 1).
pub fn estimate_hrt(cfg: &ExperimentConfig, theta: f64) -> Result<EstimateResult> {
    if !(0.0..1.0).contains(&theta) {
        return domain(format!("hazard-rate θ must lie in [0, 1), got {theta}"));
    }
    let mut c = cfg.clone();
    c.method = Method::IsT3;
    estimate_is(&c, &[theta])
}

/// Full pipeline in the given pool: resolve θ (timed separately), then replicate.
pub fn replicate_in(pool: &rayon::ThreadPool, cfg: &ExperimentConfig) -> Result<EstimateResult> {
    let Some(scheme) = scheme_for(cfg)? else { return crude_in(pool, cfg) };
    let t0 = Instant::now();
    let (theta, solution) = match &cfg.theta {
        ThetaSource::Explicit(t) => (t.clone(), None),
        ThetaSource::Solved => {
            let sol = solve_for(cfg, &scheme)?;
            (sol.theta.clone(), Some(sol))
        }
    };
    if cfg.method == Method::IsT3 && !(0.0..1.0).contains(&theta[0]) {
        return domain(format!("hazard-rate θ must lie in [0, 1), got {}", theta[0]));
    }
    let solve_seconds = t0.elapsed().as_secs_f64();
    let mut r = tilted_in(pool, cfg, &scheme, &theta)?;
    r.solution = solution;
    r.solve_seconds = solve_seconds;
    Ok(r)
}

pub fn replicate(cfg: &ExperimentConfig) -> Result<EstimateResult> {
    replicate_in(parallel::pool(), cfg)
}

/// Alias of `replicate`.
pub fn estimate(cfg: &ExperimentConfig) -> Result<EstimateResult> {
    replicate(cfg)
}
