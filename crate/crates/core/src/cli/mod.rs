//! Command-line front end: estimate, solve-theta, oracle, bench, reproduce.

pub mod config;
mod reproduce;
pub mod tables;

pub use config::RunConfig;
pub use tables::{all_tables, reference_table, ReferenceTable};

use crate::copulas::{CopulaFamily, Model};
use crate::error::{Error, Result};
use crate::estimators::{replicate, sd_eff, write_csv, EstimateResult, Method, SOLVER_STREAM};
use crate::oracle;
use crate::randkit::make_stream;
use crate::tilting::{
    hrt_theta_asymptotic, solve_hrt_theta, solve_theta_gaussian_tallis, solve_theta_large_deviation, solve_theta_saa, Scheme, TiltKind,
    TiltSolution,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::io::Write;
use std::path::Path;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "tiltcopula", version, about = "Importance sampling for rare corner events under copula models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Replicated estimates, one CSV row per method
    Estimate(RunConfig),
    /// Solve for the optimal tilting parameter and print it as JSON
    SolveTheta(RunConfig),
    /// Reference probability of the corner event
    Oracle(RunConfig),
    /// All applicable methods on one configuration, with efficiency ratios
    Bench(RunConfig),
    /// Re-run a published results table and print both side by side
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    /// table number, 1 to 14
    #[arg(long)]
    pub table: usize,
    /// 1-based threshold columns to run (default all)
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<usize>>,
    #[command(flatten)]
    pub run: RunConfig,
}

/// Exit status for an error: 3 for solver failures, 2 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence(_) | Error::DegeneratePilot(_) => EXIT_NONCONVERGENCE,
        _ => EXIT_CONFIG,
    }
}

/// Parse `args` (including the program name) and run; returns the exit status.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Estimate(c) => cmd_estimate(c.resolve()?),
        Command::SolveTheta(c) => cmd_solve_theta(c.resolve()?),
        Command::Oracle(c) => cmd_oracle(c.resolve()?),
        Command::Bench(c) => cmd_bench(c.resolve()?),
        Command::Reproduce(a) => reproduce::run(a.table, a.columns.as_deref(), a.run.resolve()?),
    }
}

fn write_report(cfg: &RunConfig, rows: &[EstimateResult]) -> Result<()> {
    match &cfg.out {
        Some(p) => write_csv(std::fs::File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?, rows)?,
        None => write_csv(std::io::stdout().lock(), rows)?,
    }
    if let Some(p) = &cfg.json {
        write_json(p, &rows)?;
    }
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Deterministic reference probability, when the model has one.
pub fn reference_prob(cfg: &RunConfig, model: &Model) -> Option<f64> {
    if let Some(u) = cfg.u_ref {
        return Some(u);
    }
    let corner = cfg.corner(model.dim()).ok()?;
    oracle::corner_prob(model, &corner).ok().filter(|u| *u > 0.0)
}

fn unconverged(rows: &[EstimateResult]) -> bool {
    rows.iter().any(|r| r.solution.as_ref().is_some_and(|s| !s.converged))
}

fn run_methods(cfg: &RunConfig, model: &Model, methods: &[Method]) -> Result<Vec<EstimateResult>> {
    methods
        .iter()
        .map(|&m| {
            eprintln!("running {} (n={}, reps={})", m.label(), cfg.n.unwrap_or(500), cfg.reps.unwrap_or(5000));
            replicate(&cfg.experiment(model, m)?)
        })
        .collect()
}

fn cmd_estimate(cfg: RunConfig) -> Result<i32> {
    let model = cfg.model()?;
    let methods = cfg.methods()?;
    if methods.is_empty() {
        return Err(Error::Config("missing key 'method'".into()));
    }
    let u_ref = reference_prob(&cfg, &model);
    let mut rows = run_methods(&cfg, &model, &methods)?;
    if let Some(u) = u_ref {
        rows = rows.into_iter().map(|r| r.with_wnrv(u)).collect::<Result<_>>()?;
    }
    write_report(&cfg, &rows)?;
    Ok(if unconverged(&rows) { EXIT_NONCONVERGENCE } else { EXIT_OK })
}

/// Methods that apply to a model, crude first.
pub fn applicable_methods(model: &Model) -> Vec<Method> {
    match model.as_copula().map(|c| c.family()) {
        None => vec![Method::Naive, Method::IsT1, Method::IsT3],
        Some(CopulaFamily::StudentT { .. }) => Method::ALL.to_vec(),
        Some(_) => vec![Method::Naive, Method::IsT1, Method::IsT2, Method::IsT3],
    }
}

fn cmd_bench(cfg: RunConfig) -> Result<i32> {
    let model = cfg.model()?;
    let mut methods = cfg.methods()?;
    if methods.is_empty() {
        methods = applicable_methods(&model);
    }
    let mut rows = run_methods(&cfg, &model, &methods)?;
    // without an oracle, the most precise estimate stands in for u
    let u_ref = reference_prob(&cfg, &model).or_else(|| {
        rows.iter().filter(|r| r.u_hat > 0.0).min_by(|a, b| a.std_err().total_cmp(&b.std_err())).map(|r| r.u_hat)
    });
    if let Some(u) = u_ref {
        rows = rows.into_iter().map(|r| r.with_wnrv(u)).collect::<Result<_>>()?;
    }
    write_report(&cfg, &rows)?;
    if let Some(base) = rows.iter().find(|r| r.method == Method::Naive) {
        for r in rows.iter().filter(|r| r.method != Method::Naive) {
            let se = sd_eff(base, r).map(|x| format!("{x:.2}")).unwrap_or_else(|_| "-".into());
            let we = match (base.wnrv, r.wnrv) {
                (Some(a), Some(b)) if b > 0.0 => format!("{:.2}", a / b),
                _ => "-".into(),
            };
            eprintln!("sd_eff(naive, {}) = {se}   wnrv_eff(naive, {}) = {we}", r.method.label(), r.method.label());
        }
    }
    Ok(if unconverged(&rows) { EXIT_NONCONVERGENCE } else { EXIT_OK })
}

#[derive(Serialize)]
struct SolveReport<'a> {
    family: &'a str,
    solver: &'a str,
    #[serde(flatten)]
    solution: &'a TiltSolution,
}

fn default_family(model: &Model, cfg: &RunConfig) -> Result<TiltKind> {
    let m = cfg.methods()?;
    let method = m.first().copied().unwrap_or(Method::IsT1);
    Ok(match method {
        Method::IsT1 => TiltKind::TruncExpProduct,
        Method::IsT3 => TiltKind::HazardRate,
        Method::IsLd => TiltKind::TGammaNormal,
        Method::IsT2 => match model.as_copula().map(|c| c.family()) {
            Some(CopulaFamily::Gaussian { .. }) => TiltKind::MvnShift,
            Some(CopulaFamily::StudentT { .. }) => TiltKind::TGammaNormal,
            Some(CopulaFamily::Clayton { .. }) => TiltKind::ClaytonMo,
            None => return Err(Error::Config("is-t2 has no tilting family for vine models".into())),
        },
        Method::Naive => return Err(Error::Config("the naive estimator has no tilting parameter".into())),
    })
}

fn cmd_solve_theta(cfg: RunConfig) -> Result<i32> {
    let model = cfg.model()?;
    let kind = match cfg.family.as_deref() {
        Some(f) => TiltKind::parse(f).map_err(|_| Error::Config(format!("unknown family '{f}' (key 'family')")))?,
        None => default_family(&model, &cfg)?,
    };
    let corner = cfg.corner(model.dim())?;
    let event = model.prepare_event(&corner)?;
    let mut s = make_stream(cfg.seed.unwrap_or(0), SOLVER_STREAM);
    let pilot = cfg.pilot_config();
    let solver = cfg.solver.as_deref().unwrap_or("saa");
    let sol = match (solver, kind) {
        ("saa", TiltKind::HazardRate) => solve_hrt_theta(&model, &event, &pilot, &mut s)?,
        ("asymptotic", TiltKind::HazardRate) => hrt_theta_asymptotic(&model, &event)?,
        ("saa", _) => solve_theta_saa(&Scheme::new(model.clone(), event, kind)?, &pilot, &mut s)?,
        ("tallis", TiltKind::MvnShift) => {
            let t = model.transform_event(&corner)?;
            let sigma = model.as_copula().and_then(|c| c.sigma()).ok_or_else(|| Error::Config("tallis needs a gaussian copula".into()))?;
            solve_theta_gaussian_tallis(sigma, t.a_star.as_deref().unwrap(), t.direction)?
        }
        ("large-deviation", TiltKind::TGammaNormal) => {
            let scheme = Scheme::new(model.clone(), event, kind)?;
            let mut sol = solve_theta_large_deviation(scheme.family())?;
            sol.reflected = scheme.reflected();
            sol
        }
        (s @ ("tallis" | "large-deviation" | "asymptotic"), k) => {
            return Err(Error::Config(format!("solver '{s}' does not apply to family '{}'", k.label())))
        }
        (s, _) => return Err(Error::Config(format!("unknown solver '{s}' (key 'solver')"))),
    };
    let report = SolveReport { family: kind.label(), solver, solution: &sol };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
    println!("{text}");
    if let Some(p) = &cfg.json {
        write_json(p, &report)?;
    }
    Ok(if sol.converged { EXIT_OK } else { EXIT_NONCONVERGENCE })
}

#[derive(Serialize)]
struct OracleReport {
    probability: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<oracle::OracleEstimate>,
}

fn cmd_oracle(cfg: RunConfig) -> Result<i32> {
    let model = cfg.model()?;
    let mut out = std::io::stdout().lock();
    let report = if let Some(u0) = cfg.u0 {
        let delta = match model.as_copula().map(|c| c.family()) {
            Some(CopulaFamily::Clayton { delta, .. }) => *delta,
            _ => return Err(Error::Config("u0 applies to the clayton copula only".into())),
        };
        let p = oracle::clayton_orthant_prob(delta, &vec![u0; model.dim()], cfg.direction()?)?;
        writeln!(out, "{p:.6e}").map_err(|e| Error::Io(e.to_string()))?;
        OracleReport { probability: p, monte_carlo: None }
    } else if let Model::Vine(rv) = &model {
        let p = cfg.p.ok_or_else(|| Error::Config("vine oracle needs key 'p'".into()))?;
        if cfg.direction()? != crate::copulas::Direction::Upper {
            return Err(Error::Config("the vine oracle covers upper corners only".into()));
        }
        let est = oracle::vine_corner_prob(rv, p, cfg.oracle_n.unwrap_or(4_000_000), cfg.seed.unwrap_or(0));
        writeln!(out, "{:.6e}  (99.9% CI [{:.6e}, {:.6e}], n = {})", est.estimate, est.lower(), est.upper(), est.n)
            .map_err(|e| Error::Io(e.to_string()))?;
        OracleReport { probability: est.estimate, monte_carlo: Some(est) }
    } else {
        let p = oracle::corner_prob(&model, &cfg.corner(model.dim())?)?;
        writeln!(out, "{p:.6e}").map_err(|e| Error::Io(e.to_string()))?;
        OracleReport { probability: p, monte_carlo: None }
    };
    if let Some(p) = &cfg.json {
        write_json(p, &report)?;
    }
    Ok(EXIT_OK)
}
