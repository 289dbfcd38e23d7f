//! Crude and tilted estimators, the replication harness and efficiency metrics.

mod metrics;
mod replicate;
mod report;

pub use metrics::{sd_eff, wnrv};
pub use replicate::{
    estimate, estimate_crude, estimate_hrt, estimate_is, replicate, replicate_in, scheme_for, solve_for, EventSpec, ExperimentConfig,
    HrtRule, RepStat, ThetaSource, SOLVER_STREAM,
};
pub use report::{write_csv, CsvRow};

use crate::error::{Error, Result};
use crate::tilting::TiltSolution;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Naive,
    IsT1,
    IsT2,
    IsT3,
    IsLd,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "naive" | "crude" => Method::Naive,
            "is-t1" => Method::IsT1,
            "is-t2" => Method::IsT2,
            "is-t3" => Method::IsT3,
            "is-ld" => Method::IsLd,
            o => return Err(Error::Config(format!("unknown method '{o}'"))),
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::IsT1 => "is-t1",
            Method::IsT2 => "is-t2",
            Method::IsT3 => "is-t3",
            Method::IsLd => "is-ld",
        }
    }

    pub const ALL: [Method; 5] = [Method::Naive, Method::IsT1, Method::IsT2, Method::IsT3, Method::IsLd];
}

/// How the crude estimator draws from P.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrudeRoute {
    /// MVN / normal-gamma mixture / Marshall–Olkin construction
    #[default]
    Direct,
    /// sequential conditional inverse of i.i.d. uniforms
    ConditionalInverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdKind {
    AcrossReplications,
    /// M = 1: the within-run standard error of the mean
    WithinRun,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub method: Method,
    pub family: String,
    pub params: String,
    pub p_label: String,
    pub u_hat: f64,
    pub sd: f64,
    pub sd_kind: SdKind,
    pub n: usize,
    pub reps: usize,
    pub seconds: f64,
    pub wnrv: Option<f64>,
    pub theta: Vec<f64>,
    pub seed: u64,
    pub hits: u64,
    pub max_weight: f64,
    pub solution: Option<TiltSolution>,
    pub solve_seconds: f64,
}

impl EstimateResult {
    /// Standard error of û over all M replications.
    pub fn std_err(&self) -> f64 {
        match self.sd_kind {
            SdKind::AcrossReplications => self.sd / (self.reps as f64).sqrt(),
            SdKind::WithinRun => self.sd,
        }
    }

    pub fn with_wnrv(mut self, u_ref: f64) -> Result<Self> {
        self.wnrv = Some(wnrv(&self, u_ref)?);
        Ok(self)
    }
}
