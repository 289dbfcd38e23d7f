//! Exponential tilting: families, the sampling scheme, and solvers for the optimal θ.

pub mod family;
pub mod large_deviation;
mod newton;
pub mod saa;
pub mod scheme;
pub mod tallis;

pub use family::{PreparedTheta, TiltFamily, TiltKind, TiltedSample};
pub use large_deviation::solve_theta_large_deviation;
pub use saa::{
    first_order_check, g_hat, log_g_hat_derivatives, hrt_theta_asymptotic, minimize_g_hat, moment_match, pre_tilt, solve_hrt_theta, solve_theta_saa,
    FocCheck, Pilot, PilotConfig,
};
pub use scheme::{Scheme, Workspace};
pub use tallis::{solve_theta_gaussian_tallis, truncated_mvn_first_moment};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Saa,
    TallisNewton,
    LargeDeviation,
    /// closed-form hazard-rate rule
    Asymptotic,
}

/// An optimal tilting point with solver diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltSolution {
    pub theta: Vec<f64>,
    /// second moment Ĝ at θ (deterministic G for the Tallis solver)
    pub g_hat: f64,
    /// ‖∇ ln Ĝ(θ)‖, i.e. ‖∇Ĝ‖/Ĝ
    pub residual_norm: f64,
    pub iterations: usize,
    pub pilot_size: usize,
    pub pilot_hits: usize,
    pub method: SolveMethod,
    pub converged: bool,
    pub reflected: bool,
}
