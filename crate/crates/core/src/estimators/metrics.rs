use super::EstimateResult;
use crate::error::{domain, Result};

/// sd(a)/sd(b).
pub fn sd_eff(a: &EstimateResult, b: &EstimateResult) -> Result<f64> {
    if !(b.sd > 0.0) {
        return domain("sd_eff needs a positive denominator standard deviation");
    }
    Ok(a.sd / b.sd)
}

/// (var/u²)·(1/M)·seconds.
pub fn wnrv(r: &EstimateResult, u_ref: f64) -> Result<f64> {
    if !(u_ref > 0.0) {
        return domain(format!("wnrv needs a positive reference probability, got {u_ref}"));
    }
    Ok(r.sd * r.sd / (u_ref * u_ref) / r.reps as f64 * r.seconds)
}
