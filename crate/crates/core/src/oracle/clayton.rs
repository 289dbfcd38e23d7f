//! Clayton orthant probabilities in closed form.

use crate::copulas::Direction;
use crate::error::{domain, param, Result};

/// C(u) = (Σ u_i^{−δ} − (d−1))^{−1/δ}, evaluated as exp(−ln(1 + Σ (u_i^{−δ} − 1))/δ).
fn clayton_cdf(delta: f64, u: &[f64]) -> f64 {
    if u.iter().any(|&x| x <= 0.0) {
        return 0.0;
    }
    let s: f64 = u.iter().map(|&x| (-delta * x.ln()).exp_m1()).sum();
    (-s.ln_1p() / delta).exp()
}

/// P(U > u) or P(U < u) for a d-dimensional Clayton copula.
pub fn clayton_orthant_prob(delta: f64, u: &[f64], direction: Direction) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return param(format!("delta must be positive, got {delta}"));
    }
    if u.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return domain("thresholds must lie in [0, 1]");
    }
    let d = u.len();
    if direction == Direction::Lower {
        return Ok(clayton_cdf(delta, u));
    }
    let mut total = 0.0;
    let mut sub = Vec::with_capacity(d);
    for mask in 0u64..(1u64 << d) {
        sub.clear();
        sub.extend((0..d).filter(|i| mask >> i & 1 == 1).map(|i| u[i]));
        let sign = if sub.len() % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * if sub.is_empty() { 1.0 } else { clayton_cdf(delta, &sub) };
    }
    Ok(total.max(0.0))
}

/// Equal upper corner in two dimensions: 1 − 2u₀ + (2u₀^{−δ} − 1)^{−1/δ}.
pub fn clayton_corner_prob(delta: f64, u0: f64) -> Result<f64> {
    clayton_orthant_prob(delta, &[u0, u0], Direction::Upper)
}
