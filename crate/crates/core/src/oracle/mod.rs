//! Reference probabilities: quadrature for normal and t rectangles, closed forms for
//! Clayton orthants, and Monte Carlo intervals for vines.

pub mod clayton;
pub mod gaussian;
pub mod quad;
pub mod student_t;
pub mod vine;

pub use clayton::{clayton_corner_prob, clayton_orthant_prob};
pub use gaussian::{mvn_sf, rect_prob_gaussian};
pub use student_t::rect_prob_t;
pub use vine::{vine_corner_prob, vine_corner_probs, OracleEstimate};

use crate::copulas::{CopulaFamily, CornerEvent, Model};
use crate::error::{Error, Result};

/// Deterministic corner probability for a parametric copula model.
pub fn corner_prob(model: &Model, event: &CornerEvent) -> Result<f64> {
    let t = model.transform_event(event)?;
    let a = t.a_star.unwrap();
    match model {
        Model::Copula(c) => match c.family() {
            CopulaFamily::Gaussian { sigma } => rect_prob_gaussian(sigma, &a, t.direction),
            CopulaFamily::StudentT { nu, sigma } => rect_prob_t(*nu, sigma, &a, t.direction),
            CopulaFamily::Clayton { delta, .. } => clayton_orthant_prob(*delta, &a, t.direction),
        },
        Model::Vine(_) => Err(Error::Config("vine probabilities have no deterministic oracle; use vine_corner_prob".into())),
    }
}
