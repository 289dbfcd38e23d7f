//! Large-deviation tilt for the t family: argmin of ψ over the positive orthant.

use super::family::{TiltFamily, TiltKind};
use super::{SolveMethod, TiltSolution};
use crate::error::{domain, Error, Result};
use nalgebra::{DMatrix, DVector};

/// Minimizing ψ over θ ≥ 0 is the quadratic program max θ′a* − ½θ′Σθ, θ ≥ 0,
/// solved here by enumerating active sets.
pub(crate) fn ld_theta(family: &TiltFamily) -> Result<Vec<f64>> {
    if family.kind() != TiltKind::TGammaNormal {
        return Err(Error::Config("the large-deviation tilt applies to the t-gamma-normal family".into()));
    }
    let a = family.a_star();
    if a.iter().any(|&x| !(x > 0.0)) {
        return domain(format!("large-deviation tilt needs a positive a*, got {a:?}"));
    }
    let s = family.sigma().unwrap();
    let d = a.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u64..(1u64 << d) {
        let free: Vec<usize> = (0..d).filter(|i| mask >> i & 1 == 1).collect();
        let k = free.len();
        let sf = DMatrix::from_fn(k, k, |i, j| s[(free[i], free[j])]);
        let af = DVector::from_iterator(k, free.iter().map(|&i| a[i]));
        let Some(ch) = sf.cholesky() else { continue };
        let x = ch.solve(&af);
        if x.iter().any(|&v| v < -1e-14) {
            continue;
        }
        let mut th = vec![0.0; d];
        for (j, &i) in free.iter().enumerate() {
            th[i] = x[j].max(0.0);
        }
        let kkt = (0..d).filter(|i| mask >> i & 1 == 0).all(|i| {
            let g: f64 = a[i] - (0..d).map(|j| s[(i, j)] * th[j]).sum::<f64>();
            g <= 1e-12
        });
        if !kkt {
            continue;
        }
        let val: f64 = (0..d).map(|i| th[i] * a[i]).sum::<f64>()
            - 0.5 * (0..d).map(|i| (0..d).map(|j| th[i] * s[(i, j)] * th[j]).sum::<f64>()).sum::<f64>();
        if best.as_ref().map_or(true, |(v, _)| val > *v) {
            best = Some((val, th));
        }
    }
    best.map(|b| b.1).ok_or_else(|| Error::NonConvergence("no feasible active set for the large-deviation tilt".into()))
}

pub fn solve_theta_large_deviation(family: &TiltFamily) -> Result<TiltSolution> {
    let theta = ld_theta(family)?;
    family.psi(&theta)?;
    // projected gradient on the orthant
    let g = family.grad_psi(&theta)?;
    let res = g.iter().zip(&theta).map(|(gi, ti)| if *ti > 0.0 { gi.abs() } else { (-gi).max(0.0) }).fold(0.0, f64::max);
    Ok(TiltSolution {
        theta,
        g_hat: f64::NAN,
        residual_norm: res,
        iterations: 0,
        pilot_size: 0,
        pilot_hits: 0,
        method: SolveMethod::LargeDeviation,
        converged: true,
        reflected: false,
    })
}
