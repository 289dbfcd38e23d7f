//! t rectangle probabilities as a normal mixture over the chi-square law of Y,
//! integrated in x = ln(Y/ν).

use super::gaussian::mvn_sf;
use super::quad::integrate;
use crate::copulas::Direction;
use crate::error::{param, Error, Result};
use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

pub fn rect_prob_t(nu: f64, sigma: &DMatrix<f64>, a: &[f64], direction: Direction) -> Result<f64> {
    if !(nu > 0.0 && nu.is_finite()) {
        return param(format!("nu must be positive, got {nu}"));
    }
    let d = a.len();
    if d > 3 {
        return Err(Error::Shape(format!("t rectangle oracle supports d ≤ 3, got {d}")));
    }
    let b: Vec<f64> = match direction {
        Direction::Upper => a.to_vec(),
        Direction::Lower => a.iter().map(|x| -x).collect(),
    };
    let zero = vec![0.0; d];
    mvn_sf(&zero, sigma, &b)?;
    let k = 0.5 * nu;
    let c = k * (0.5 * nu).ln() - ln_gamma(k);
    let log_dens = |x: f64| c + k * x - 0.5 * nu * x.exp();
    let peak = log_dens(0.0);
    let cut = peak - 745.0;
    let find = |mut inside: f64, mut outside: f64| {
        for _ in 0..200 {
            let m = 0.5 * (inside + outside);
            if log_dens(m) > cut {
                inside = m;
            } else {
                outside = m;
            }
        }
        outside
    };
    let mut lo_out = -1.0;
    while log_dens(lo_out) > cut {
        lo_out *= 2.0;
    }
    let mut hi_out = 1.0;
    while log_dens(hi_out) > cut {
        hi_out *= 2.0;
    }
    let (lo, hi) = (find(0.0, lo_out), find(0.0, hi_out));
    let f = |x: f64| {
        let ld = log_dens(x);
        if ld < -745.0 {
            return 0.0;
        }
        let r = (0.5 * x).exp();
        let bs: Vec<f64> = b.iter().map(|bi| bi * r).collect();
        ld.exp() * mvn_sf(&zero, sigma, &bs).unwrap_or(0.0)
    };
    Ok(integrate(&f, lo, 0.0, 1e-10, 1e-300) + integrate(&f, 0.0, hi, 1e-10, 1e-300))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copulas::equicorrelation;
    use crate::randkit::StudentT;

    #[test]
    fn symmetric_and_independent_cases() {
        let p = rect_prob_t(5.0, &equicorrelation(2, 0.0), &[0.0, 0.0], Direction::Upper).unwrap();
        assert!((p - 0.25).abs() < 1e-9);
        // one dimension reduces to the t survival function
        let s1 = DMatrix::from_element(1, 1, 1.0);
        let p = rect_prob_t(3.0, &s1, &[2.5], Direction::Upper).unwrap();
        let want = StudentT::new(3.0).unwrap().sf(2.5);
        assert!((p - want).abs() < 1e-10, "{p} {want}");
    }

    #[test]
    fn normal_limit() {
        let s = equicorrelation(2, 0.0);
        let t = rect_prob_t(1e6, &s, &[1.282, 1.282], Direction::Upper).unwrap();
        let g = super::super::gaussian::rect_prob_gaussian(&s, &[1.282, 1.282], Direction::Upper).unwrap();
        assert!((t - g).abs() < 1e-4);
    }
}
