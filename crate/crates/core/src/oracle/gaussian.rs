//! Normal rectangle probabilities by nested one-dimensional quadrature over the
//! sequential conditional decomposition.

use super::quad::integrate;
use crate::copulas::Direction;
use crate::error::{Error, Result};
use crate::randkit::special::{norm_pdf, norm_sf};
use nalgebra::DMatrix;

const REL_TOL: f64 = 1e-11;

/// P(X > b) for X ~ MN(mean, cov), with relative accuracy around 1e-10.
pub fn mvn_sf(mean: &[f64], cov: &DMatrix<f64>, b: &[f64]) -> Result<f64> {
    let d = b.len();
    if mean.len() != d || cov.nrows() != d || cov.ncols() != d {
        return Err(Error::Shape("mean, covariance and thresholds disagree in dimension".into()));
    }
    if d == 0 {
        return Ok(1.0);
    }
    if cov.clone().cholesky().is_none() {
        return Err(Error::Factorization("covariance is not positive definite".into()));
    }
    Ok(sf_rec(mean, cov, b, 1e-300))
}

fn sf_rec(mean: &[f64], cov: &DMatrix<f64>, b: &[f64], abs_tol: f64) -> f64 {
    let d = b.len();
    let s1 = cov[(0, 0)].sqrt();
    let t0 = (b[0] - mean[0]) / s1;
    if d == 1 {
        return norm_sf(t0);
    }
    if t0 > 38.5 {
        return 0.0;
    }
    let m = d - 1;
    let c21: Vec<f64> = (1..d).map(|i| cov[(i, 0)] / cov[(0, 0)]).collect();
    let ccov = DMatrix::from_fn(m, m, |i, j| cov[(i + 1, j + 1)] - cov[(i + 1, 0)] * cov[(0, j + 1)] / cov[(0, 0)]);
    let rest = &b[1..];
    let f = |t: f64| {
        let dens = norm_pdf(t);
        if dens == 0.0 {
            return 0.0;
        }
        let x = mean[0] + s1 * t;
        let cm: Vec<f64> = (0..m).map(|i| mean[i + 1] + c21[i] * (x - mean[0])).collect();
        dens * sf_rec(&cm, &ccov, rest, abs_tol * 1e-3)
    };
    let lo = t0.max(-38.5);
    let hi = lo.max(0.0) + 38.5;
    // split near the start where tail mass concentrates
    let mid = (lo + 8.0).min(hi);
    integrate(&f, lo, mid, REL_TOL, abs_tol) + integrate(&f, mid, hi, REL_TOL, abs_tol)
}

/// Upper (X > a) or lower (X < a) orthant probability for X ~ MN(0, Σ).
pub fn rect_prob_gaussian(sigma: &DMatrix<f64>, a: &[f64], direction: Direction) -> Result<f64> {
    let d = a.len();
    if d > 4 {
        return Err(Error::Shape(format!("gaussian rectangle oracle supports d ≤ 4, got {d}")));
    }
    let zero = vec![0.0; d];
    match direction {
        Direction::Upper => mvn_sf(&zero, sigma, a),
        Direction::Lower => mvn_sf(&zero, sigma, &a.iter().map(|x| -x).collect::<Vec<_>>()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copulas::equicorrelation;

    #[test]
    fn orthant_formula() {
        let p = rect_prob_gaussian(&equicorrelation(2, 0.5), &[0.0, 0.0], Direction::Upper).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-10);
        let p = rect_prob_gaussian(&equicorrelation(2, 0.0), &[0.0, 0.0], Direction::Upper).unwrap();
        assert!((p - 0.25).abs() < 1e-12);
        // trivariate orthant 1/8 + (3 asin ρ)/(4π)
        let p = rect_prob_gaussian(&equicorrelation(3, 0.3), &[0.0; 3], Direction::Upper).unwrap();
        let want = 0.125 + 3.0 * 0.3f64.asin() / (4.0 * std::f64::consts::PI);
        assert!((p - want).abs() < 1e-9, "{p} {want}");
    }

    #[test]
    fn independent_product_in_tail() {
        let a = [4.5, 3.0];
        let p = rect_prob_gaussian(&equicorrelation(2, 0.0), &a, Direction::Upper).unwrap();
        let want = norm_sf(4.5) * norm_sf(3.0);
        assert!(((p - want) / want).abs() < 1e-9);
    }

    #[test]
    fn lower_is_reflected_upper() {
        let s = equicorrelation(2, -0.4);
        let u = rect_prob_gaussian(&s, &[1.0, 0.5], Direction::Upper).unwrap();
        let l = rect_prob_gaussian(&s, &[-1.0, -0.5], Direction::Lower).unwrap();
        assert!((u - l).abs() < 1e-14);
    }

    #[test]
    fn non_pd_rejected() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.2, 1.2, 1.0]);
        assert!(matches!(rect_prob_gaussian(&s, &[0.0, 0.0], Direction::Upper), Err(Error::Factorization(_))));
    }
}
