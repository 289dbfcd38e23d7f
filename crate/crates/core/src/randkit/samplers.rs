use super::stream::RngStream;
use crate::error::{param, Error, Result};
use nalgebra::DMatrix;
use rand_distr::{Distribution, Gamma};

/// Quantile of the density t·e^{t v}/(e^t − 1) on (0,1).
#[inline]
pub fn trunc_exp_quantile(u: f64, t: f64) -> f64 {
    let v = if t.abs() < 1e-6 {
        u + 0.5 * t * u * (1.0 - u)
    } else if t > 0.0 {
        1.0 + ((1.0 - u) * (-t).exp_m1()).ln_1p() / t
    } else {
        (u * t.exp_m1()).ln_1p() / t
    };
    v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Mean of the same density: 1/(1 − e^{−t}) − 1/t.
pub fn trunc_exp_mean(t: f64) -> f64 {
    if t.abs() < 0.1 {
        let t2 = t * t;
        0.5 + t / 12.0 - t * t2 / 720.0 + t * t2 * t2 / 30240.0 - t * t2 * t2 * t2 / 1209600.0
    } else {
        -1.0 / (-t).exp_m1() - 1.0 / t
    }
}

/// Draws from the truncated exponential on (0,1).
///
/// `conjugate = true` gives density ∝ e^{θv}; `conjugate = false` gives ∝ e^{−θv}.
pub fn sample_trunc_exp01(s: &mut RngStream, theta: f64, conjugate: bool) -> f64 {
    let t = if conjugate { theta } else { -theta };
    trunc_exp_quantile(s.uniform(), t)
}

/// Gamma(shape, 1) sampler; rates are applied by division.
#[derive(Clone, Debug)]
pub struct GammaSampler {
    shape: f64,
    dist: Gamma<f64>,
}

impl GammaSampler {
    pub fn new(shape: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return param(format!("gamma shape must be positive, got {shape}"));
        }
        let dist = Gamma::new(shape, 1.0).map_err(|e| Error::Parameter(e.to_string()))?;
        Ok(GammaSampler { shape, dist })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    #[inline]
    pub fn sample(&self, s: &mut RngStream, rate: f64) -> f64 {
        self.dist.sample(s) / rate
    }
}

pub fn sample_gamma(s: &mut RngStream, shape: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate.is_finite()) {
        return param(format!("gamma rate must be positive, got {rate}"));
    }
    Ok(GammaSampler::new(shape)?.sample(s, rate))
}

/// Lower Cholesky factor of a covariance matrix, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MvnFactor {
    d: usize,
    l: Vec<f64>,
}

impl MvnFactor {
    pub fn new(sigma: &DMatrix<f64>) -> Result<Self> {
        let d = sigma.nrows();
        if d == 0 || sigma.ncols() != d {
            return Err(Error::Shape(format!("covariance must be square, got {}x{}", d, sigma.ncols())));
        }
        for i in 0..d {
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Factorization("covariance is not symmetric".into()));
                }
            }
        }
        let tol = 1e-12 * sigma.trace();
        let mut l = vec![0.0; d * d];
        for j in 0..d {
            let mut piv = sigma[(j, j)];
            for k in 0..j {
                piv -= l[j * d + k] * l[j * d + k];
            }
            if !(piv > tol) {
                return Err(Error::Factorization(format!("matrix not positive definite (pivot {j} = {piv:e})")));
            }
            let ljj = piv.sqrt();
            l[j * d + j] = ljj;
            for i in j + 1..d {
                let mut acc = sigma[(i, j)];
                for k in 0..j {
                    acc -= l[i * d + k] * l[j * d + k];
                }
                l[i * d + j] = acc / ljj;
            }
        }
        Ok(MvnFactor { d, l })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn l(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.d + j]
    }

    /// out = L z.
    #[inline]
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            let row = &self.l[i * d..i * d + i + 1];
            out[i] = row.iter().zip(z).map(|(a, b)| a * b).sum();
        }
    }

    /// Draws MN(mean, Σ) into `out`; `z` is scratch of length d.
    #[inline]
    pub fn sample_into(&self, s: &mut RngStream, mean: &[f64], z: &mut [f64], out: &mut [f64]) {
        for zi in z.iter_mut() {
            *zi = s.normal();
        }
        self.apply(z, out);
        for (o, m) in out.iter_mut().zip(mean) {
            *o += m;
        }
    }
}

pub fn sample_mvn(s: &mut RngStream, mean: &[f64], factor: &MvnFactor) -> Result<Vec<f64>> {
    if mean.len() != factor.dim() {
        return Err(Error::Shape(format!("mean has length {}, covariance is {}-d", mean.len(), factor.dim())));
    }
    let mut z = vec![0.0; mean.len()];
    let mut out = vec![0.0; mean.len()];
    factor.sample_into(s, mean, &mut z, &mut out);
    Ok(out)
}
