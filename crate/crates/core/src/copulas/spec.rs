use super::event::PreparedEvent;
use crate::error::{param, Error, Result};
use crate::randkit::special::{norm_cdf, norm_ppf, norm_sf, softplus};
use crate::randkit::{MarginSpec, MvnFactor, StudentT};
use nalgebra::DMatrix;

#[derive(Clone, Debug, PartialEq)]
pub enum CopulaFamily {
    Gaussian { sigma: DMatrix<f64> },
    StudentT { nu: f64, sigma: DMatrix<f64> },
    Clayton { delta: f64, d: usize },
}

/// Scale on which the corner thresholds a* live for each family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatentScale {
    Normal,
    StudentT,
    Uniform,
}

#[derive(Clone, Debug)]
pub struct CopulaSpec {
    family: CopulaFamily,
    margins: Vec<MarginSpec>,
    factor: Option<MvnFactor>,
    // t_{ν+j}, j = 0..d
    t_chain: Vec<StudentT>,
}

fn check_corr(sigma: &DMatrix<f64>) -> Result<MvnFactor> {
    let d = sigma.nrows();
    if sigma.ncols() != d {
        return Err(Error::Shape("correlation matrix must be square".into()));
    }
    for i in 0..d {
        if (sigma[(i, i)] - 1.0).abs() > 1e-12 {
            return param(format!("correlation matrix needs unit diagonal, entry {i} is {}", sigma[(i, i)]));
        }
    }
    MvnFactor::new(sigma)
}

pub fn equicorrelation(d: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho })
}

impl CopulaSpec {
    pub fn gaussian(sigma: DMatrix<f64>, margins: Vec<MarginSpec>) -> Result<Self> {
        let factor = check_corr(&sigma)?;
        check_margins(sigma.nrows(), &margins)?;
        Ok(CopulaSpec { family: CopulaFamily::Gaussian { sigma }, margins, factor: Some(factor), t_chain: vec![] })
    }

    pub fn student_t(nu: f64, sigma: DMatrix<f64>, margins: Vec<MarginSpec>) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return param(format!("t copula needs nu > 0, got {nu}"));
        }
        let factor = check_corr(&sigma)?;
        let d = sigma.nrows();
        check_margins(d, &margins)?;
        let t_chain = (0..d).map(|j| StudentT::new(nu + j as f64)).collect::<Result<Vec<_>>>()?;
        Ok(CopulaSpec { family: CopulaFamily::StudentT { nu, sigma }, margins, factor: Some(factor), t_chain })
    }

    pub fn clayton(delta: f64, d: usize, margins: Vec<MarginSpec>) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return param(format!("clayton copula needs delta > 0, got {delta}"));
        }
        if d < 2 {
            return param("clayton copula needs d >= 2");
        }
        check_margins(d, &margins)?;
        Ok(CopulaSpec { family: CopulaFamily::Clayton { delta, d }, margins, factor: None, t_chain: vec![] })
    }

    pub fn family(&self) -> &CopulaFamily {
        &self.family
    }

    pub fn margins(&self) -> &[MarginSpec] {
        &self.margins
    }

    pub fn dim(&self) -> usize {
        self.margins.len()
    }

    pub fn factor(&self) -> Option<&MvnFactor> {
        self.factor.as_ref()
    }

    pub fn sigma(&self) -> Option<&DMatrix<f64>> {
        match &self.family {
            CopulaFamily::Gaussian { sigma } | CopulaFamily::StudentT { sigma, .. } => Some(sigma),
            CopulaFamily::Clayton { .. } => None,
        }
    }

    pub fn latent_scale(&self) -> LatentScale {
        match self.family {
            CopulaFamily::Gaussian { .. } => LatentScale::Normal,
            CopulaFamily::StudentT { .. } => LatentScale::StudentT,
            CopulaFamily::Clayton { .. } => LatentScale::Uniform,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            CopulaFamily::Gaussian { .. } => "gaussian",
            CopulaFamily::StudentT { .. } => "t",
            CopulaFamily::Clayton { .. } => "clayton",
        }
    }

    pub fn params_label(&self) -> String {
        let off = |s: &DMatrix<f64>| {
            let d = s.nrows();
            let mut v = vec![];
            for i in 0..d {
                for j in i + 1..d {
                    v.push(format!("{}", s[(i, j)]));
                }
            }
            v.join("/")
        };
        match &self.family {
            CopulaFamily::Gaussian { sigma } => format!("rho={}", off(sigma)),
            CopulaFamily::StudentT { nu, sigma } => format!("nu={nu};rho={}", off(sigma)),
            CopulaFamily::Clayton { delta, d } => format!("delta={delta};d={d}"),
        }
    }

    pub fn t_law(&self, j: usize) -> &StudentT {
        &self.t_chain[j]
    }

    #[inline]
    pub fn latent_cdf(&self, x: f64) -> f64 {
        match self.latent_scale() {
            LatentScale::Normal => norm_cdf(x),
            LatentScale::StudentT => self.t_chain[0].cdf(x),
            LatentScale::Uniform => x,
        }
    }

    #[inline]
    pub fn latent_sf(&self, x: f64) -> f64 {
        match self.latent_scale() {
            LatentScale::Normal => norm_sf(x),
            LatentScale::StudentT => self.t_chain[0].sf(x),
            LatentScale::Uniform => 1.0 - x,
        }
    }

    /// Latent value with lower-tail probability `cdf` and upper-tail probability `sf`
    /// (whichever is smaller is used, to keep tail accuracy).
    pub fn latent_quantile2(&self, cdf: f64, sf: f64) -> f64 {
        match self.latent_scale() {
            LatentScale::Normal => {
                if sf < cdf {
                    -norm_ppf(sf)
                } else {
                    norm_ppf(cdf)
                }
            }
            LatentScale::StudentT => {
                if sf < cdf {
                    self.t_chain[0].isf(sf)
                } else {
                    self.t_chain[0].quantile(cdf)
                }
            }
            LatentScale::Uniform => cdf,
        }
    }

    /// Sequential conditional inverse V ↦ latent. When `gate` is given the loop stops at
    /// the first coordinate outside the event and returns false.
    #[inline]
    pub fn cim_latent(&self, v: &[f64], out: &mut [f64], scratch: &mut [f64], gate: Option<&PreparedEvent>) -> bool {
        let d = self.dim();
        match &self.family {
            CopulaFamily::Gaussian { .. } => {
                let f = self.factor.as_ref().unwrap();
                for j in 0..d {
                    scratch[j] = norm_ppf(v[j]);
                    let mut x = 0.0;
                    for k in 0..=j {
                        x += f.l(j, k) * scratch[k];
                    }
                    out[j] = x;
                    if let Some(g) = gate {
                        if !g.passes(j, x) {
                            return false;
                        }
                    }
                }
            }
            CopulaFamily::StudentT { nu, .. } => {
                let f = self.factor.as_ref().unwrap();
                let mut ss = 0.0;
                for j in 0..d {
                    let q = self.t_chain[j].quantile(v[j]);
                    let sj = q * ((nu + ss) / (nu + j as f64)).sqrt();
                    ss += sj * sj;
                    scratch[j] = sj;
                    let mut x = 0.0;
                    for k in 0..=j {
                        x += f.l(j, k) * scratch[k];
                    }
                    out[j] = x;
                    if let Some(g) = gate {
                        if !g.passes(j, x) {
                            return false;
                        }
                    }
                }
            }
            CopulaFamily::Clayton { delta, .. } => {
                let delta = *delta;
                let mut l = 0.0; // ln(1 + S)
                for j in 0..d {
                    let c = delta / (1.0 + j as f64 * delta);
                    let e = (-c * v[j].ln()).exp_m1().ln();
                    let u = (-softplus(l + e) / delta).exp();
                    l += softplus(e);
                    out[j] = u;
                    if let Some(g) = gate {
                        if !g.passes(j, u) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Inverse of `cim_latent`.
    pub fn cim_forward_latent(&self, latent: &[f64], v: &mut [f64]) {
        let d = self.dim();
        match &self.family {
            CopulaFamily::Gaussian { .. } => {
                let f = self.factor.as_ref().unwrap();
                let mut z = vec![0.0; d];
                for j in 0..d {
                    let mut acc = latent[j];
                    for k in 0..j {
                        acc -= f.l(j, k) * z[k];
                    }
                    z[j] = acc / f.l(j, j);
                    v[j] = norm_cdf(z[j]);
                }
            }
            CopulaFamily::StudentT { nu, .. } => {
                let f = self.factor.as_ref().unwrap();
                let mut s = vec![0.0; d];
                let mut ss = 0.0;
                for j in 0..d {
                    let mut acc = latent[j];
                    for k in 0..j {
                        acc -= f.l(j, k) * s[k];
                    }
                    s[j] = acc / f.l(j, j);
                    let q = s[j] * ((nu + j as f64) / (nu + ss)).sqrt();
                    ss += s[j] * s[j];
                    v[j] = self.t_chain[j].cdf(q);
                }
            }
            CopulaFamily::Clayton { delta, .. } => {
                let delta = *delta;
                let mut l = 0.0;
                for j in 0..d {
                    let c = delta / (1.0 + j as f64 * delta);
                    let e = (-delta * latent[j].ln()).exp_m1().ln() - l;
                    v[j] = (-softplus(e) / c).exp();
                    l += softplus(e);
                }
            }
        }
    }

    pub fn rosenblatt_inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_unit(v)?;
        let d = self.dim();
        let mut lat = vec![0.0; d];
        let mut scratch = vec![0.0; d];
        self.cim_latent(v, &mut lat, &mut scratch, None);
        Ok(lat.iter().map(|&x| self.latent_cdf(x)).collect())
    }

    pub fn rosenblatt_forward(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_unit(u)?;
        let lat: Vec<f64> = u.iter().map(|&x| self.latent_quantile2(x, 1.0 - x)).collect();
        let mut v = vec![0.0; self.dim()];
        self.cim_forward_latent(&lat, &mut v);
        Ok(v)
    }

    fn check_unit(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Shape(format!("expected a {}-vector, got length {}", self.dim(), v.len())));
        }
        if v.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::Domain("uniform coordinates must lie in (0,1)".into()));
        }
        Ok(())
    }
}

fn check_margins(d: usize, m: &[MarginSpec]) -> Result<()> {
    if m.len() != d {
        return Err(Error::Shape(format!("{} margins supplied for a {d}-dimensional copula", m.len())));
    }
    Ok(())
}
