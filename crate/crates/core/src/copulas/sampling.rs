use super::event::{CornerEvent, PreparedEvent};
use super::spec::{CopulaFamily, CopulaSpec, LatentScale};
use super::vine::RVineSpec;
use crate::error::{domain, Error, Result};
use crate::randkit::{GammaSampler, MarginKind, MarginSpec, RngStream};

/// The probability model P: a parametric copula or an R-vine, with margins.
#[derive(Clone, Debug)]
pub enum Model {
    Copula(CopulaSpec),
    Vine(RVineSpec),
}

impl From<CopulaSpec> for Model {
    fn from(c: CopulaSpec) -> Self {
        Model::Copula(c)
    }
}

impl From<RVineSpec> for Model {
    fn from(v: RVineSpec) -> Self {
        Model::Vine(v)
    }
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Copula(c) => c.dim(),
            Model::Vine(v) => v.dim(),
        }
    }

    pub fn margins(&self) -> &[MarginSpec] {
        match self {
            Model::Copula(c) => c.margins(),
            Model::Vine(v) => v.margins(),
        }
    }

    pub fn latent_scale(&self) -> LatentScale {
        match self {
            Model::Copula(c) => c.latent_scale(),
            Model::Vine(_) => LatentScale::Uniform,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Copula(c) => c.name(),
            Model::Vine(_) => "rvine",
        }
    }

    pub fn params_label(&self) -> String {
        match self {
            Model::Copula(c) => c.params_label(),
            Model::Vine(v) => format!("d={};edges={}", v.dim(), v.edges().len()),
        }
    }

    pub fn as_copula(&self) -> Option<&CopulaSpec> {
        match self {
            Model::Copula(c) => Some(c),
            Model::Vine(_) => None,
        }
    }

    /// Scratch length needed by `cim_latent`.
    pub fn scratch_len(&self) -> usize {
        match self {
            Model::Copula(c) => c.dim(),
            Model::Vine(v) => v.n_slots(),
        }
    }

    #[inline]
    pub fn cim_latent(&self, v: &[f64], out: &mut [f64], scratch: &mut [f64], gate: Option<&PreparedEvent>) -> bool {
        match self {
            Model::Copula(c) => c.cim_latent(v, out, scratch, gate),
            Model::Vine(rv) => rv.inverse_into(v, out, scratch, gate),
        }
    }

    /// Copula-scale Rosenblatt inverse V ↦ U.
    pub fn rosenblatt_inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::Copula(c) => c.rosenblatt_inverse(v),
            Model::Vine(rv) => rv.rosenblatt_inverse(v),
        }
    }

    pub fn rosenblatt_forward(&self, u: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::Copula(c) => c.rosenblatt_forward(u),
            Model::Vine(rv) => rv.rosenblatt_forward(u),
        }
    }

    #[inline]
    pub fn latent_cdf(&self, x: f64) -> f64 {
        match self {
            Model::Copula(c) => c.latent_cdf(x),
            Model::Vine(_) => x,
        }
    }

    /// Latent vector to margin scale X.
    pub fn latent_to_x(&self, latent: &[f64], x: &mut [f64]) {
        let scale = self.latent_scale();
        let nu = match self {
            Model::Copula(c) => match c.family() {
                CopulaFamily::StudentT { nu, .. } => Some(*nu),
                _ => None,
            },
            _ => None,
        };
        for (i, m) in self.margins().iter().enumerate() {
            x[i] = match (scale, m.kind()) {
                (LatentScale::Normal, MarginKind::StdNormal) | (LatentScale::Uniform, MarginKind::Uniform01) => latent[i],
                (LatentScale::StudentT, MarginKind::StudentT { nu: mn }) if Some(mn) == nu => latent[i],
                _ => {
                    let u = self.latent_cdf(latent[i]).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                    m.quantile_unchecked(u)
                }
            };
        }
    }

    pub fn transform_event(&self, e: &CornerEvent) -> Result<CornerEvent> {
        let d = self.dim();
        if e.a.len() != d {
            return Err(Error::Shape(format!("event has {} thresholds, model is {d}-dimensional", e.a.len())));
        }
        let mut a_star = Vec::with_capacity(d);
        for (i, (&a, m)) in e.a.iter().zip(self.margins()).enumerate() {
            if !m.in_support(a) {
                return domain(format!("threshold a[{i}] = {a} lies outside the support of {}", m.label()));
            }
            let (cdf, sf) = (m.cdf(a), m.sf(a));
            if !(cdf > 0.0 && sf > 0.0) {
                return domain(format!("threshold a[{i}] = {a} sits on the edge of the support"));
            }
            a_star.push(match self {
                Model::Copula(c) => c.latent_quantile2(cdf, sf),
                Model::Vine(_) => cdf,
            });
        }
        Ok(CornerEvent { direction: e.direction, a: e.a.clone(), a_star: Some(a_star) })
    }

    pub fn prepare_event(&self, e: &CornerEvent) -> Result<PreparedEvent> {
        let t = self.transform_event(e)?;
        Ok(PreparedEvent::corner(t.direction, t.a_star.unwrap()))
    }
}

pub fn transform_event(c: &CopulaSpec, e: &CornerEvent) -> Result<CornerEvent> {
    Model::Copula(c.clone()).transform_event(e)
}

/// Direct P-measure sampler: MVN for Gaussian, normal/chi-square mixture for t,
/// Marshall–Olkin for Clayton, conditional inverse for vines.
#[derive(Clone, Debug)]
pub struct CrudeSampler {
    model: Model,
    gamma: Option<GammaSampler>,
}

impl CrudeSampler {
    pub fn new(model: Model) -> Result<Self> {
        let gamma = match &model {
            Model::Copula(c) => match c.family() {
                CopulaFamily::StudentT { nu, .. } => Some(GammaSampler::new(0.5 * nu)?),
                CopulaFamily::Clayton { delta, .. } => Some(GammaSampler::new(1.0 / delta)?),
                CopulaFamily::Gaussian { .. } => None,
            },
            Model::Vine(_) => None,
        };
        Ok(CrudeSampler { model, gamma })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// One draw on the latent scale. `scratch` needs `max(d, model.scratch_len())` entries.
    #[inline]
    pub fn draw_latent(&self, s: &mut RngStream, out: &mut [f64], scratch: &mut [f64]) {
        let d = self.model.dim();
        match &self.model {
            Model::Copula(c) => match c.family() {
                CopulaFamily::Gaussian { .. } => {
                    for z in scratch[..d].iter_mut() {
                        *z = s.normal();
                    }
                    c.factor().unwrap().apply(&scratch[..d], out);
                }
                CopulaFamily::StudentT { nu, .. } => {
                    let y = self.gamma.as_ref().unwrap().sample(s, 0.5);
                    for z in scratch[..d].iter_mut() {
                        *z = s.normal();
                    }
                    c.factor().unwrap().apply(&scratch[..d], out);
                    let r = (y / nu).sqrt();
                    for o in out.iter_mut() {
                        *o /= r;
                    }
                }
                CopulaFamily::Clayton { delta, .. } => {
                    let w = self.gamma.as_ref().unwrap().sample(s, 1.0);
                    for o in out.iter_mut() {
                        let v = s.uniform();
                        *o = (-(-v.ln() / w).ln_1p() / delta).exp();
                    }
                }
            },
            Model::Vine(rv) => {
                let mut v = [0.0; 64];
                for vi in v[..d].iter_mut() {
                    *vi = s.uniform();
                }
                rv.inverse_into(&v[..d], out, scratch, None);
            }
        }
    }
}

/// n draws on the margin scale.
pub fn sample_copula_crude(model: &Model, s: &mut RngStream, n: usize) -> Result<Vec<Vec<f64>>> {
    let cs = CrudeSampler::new(model.clone())?;
    let d = model.dim();
    let mut scratch = vec![0.0; d.max(model.scratch_len())];
    let mut lat = vec![0.0; d];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        cs.draw_latent(s, &mut lat, &mut scratch);
        let mut x = vec![0.0; d];
        model.latent_to_x(&lat, &mut x);
        out.push(x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copulas::{equicorrelation, Direction};
    use crate::randkit::make_stream;

    #[test]
    fn transform_examples() {
        let g = Model::Copula(CopulaSpec::gaussian(equicorrelation(2, 0.0), vec![MarginSpec::std_normal(); 2]).unwrap());
        let e = g.transform_event(&CornerEvent::upper(vec![1.857, 1.857])).unwrap();
        assert!(e.a_star.unwrap().iter().all(|&x| (x - 1.857).abs() < 1e-12));
        let ge = Model::Copula(
            CopulaSpec::gaussian(equicorrelation(2, 0.0), vec![MarginSpec::exponential(1.0).unwrap(); 2]).unwrap(),
        );
        let e = ge.transform_event(&CornerEvent::upper(vec![3.454, 3.454])).unwrap();
        assert!(e.a_star.unwrap().iter().all(|&x| (x - 1.857).abs() < 2e-3));
        let t = Model::Copula(
            CopulaSpec::student_t(5.0, equicorrelation(2, 0.0), vec![MarginSpec::student_t(2.0).unwrap(); 2]).unwrap(),
        );
        let e = t.transform_event(&CornerEvent::upper(vec![6.128, 6.128])).unwrap();
        let t2 = crate::randkit::StudentT::new(2.0).unwrap();
        let t5 = crate::randkit::StudentT::new(5.0).unwrap();
        let want = t5.quantile(t2.cdf(6.128));
        assert!(e.a_star.unwrap().iter().all(|&x| (x - want).abs() < 1e-8));
        assert!(ge.transform_event(&CornerEvent::upper(vec![-1.0, 1.0])).is_err());
        assert!(ge.transform_event(&CornerEvent::upper(vec![1.0])).is_err());
    }

    #[test]
    fn transform_monotone() {
        let c = Model::Copula(CopulaSpec::clayton(3.0, 2, vec![MarginSpec::student_t(3.0).unwrap(); 2]).unwrap());
        let mut prev = f64::NEG_INFINITY;
        for k in -20..20 {
            let a = k as f64 * 0.37;
            let s = c.transform_event(&CornerEvent::new(Direction::Lower, vec![a, a])).unwrap().a_star.unwrap()[0];
            assert!(s > prev);
            prev = s;
        }
    }

    #[test]
    fn crude_examples() {
        let n = 1_000_000;
        let g = Model::Copula(CopulaSpec::gaussian(equicorrelation(2, 0.0), vec![MarginSpec::std_normal(); 2]).unwrap());
        let x = sample_copula_crude(&g, &mut make_stream(11, 0), n).unwrap();
        let p = x.iter().filter(|v| v[0] > 1.282 && v[1] > 1.282).count() as f64 / n as f64;
        let u = crate::randkit::special::norm_sf(1.282).powi(2);
        assert!((p - u).abs() < 3.0 * (u * (1.0 - u) / n as f64).sqrt(), "{p} vs {u}");
        assert!((p - 1.0e-2).abs() < 3.0 * (1e-2 * 0.99 / n as f64).sqrt() + 2e-4);
    }
}
