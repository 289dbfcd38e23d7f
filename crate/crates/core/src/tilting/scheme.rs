//! A model, an event and a tilting family wired together: one draw yields the event
//! indicator and the log likelihood ratio.

use super::family::{PreparedTheta, TiltFamily, TiltKind};
use crate::copulas::{CopulaFamily, Direction, Model, PreparedEvent};
use crate::error::{Error, Result};
use crate::randkit::RngStream;

#[derive(Clone, Debug)]
pub struct Scheme {
    model: Model,
    event: PreparedEvent,
    family: TiltFamily,
    // hazard-rate on a lower corner draws 1 − v
    flip_v: bool,
    reflected: bool,
}

/// Per-thread buffers for `Scheme::draw`.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub stat: Vec<f64>,
    pub aux: Vec<f64>,
    pub latent: Vec<f64>,
    pub x: Vec<f64>,
    z: Vec<f64>,
    scratch: Vec<f64>,
}

impl Scheme {
    /// Pairs `kind` with the model. Lower corners are reflected for the t and hazard-rate
    /// families, whose parameterization assumes an upper corner.
    pub fn new(model: Model, event: PreparedEvent, kind: TiltKind) -> Result<Self> {
        let d = model.dim();
        if event.is_corner() && !event.always && event.thr.len() != d {
            return Err(Error::Shape(format!("event has {} thresholds, model is {d}-dimensional", event.thr.len())));
        }
        let lower = event.is_corner() && !event.always && event.direction == Direction::Lower;
        let mismatch = |what: &str| Error::Config(format!("tilting family {} requires {what}", kind.label()));
        let (family, event, flip_v, reflected) = match kind {
            TiltKind::TruncExpProduct => (TiltFamily::trunc_exp_product(d), event, false, false),
            TiltKind::HazardRate => (TiltFamily::hazard_rate(d), event, lower, lower),
            TiltKind::MvnShift => match model.as_copula().map(|c| c.family()) {
                Some(CopulaFamily::Gaussian { sigma }) => (TiltFamily::mvn_shift(sigma.clone())?, event, false, false),
                _ => return Err(mismatch("a gaussian copula")),
            },
            TiltKind::TGammaNormal => {
                let (nu, sigma) = match model.as_copula().map(|c| c.family()) {
                    Some(CopulaFamily::StudentT { nu, sigma }) => (*nu, sigma.clone()),
                    _ => return Err(mismatch("a student-t copula")),
                };
                if !event.is_corner() {
                    return Err(mismatch("a corner event"));
                }
                let ev = if lower { event.reflected()? } else { event };
                let a = if ev.always { vec![0.0; d] } else { ev.thr.clone() };
                (TiltFamily::t_gamma_normal(nu, sigma, a)?, ev, false, lower)
            }
            TiltKind::ClaytonMo => match model.as_copula().map(|c| c.family()) {
                Some(CopulaFamily::Clayton { delta, .. }) => (TiltFamily::clayton_mo(*delta, d)?, event, false, false),
                _ => return Err(mismatch("a clayton copula")),
            },
        };
        Ok(Scheme { model, event, family, flip_v, reflected })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// The event as the sampler sees it (after any reflection).
    pub fn event(&self) -> &PreparedEvent {
        &self.event
    }

    pub fn family(&self) -> &TiltFamily {
        &self.family
    }

    pub fn reflected(&self) -> bool {
        self.reflected
    }

    pub fn workspace(&self) -> Workspace {
        let d = self.model.dim();
        Workspace {
            stat: vec![0.0; self.family.theta_dim()],
            aux: vec![0.0; self.family.aux_dim()],
            latent: vec![0.0; d],
            x: vec![0.0; d],
            z: vec![0.0; d],
            scratch: vec![0.0; d.max(self.model.scratch_len())],
        }
    }

    /// One draw from Q_θ. Returns (hit, log LR). With `full` the latent vector is always
    /// completed; otherwise the conditional inverse may stop at the first coordinate that
    /// leaves the corner.
    #[inline]
    pub fn draw(&self, s: &mut RngStream, pt: &PreparedTheta, ws: &mut Workspace, full: bool) -> (bool, f64) {
        let llr = self.family.sample_into(s, pt, &mut ws.stat, &mut ws.aux, &mut ws.z);
        let gate = if full || !self.event.is_corner() { None } else { Some(&self.event) };
        let d = self.model.dim();
        let done = match self.family.kind() {
            TiltKind::TruncExpProduct => self.model.cim_latent(&ws.aux, &mut ws.latent, &mut ws.scratch, gate),
            TiltKind::HazardRate => {
                if self.flip_v {
                    for v in ws.aux.iter_mut() {
                        *v = 1.0 - *v;
                    }
                }
                self.model.cim_latent(&ws.aux, &mut ws.latent, &mut ws.scratch, gate)
            }
            TiltKind::MvnShift => {
                ws.latent.copy_from_slice(&ws.aux);
                true
            }
            TiltKind::TGammaNormal => {
                let r = (ws.aux[0] / self.family.nu()).sqrt();
                for i in 0..d {
                    ws.latent[i] = ws.aux[1 + i] / r;
                }
                true
            }
            TiltKind::ClaytonMo => {
                let delta = match self.model.as_copula().map(|c| c.family()) {
                    Some(CopulaFamily::Clayton { delta, .. }) => *delta,
                    _ => unreachable!(),
                };
                let w = ws.aux[0];
                for i in 0..d {
                    ws.latent[i] = (-(-ws.aux[1 + i].ln() / w).ln_1p() / delta).exp();
                }
                true
            }
        };
        (done && self.hit(ws), llr)
    }

    #[inline]
    fn hit(&self, ws: &mut Workspace) -> bool {
        match &self.event.indicator {
            None => self.event.hit_latent(&ws.latent),
            Some(f) => {
                self.model.latent_to_x(&ws.latent, &mut ws.x);
                f(&ws.x)
            }
        }
    }

    /// Signed distance of the last (full) draw to the corner.
    pub fn score(&self, ws: &Workspace) -> f64 {
        self.event.score(&ws.latent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copulas::{equicorrelation, CopulaSpec, CrudeSampler, RVineSpec};
    use crate::randkit::{make_stream, MarginSpec};

    fn models() -> Vec<(Model, Vec<TiltKind>)> {
        let m = |d| vec![MarginSpec::std_normal(); d];
        vec![
            (
                CopulaSpec::gaussian(equicorrelation(2, 0.5), m(2)).unwrap().into(),
                vec![TiltKind::TruncExpProduct, TiltKind::MvnShift, TiltKind::HazardRate],
            ),
            (
                CopulaSpec::student_t(5.0, equicorrelation(2, 0.3), m(2)).unwrap().into(),
                vec![TiltKind::TruncExpProduct, TiltKind::TGammaNormal, TiltKind::HazardRate],
            ),
            (
                CopulaSpec::clayton(3.0, 2, m(2)).unwrap().into(),
                vec![TiltKind::TruncExpProduct, TiltKind::ClaytonMo, TiltKind::HazardRate],
            ),
            (RVineSpec::example_3d().into(), vec![TiltKind::TruncExpProduct, TiltKind::HazardRate]),
        ]
    }

    #[test]
    fn direct_families_at_zero_match_crude_sampler() {
        for (model, kinds) in models() {
            let ev = PreparedEvent::whole_space(model.dim());
            let crude = CrudeSampler::new(model.clone()).unwrap();
            let d = model.dim();
            for kind in kinds {
                if matches!(kind, TiltKind::HazardRate) {
                    continue;
                }
                if matches!(kind, TiltKind::TruncExpProduct) && !matches!(model, Model::Vine(_)) {
                    continue;
                }
                let sc = Scheme::new(model.clone(), ev.clone(), kind).unwrap();
                let pt = sc.family().prepare(&vec![0.0; sc.family().theta_dim()]).unwrap();
                let mut ws = sc.workspace();
                let mut s1 = make_stream(5, 1);
                let mut s2 = make_stream(5, 1);
                let mut out = vec![0.0; d];
                let mut scratch = vec![0.0; d.max(model.scratch_len())];
                for _ in 0..500 {
                    let (hit, llr) = sc.draw(&mut s1, &pt, &mut ws, true);
                    crude.draw_latent(&mut s2, &mut out, &mut scratch);
                    assert!(hit);
                    assert_eq!(llr.exp(), 1.0);
                    assert_eq!(ws.latent, out, "{kind:?}");
                }
            }
        }
    }

    #[test]
    fn lower_corner_t_is_reflected() {
        let model: Model = CopulaSpec::student_t(5.0, equicorrelation(2, 0.3), vec![MarginSpec::std_normal(); 2]).unwrap().into();
        let ev = PreparedEvent::corner(Direction::Lower, vec![-2.0, -2.5]);
        let sc = Scheme::new(model, ev, TiltKind::TGammaNormal).unwrap();
        assert!(sc.reflected());
        assert_eq!(sc.family().a_star(), &[2.0, 2.5]);
        assert_eq!(sc.event().direction, Direction::Upper);
    }

    #[test]
    fn family_model_mismatch_is_config_error() {
        let model: Model = CopulaSpec::clayton(2.0, 2, vec![MarginSpec::std_normal(); 2]).unwrap().into();
        let e = Scheme::new(model, PreparedEvent::whole_space(2), TiltKind::MvnShift).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }
}
