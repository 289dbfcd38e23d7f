use crate::error::{domain, Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Upper,
    Lower,
}

impl Direction {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "upper" | ">" => Ok(Direction::Upper),
            "lower" | "<" => Ok(Direction::Lower),
            o => Err(Error::Config(format!("unknown event direction '{o}'"))),
        }
    }
}

/// {X > a} or {X < a} componentwise; `a_star` holds thresholds on the latent scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerEvent {
    pub direction: Direction,
    pub a: Vec<f64>,
    pub a_star: Option<Vec<f64>>,
}

impl CornerEvent {
    pub fn new(direction: Direction, a: Vec<f64>) -> Self {
        CornerEvent { direction, a, a_star: None }
    }

    pub fn upper(a: Vec<f64>) -> Self {
        Self::new(Direction::Upper, a)
    }

    pub fn lower(a: Vec<f64>) -> Self {
        Self::new(Direction::Lower, a)
    }

    /// Equal-corner event with threshold p in every coordinate.
    pub fn equal(d: usize, p: f64, direction: Direction) -> Self {
        Self::new(direction, vec![p; d])
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }
}

/// Indicator on the margin scale X, for events that are not corners.
pub type Indicator = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// An event resolved against a model: latent thresholds or a caller indicator.
#[derive(Clone)]
pub struct PreparedEvent {
    pub direction: Direction,
    /// latent-scale thresholds (empty for indicator events)
    pub thr: Vec<f64>,
    pub indicator: Option<Indicator>,
    /// everything passes (used for the "whole space" degenerate case)
    pub always: bool,
}

impl std::fmt::Debug for PreparedEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PreparedEvent")
            .field("direction", &self.direction)
            .field("thr", &self.thr)
            .field("indicator", &self.indicator.is_some())
            .field("always", &self.always)
            .finish()
    }
}

impl PreparedEvent {
    pub fn corner(direction: Direction, thr: Vec<f64>) -> Self {
        PreparedEvent { direction, thr, indicator: None, always: false }
    }

    pub fn whole_space(d: usize) -> Self {
        PreparedEvent { direction: Direction::Upper, thr: vec![f64::NEG_INFINITY; d], indicator: None, always: true }
    }

    pub fn from_indicator(f: Indicator) -> Self {
        PreparedEvent { direction: Direction::Upper, thr: Vec::new(), indicator: Some(f), always: false }
    }

    pub fn is_corner(&self) -> bool {
        self.indicator.is_none()
    }

    /// Coordinate gate used for early exit while the latent vector is built.
    #[inline]
    pub fn passes(&self, i: usize, x: f64) -> bool {
        if self.always || self.indicator.is_some() {
            return true;
        }
        match self.direction {
            Direction::Upper => x > self.thr[i],
            Direction::Lower => x < self.thr[i],
        }
    }

    #[inline]
    pub fn hit_latent(&self, latent: &[f64]) -> bool {
        (0..latent.len()).all(|i| self.passes(i, latent[i]))
    }

    /// Signed distance to the corner; the event is {score > 0}. NaN for indicator events.
    #[inline]
    pub fn score(&self, latent: &[f64]) -> f64 {
        if self.always {
            return f64::INFINITY;
        }
        if self.indicator.is_some() {
            return f64::NAN;
        }
        let mut m = f64::INFINITY;
        for (x, t) in latent.iter().zip(&self.thr) {
            let s = match self.direction {
                Direction::Upper => x - t,
                Direction::Lower => t - x,
            };
            m = m.min(s);
        }
        m
    }

    /// The same event seen through the reflection x ↦ −x of a symmetric latent law.
    pub fn reflected(&self) -> Result<Self> {
        if !self.is_corner() {
            return domain("indicator events cannot be reflected");
        }
        let direction = match self.direction {
            Direction::Upper => Direction::Lower,
            Direction::Lower => Direction::Upper,
        };
        Ok(PreparedEvent { direction, thr: self.thr.iter().map(|t| -t).collect(), indicator: None, always: self.always })
    }
}
