use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Initial distribution of the hidden state; vector states use i.i.d. components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Prior {
    Normal { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
    Point { x: f64 },
}

impl Prior {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Prior::Normal { mean, std } if mean.is_finite() && std.is_finite() && std > 0.0 => Ok(()),
            Prior::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
            Prior::Point { x } if x.is_finite() => Ok(()),
            _ => Err(Error::Config(format!("prior {self:?} is not sampleable"))),
        }
    }

    /// Log density of one component; `None` for the point mass.
    pub fn ln_pdf1(&self, x: f64) -> Option<f64> {
        match *self {
            Prior::Normal { mean, std } => {
                let z = (x - mean) / std;
                Some(-0.5 * z * z - std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln())
            }
            Prior::Uniform { lo, hi } => Some(if (lo..=hi).contains(&x) {
                -(hi - lo).ln()
            } else {
                f64::NEG_INFINITY
            }),
            Prior::Point { .. } => None,
        }
    }

    pub fn sample1<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Prior::Normal { mean, std } => Normal::new(mean, std).expect("validated prior").sample(rng),
            Prior::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Prior::Point { x } => x,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.sample1(rng)).collect()
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Prior::Normal { mean, .. } => mean,
            Prior::Uniform { lo, hi } => 0.5 * (lo + hi),
            Prior::Point { x } => x,
        }
    }

    pub fn std(&self) -> f64 {
        match *self {
            Prior::Normal { std, .. } => std,
            Prior::Uniform { lo, hi } => (hi - lo) / 12f64.sqrt(),
            Prior::Point { .. } => 0.0,
        }
    }

    /// Interval holding all but a negligible fraction of the mass.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Prior::Normal { mean, std } => (mean - 12.0 * std, mean + 12.0 * std),
            Prior::Uniform { lo, hi } => (lo, hi),
            Prior::Point { x } => (x, x),
        }
    }
}
