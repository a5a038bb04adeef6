//! Filtering distributions and distances between them.

pub mod finite;
pub mod grid;
pub mod particle;
pub mod tv;

use serde::{Deserialize, Serialize};

pub use finite::{exact_filter_finite, exhaustive_filter_finite, finite_init, finite_step, FinitePair};
pub use grid::{grid_adapt, AdaptPolicy, Grid, GridConfig, GridDensity, GridPair};
pub use particle::{ParticleCloud, ParticleConfig};
pub use tv::{decay_rate, default_fit_range, DecayFit, SeriesMeta, TvPoint, TvSeries, TV_CONVENTION};

use crate::error::{Error, Result};
use crate::model::{FiniteModel, Prior, StateSpaceModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReprConfig {
    Grid(GridConfig),
    Particles(ParticleConfig),
}

#[derive(Debug, Clone)]
pub enum Repr {
    Grid(GridDensity),
    Particles(ParticleCloud),
    Finite(Vec<f64>),
}

/// Filtering distribution after `step` observations beyond `y_0`.
#[derive(Debug, Clone)]
pub struct FilterState {
    pub step: usize,
    pub repr: Repr,
    cfg: Option<ReprConfig>,
}

impl FilterState {
    pub fn finite(step: usize, probs: Vec<f64>) -> Self {
        FilterState { step, repr: Repr::Finite(probs), cfg: None }
    }

    pub fn grid(step: usize, density: GridDensity, cfg: GridConfig) -> Self {
        FilterState { step, repr: Repr::Grid(density), cfg: Some(ReprConfig::Grid(cfg)) }
    }
}

pub fn filter_init(model: &StateSpaceModel, prior: &Prior, y0: f64, cfg: &ReprConfig) -> Result<FilterState> {
    let repr = match cfg {
        ReprConfig::Grid(g) => Repr::Grid(GridDensity::init(model, prior, y0, g)?),
        ReprConfig::Particles(p) => Repr::Particles(ParticleCloud::init(model, prior, y0, p)?),
    };
    Ok(FilterState { step: 0, repr, cfg: Some(*cfg) })
}

pub fn filter_step(model: &StateSpaceModel, state: &FilterState, y: f64) -> Result<FilterState> {
    let step = state.step + 1;
    let repr = match (&state.repr, &state.cfg) {
        (Repr::Grid(d), Some(ReprConfig::Grid(cfg))) => Repr::Grid(d.step(model, y, cfg, step)?),
        (Repr::Particles(c), _) => {
            let mut c = c.clone();
            c.step(model, y, step)?;
            Repr::Particles(c)
        }
        (Repr::Grid(d), _) => Repr::Grid(d.step(model, y, &GridConfig::default(), step)?),
        (Repr::Finite(_), _) => {
            return Err(Error::Representation("finite states step with finite_filter_step".into()))
        }
    };
    Ok(FilterState { step, repr, cfg: state.cfg })
}

pub fn finite_filter_init(fm: &FiniteModel, nu: &[f64], y0: f64) -> Result<FilterState> {
    Ok(FilterState::finite(0, finite_init(fm, nu, y0)?))
}

pub fn finite_filter_step(fm: &FiniteModel, state: &FilterState, y: f64) -> Result<FilterState> {
    match &state.repr {
        Repr::Finite(p) => Ok(FilterState::finite(state.step + 1, finite_step(fm, p, y, state.step + 1)?)),
        _ => Err(Error::Representation("expected a finite filter state".into())),
    }
}

/// `sup_A |a(A) - b(A)|`.
pub fn tv_distance(a: &FilterState, b: &FilterState) -> Result<f64> {
    match (&a.repr, &b.repr) {
        (Repr::Finite(p), Repr::Finite(q)) => {
            if p.len() != q.len() {
                return Err(Error::Representation(format!("{} vs {} states", p.len(), q.len())));
            }
            Ok((0.5 * p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>()).clamp(0.0, 1.0))
        }
        (Repr::Grid(p), Repr::Grid(q)) => {
            if !p.grid.matches(&q.grid) {
                return Err(Error::Representation("grid densities live on different windows".into()));
            }
            let l1: f64 = p.log_w.iter().zip(&q.log_w).map(|(x, y)| (x.exp() - y.exp()).abs()).sum();
            Ok((0.5 * l1 * p.grid.dx).clamp(0.0, 1.0))
        }
        (Repr::Particles(c), Repr::Grid(g)) | (Repr::Grid(g), Repr::Particles(c)) => Ok(c.tv_to_grid(g)),
        _ => Err(Error::Representation("no common support for these representations".into())),
    }
}
