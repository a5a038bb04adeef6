use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::prior::Prior;
use super::state_space::StateSpaceModel;
use crate::error::{Error, Result};

/// Seeded generator for one named stream of a run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub const SIMULATION_STREAM: u64 = 0;

/// Simulated path with its noise record.
///
/// `zetas[k - 1]` is the state increment at step `k` (`k = 1..=n`); `eps[k]` is the observation
/// noise at step `k` (`k = 0..=n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
    pub zetas: Vec<Vec<f64>>,
    pub eps: Vec<Vec<f64>>,
    pub seed: u64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    /// Scalar observations (first component).
    pub fn scalar_observations(&self) -> Vec<f64> {
        self.observations.iter().map(|y| y[0]).collect()
    }
}

/// Rebuilds states and observations from an initial state and recorded noises.
pub fn replay(
    model: &StateSpaceModel,
    x0: &[f64],
    zetas: &[Vec<f64>],
    eps: &[Vec<f64>],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let observe = |x: &[f64], e: &[f64]| -> Vec<f64> {
        model.h.apply(x).iter().zip(e).map(|(a, b)| a + b).collect()
    };
    let mut states = vec![x0.to_vec()];
    let mut obs = vec![observe(x0, &eps[0])];
    for (k, z) in zetas.iter().enumerate() {
        let prev = &states[k];
        let x: Vec<f64> = model.f.apply(prev).iter().zip(z).map(|(a, b)| a + b).collect();
        obs.push(observe(&x, &eps[k + 1]));
        states.push(x);
    }
    (states, obs)
}

/// Draws `x_{0:n}`, `y_{0:n}` from the model, deterministic in `seed`.
pub fn simulate_trajectory(model: &StateSpaceModel, prior: &Prior, n: usize, seed: u64) -> Result<Trajectory> {
    prior.validate()?;
    model.validate()?;
    let mut rng = stream_rng(seed, SIMULATION_STREAM);
    let dim = model.dim;
    let x0 = prior.sample(&mut rng, dim);
    let mut eps = vec![model.obs_noise.sample(&mut rng, dim)];
    let mut zetas = Vec::with_capacity(n);
    let mut x = x0.clone();
    for _ in 0..n {
        let z = model.state_noise.sample(&x, &mut rng);
        x = model.f.apply(&x).iter().zip(&z).map(|(a, b)| a + b).collect();
        zetas.push(z);
        eps.push(model.obs_noise.sample(&mut rng, dim));
    }
    let (states, observations) = replay(model, &x0, &zetas, &eps);
    Ok(Trajectory { states, observations, zetas, eps, seed })
}

/// Data-generating model that may differ from the filtering model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisspecifiedTruth {
    /// Truth dynamics `f*`, `h*`, constants `a*`, `b0*`, `b*`, state noise `q*` and observation noise `v*`.
    pub model: StateSpaceModel,
    /// `||f - f*||_inf`
    pub f_gap: f64,
    /// `||h - h*||_inf`
    pub h_gap: f64,
    /// `||f - f*|| + (b0 + b ||h* - h||)(1 + a*)` with `b0`, `b` from the filtering model.
    pub kappa: f64,
}

/// Half-width of the window on which sup-norm gaps are evaluated.
pub const GAP_WINDOW: f64 = 100.0;
const GAP_POINTS: usize = 400_001;

impl MisspecifiedTruth {
    pub fn new(truth: StateSpaceModel, filter: &StateSpaceModel) -> Result<Self> {
        truth.validate()?;
        if truth.dim != filter.dim {
            return Err(Error::Validation("truth and filter dimensions differ".into()));
        }
        let f_gap = sup_gap_bound(&filter.f, &truth.f)?;
        let h_gap = sup_gap_bound(&filter.h, &truth.h)?;
        let kappa = f_gap + (filter.b0 + filter.b * h_gap) * (1.0 + truth.a);
        Ok(MisspecifiedTruth { model: truth, f_gap, h_gap, kappa })
    }

    /// The degenerate case where the data follow the filtering model.
    pub fn well_specified(filter: &StateSpaceModel) -> Self {
        MisspecifiedTruth::new(filter.clone(), filter).expect("filter model is valid")
    }
}

/// Upper bound on `sup |f - g|`: grid maximum plus the Lipschitz slack between grid points.
/// Fails when the gap keeps growing with the window, i.e. (O1) does not hold.
fn sup_gap_bound(f: &super::funcs::MapFn, g: &super::funcs::MapFn) -> Result<f64> {
    let step = 2.0 * GAP_WINDOW / (GAP_POINTS - 1) as f64;
    let slack = 0.5 * step * (f.lipschitz() + g.lipschitz());
    let inner = f.sup_gap(g, GAP_WINDOW, GAP_POINTS);
    let outer = f.sup_gap(g, 2.0 * GAP_WINDOW, GAP_POINTS);
    if outer > inner + 2.0 * slack + 1e-9 * (1.0 + inner) {
        return Err(Error::Validation(format!(
            "sup-norm gap is unbounded (grows from {inner} to {outer} when the window doubles)"
        )));
    }
    // coincident maps have exactly zero gap
    if inner == 0.0 && outer == 0.0 {
        return Ok(0.0);
    }
    Ok(inner + slack)
}

/// Draws the observation stream (and its noise record) from the truth model.
pub fn simulate_misspecified(truth: &MisspecifiedTruth, prior: &Prior, n: usize, seed: u64) -> Result<Trajectory> {
    simulate_trajectory(&truth.model, prior, n, seed)
}
