//! Bootstrap particle filter with systematic resampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::GridDensity;
use crate::error::{Error, Result};
use crate::model::{stream_rng, Prior, StateSpaceModel};
use crate::numeric::{log_sum_exp, LOG_MASS_FLOOR};

/// Stream id used by particle filters unless configured otherwise.
pub const PARTICLE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleConfig {
    pub count: usize,
    /// Resample when `ESS < ess_fraction * count`.
    #[serde(default = "default_ess_fraction")]
    pub ess_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_stream")]
    pub stream: u64,
}

fn default_ess_fraction() -> f64 {
    0.5
}

fn default_stream() -> u64 {
    PARTICLE_STREAM
}

impl ParticleConfig {
    pub fn new(count: usize, seed: u64) -> Self {
        ParticleConfig { count, ess_fraction: 0.5, seed, stream: PARTICLE_STREAM }
    }
}

#[derive(Debug, Clone)]
pub struct ParticleCloud {
    pub x: Vec<f64>,
    /// Normalized: `sum exp(log_w) = 1`.
    pub log_w: Vec<f64>,
    pub ess: f64,
    pub resampled: bool,
    ess_fraction: f64,
    rng: ChaCha8Rng,
}

impl ParticleCloud {
    pub fn init(model: &StateSpaceModel, prior: &Prior, y0: f64, cfg: &ParticleConfig) -> Result<Self> {
        prior.validate()?;
        if !model.is_scalar() {
            return Err(Error::Config("particle filters here track a scalar state".into()));
        }
        if cfg.count == 0 || !(cfg.ess_fraction > 0.0 && cfg.ess_fraction <= 1.0) {
            return Err(Error::Config("particle count must be positive and ess_fraction in (0, 1]".into()));
        }
        let mut rng = stream_rng(cfg.seed, cfg.stream);
        let x: Vec<f64> = (0..cfg.count).map(|_| prior.sample1(&mut rng)).collect();
        let log_w: Vec<f64> = x.iter().map(|&v| model.ln_likelihood1(v, y0)).collect();
        let mut cloud =
            ParticleCloud { x, log_w, ess: 0.0, resampled: false, ess_fraction: cfg.ess_fraction, rng };
        cloud.finish().map_err(|_| Error::DegenerateInit)?;
        Ok(cloud)
    }

    pub fn step(&mut self, model: &StateSpaceModel, y: f64, step: usize) -> Result<()> {
        for (x, w) in self.x.iter_mut().zip(self.log_w.iter_mut()) {
            let z = model.state_noise.sample(&[*x], &mut self.rng)[0];
            *x = model.f.apply1(*x) + z;
            *w += model.ln_likelihood1(*x, y);
        }
        self.finish().map_err(|_| Error::FilterCollapse { step })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_w.iter().map(|w| w.exp()).collect()
    }

    /// Normalizes, records the ESS and resamples when it is too low.
    fn finish(&mut self) -> std::result::Result<(), ()> {
        let lse = log_sum_exp(&self.log_w);
        let peak = self.log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lse.is_finite() || peak < LOG_MASS_FLOOR {
            return Err(());
        }
        self.log_w.iter_mut().for_each(|w| *w -= lse);
        let sum_sq: f64 = self.log_w.iter().map(|w| (2.0 * w).exp()).sum();
        self.ess = 1.0 / sum_sq;
        self.resampled = false;
        if self.ess < self.ess_fraction * self.len() as f64 {
            self.resample();
        }
        Ok(())
    }

    fn resample(&mut self) {
        let n = self.len();
        let w = self.weights();
        let idx = systematic_indices(&w, n, self.rng.random::<f64>());
        self.x = idx.iter().map(|&i| self.x[i]).collect();
        let lw = -(n as f64).ln();
        self.log_w = vec![lw; n];
        self.ess = n as f64;
        self.resampled = true;
    }

    /// Mass of each grid cell, plus the mass falling outside the window.
    pub fn project(&self, grid: &super::grid::Grid) -> (Vec<f64>, f64) {
        let mut cells = vec![0.0; grid.len];
        let mut outside = 0.0;
        for (x, w) in self.x.iter().zip(&self.log_w) {
            match grid.cell(*x) {
                Some(i) => cells[i] += w.exp(),
                None => outside += w.exp(),
            }
        }
        (cells, outside)
    }

    /// `sup_A |cloud(A) - grid(A)|` over unions of grid cells.
    pub fn tv_to_grid(&self, density: &GridDensity) -> f64 {
        let (cells, outside) = self.project(&density.grid);
        let l1: f64 = cells
            .iter()
            .zip(&density.log_w)
            .map(|(c, lw)| (c - lw.exp() * density.grid.dx).abs())
            .sum::<f64>()
            + outside;
        (0.5 * l1).clamp(0.0, 1.0)
    }
}

/// Systematic resampling: `n` ancestors for offsets `(u + i) / n`, `u` in `[0, 1)`.
pub fn systematic_indices(weights: &[f64], n: usize, u: f64) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0] / total;
    let mut j = 0;
    for i in 0..n {
        let t = (u + i as f64) / n as f64;
        while cum < t && j + 1 < weights.len() {
            j += 1;
            cum += weights[j] / total;
        }
        out.push(j);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::grid::GridConfig;

    #[test]
    fn point_prior_gives_point_posterior() {
        let m = StateSpaceModel::gaussian_random_walk(1.0, 1.0);
        let c = ParticleCloud::init(&m, &Prior::Point { x: 2.5 }, 0.0, &ParticleConfig::new(1000, 3)).unwrap();
        assert!(c.x.iter().all(|&x| x == 2.5));
        assert!((c.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn systematic_counts_are_within_one_of_expectation() {
        let w = [0.1, 0.25, 0.05, 0.6];
        let idx = systematic_indices(&w, 1000, 0.37);
        for (k, wk) in w.iter().enumerate() {
            let c = idx.iter().filter(|&&i| i == k).count() as f64;
            assert!((c - 1000.0 * wk).abs() <= 1.0);
        }
    }

    #[test]
    fn resampled_weights_are_uniform() {
        let m = StateSpaceModel::gaussian_random_walk(1.0, 0.1);
        let mut c = ParticleCloud::init(&m, &Prior::Normal { mean: 0.0, std: 3.0 }, 0.0, &ParticleConfig::new(500, 1)).unwrap();
        assert!(c.resampled);
        c.step(&m, 0.1, 1).unwrap();
        let s: f64 = c.weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_grid_filter() {
        let m = StateSpaceModel::gaussian_random_walk(1.0, 1.0);
        let prior = Prior::Normal { mean: 0.0, std: 1.0 };
        let cfg = GridConfig::default();
        let ys = [0.5, 1.0, -0.2, 0.7];
        let mut g = GridDensity::init(&m, &prior, ys[0], &cfg).unwrap();
        let mut c = ParticleCloud::init(&m, &prior, ys[0], &ParticleConfig::new(100_000, 7)).unwrap();
        for (k, &y) in ys.iter().enumerate().skip(1) {
            g = g.step(&m, y, &cfg, k).unwrap();
            c.step(&m, y, k).unwrap();
            assert!(c.tv_to_grid(&g) < 0.05);
        }
    }
}
