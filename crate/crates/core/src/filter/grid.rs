//! Scalar grid filter: densities on uniform windows that follow the posterior.
//!
//! Each step evaluates the unnormalized posterior exactly at the new nodes,
//! `u(x_i) = g(x_i, y) * sum_j p_j q(x_j, x_i) dx`, after a coarse scouting pass has located
//! the posterior mass. Normalization uses the rectangle rule, so `sum_i p_i dx = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Prior, StateSpaceModel};
use crate::numeric::LOG_MASS_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub dx: f64,
    pub len: usize,
}

impl Grid {
    pub fn spanning(lo: f64, hi: f64, len: usize) -> Self {
        let len = len.max(2);
        Grid { lo, dx: (hi - lo) / (len - 1) as f64, len }
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.lo + self.dx * i as f64
    }

    pub fn hi(&self) -> f64 {
        self.node(self.len - 1)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.node(i)).collect()
    }

    /// Same nodes up to rounding.
    pub fn matches(&self, other: &Grid) -> bool {
        let tol = 1e-12 * (1.0 + self.lo.abs().max(self.hi().abs()));
        self.len == other.len && (self.lo - other.lo).abs() <= tol && (self.dx - other.dx).abs() <= tol
    }

    /// Index of the cell `[node - dx/2, node + dx/2)` containing `x`.
    pub fn cell(&self, x: f64) -> Option<usize> {
        let pos = ((x - self.lo) / self.dx + 0.5).floor();
        if pos >= 0.0 && pos < self.len as f64 {
            Some(pos as usize)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub nodes: usize,
    /// Window half-width in posterior standard deviations.
    pub k: f64,
    pub scout_nodes: usize,
    /// Largest mass allowed in the outer 1/64 of the window on each side.
    pub boundary_tol: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { nodes: 512, k: 8.0, scout_nodes: 256, boundary_tol: 1e-8 }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 16 || self.scout_nodes < 16 {
            return Err(Error::Config("grids need at least 16 nodes".into()));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::Config(format!("window factor k must be positive, got {}", self.k)));
        }
        Ok(())
    }
}

/// Normalized density on a grid, stored as log-weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub grid: Grid,
    pub log_w: Vec<f64>,
}

impl GridDensity {
    /// Normalizes nonnegative values; `None` when all of them vanish.
    pub fn from_values(grid: Grid, values: &[f64]) -> Option<Self> {
        let total: f64 = values.iter().sum::<f64>() * grid.dx;
        if !(total > 0.0 && total.is_finite()) {
            return None;
        }
        let log_w = values.iter().map(|v| (v / total).ln()).collect();
        Some(GridDensity { grid, log_w })
    }

    pub fn density(&self) -> Vec<f64> {
        self.log_w.iter().map(|w| w.exp()).collect()
    }

    pub fn mass(&self) -> f64 {
        self.log_w.iter().map(|w| w.exp()).sum::<f64>() * self.grid.dx
    }

    pub fn mean_std(&self) -> (f64, f64) {
        moments(&self.grid, &self.density())
    }

    /// Prior density times `g(., y0)`.
    pub fn init(model: &StateSpaceModel, prior: &Prior, y0: f64, cfg: &GridConfig) -> Result<Self> {
        let (grid, vals) = init_values(model, &[prior], y0, cfg)?;
        GridDensity::from_values(grid, &vals[0]).ok_or(Error::DegenerateInit)
    }

    /// One predict-then-update stage.
    pub fn step(&self, model: &StateSpaceModel, y: f64, cfg: &GridConfig, step: usize) -> Result<Self> {
        let p = self.density();
        let (grid, vals) = step_values(model, &self.grid, &[&p], Some(y), cfg)
            .ok_or(Error::FilterCollapse { step })?;
        GridDensity::from_values(grid, &vals[0]).ok_or(Error::FilterCollapse { step })
    }

    /// Prediction only, evaluated on `target` without renormalizing.
    pub fn predict_on(&self, model: &StateSpaceModel, target: &Grid) -> Vec<f64> {
        let p = self.density();
        transport_model(model, &self.grid, &[&p], target).remove(0)
    }
}

/// Recentering policy for [`grid_adapt`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptPolicy {
    pub k: f64,
    pub nodes: usize,
}

impl Default for AdaptPolicy {
    fn default() -> Self {
        AdaptPolicy { k: 8.0, nodes: 512 }
    }
}

/// Moves the window to `mean +- k std` by log-linear interpolation.
///
/// A window that already covers `mean +- k std` without being more than four times too wide is
/// kept as is. A zero-spread posterior keeps a window of `nodes` cells around its atom.
pub fn grid_adapt(state: &GridDensity, policy: &AdaptPolicy) -> GridDensity {
    let (mean, std) = state.mean_std();
    let g = &state.grid;
    let half = policy.k * std;
    let covered = g.lo <= mean - half && g.hi() >= mean + half;
    if std > 0.0 && covered && g.hi() - g.lo <= 4.0 * 2.0 * half {
        return state.clone();
    }
    let target = if std > 0.0 {
        Grid::spanning(mean - half, mean + half, policy.nodes)
    } else {
        let w = 0.5 * g.dx * policy.nodes as f64;
        Grid::spanning(mean - w, mean + w, policy.nodes)
    };
    let mut log_w: Vec<f64> = target.nodes().iter().map(|&x| interpolate_log(state, x)).collect();
    crate::numeric::normalize_log_weights(&mut log_w, target.dx);
    GridDensity { grid: target, log_w }
}

fn interpolate_log(state: &GridDensity, x: f64) -> f64 {
    let g = &state.grid;
    let pos = (x - g.lo) / g.dx;
    if pos < 0.0 || pos > (g.len - 1) as f64 {
        return f64::NEG_INFINITY;
    }
    let i = (pos.floor() as usize).min(g.len - 2);
    let t = pos - i as f64;
    let (a, b) = (state.log_w[i], state.log_w[i + 1]);
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        // linear in natural scale next to zero-mass nodes
        return ((1.0 - t) * a.exp() + t * b.exp()).ln();
    }
    (1.0 - t) * a + t * b
}

pub(crate) fn moments(grid: &Grid, w: &[f64]) -> (f64, f64) {
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = w.iter().enumerate().map(|(i, v)| v * grid.node(i)).sum::<f64>() / total;
    let var = w
        .iter()
        .enumerate()
        .map(|(i, v)| v * (grid.node(i) - mean).powi(2))
        .sum::<f64>()
        / total;
    (mean, var.max(0.0).sqrt())
}

/// `out[v][i] = sum_j inputs[v][j] * kernel(j, i)`, skipping source nodes that are negligible in
/// every input vector.
pub fn transport<K: Fn(usize, usize) -> f64>(inputs: &[&[f64]], n_out: usize, kernel: K) -> Vec<Vec<f64>> {
    let n_in = inputs.first().map_or(0, |v| v.len());
    let peaks: Vec<f64> = inputs.iter().map(|v| v.iter().fold(0.0f64, |m, x| m.max(x.abs()))).collect();
    let active: Vec<usize> = (0..n_in)
        .filter(|&j| inputs.iter().zip(&peaks).any(|(v, &m)| m > 0.0 && v[j].abs() > 1e-20 * m))
        .collect();
    let mut out = vec![vec![0.0; n_out]; inputs.len()];
    for i in 0..n_out {
        for &j in &active {
            let k = kernel(j, i);
            if k == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(inputs) {
                o[i] += v[j] * k;
            }
        }
    }
    out
}

fn transport_model(model: &StateSpaceModel, from: &Grid, inputs: &[&[f64]], to: &Grid) -> Vec<Vec<f64>> {
    let xs = from.nodes();
    let fx: Vec<f64> = xs.iter().map(|&x| model.f.apply1(x)).collect();
    let dx = from.dx;
    transport(inputs, to.len, |j, i| dx * model.state_noise.density1(xs[j], to.node(i) - fx[j]))
}

/// `g(x_i, y)` scaled by its maximum over the grid (a common factor that cancels on normalization).
fn scaled_likelihood(model: &StateSpaceModel, grid: &Grid, y: f64) -> Vec<f64> {
    let lg: Vec<f64> = (0..grid.len).map(|i| model.ln_likelihood1(grid.node(i), y)).collect();
    let m = lg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return vec![0.0; grid.len];
    }
    lg.iter().map(|l| (l - m).exp()).collect()
}

/// States whose likelihood is within `1e-16` of the peak, when `h` can be inverted.
fn likelihood_region(model: &StateSpaceModel, y: f64) -> Option<(f64, f64)> {
    let r = model.obs_noise.support_radius(1e-16);
    let shift = model.obs_noise.peak_location();
    let a = model.h.inverse1(y - shift - r)?;
    let b = model.h.inverse1(y - shift + r)?;
    Some((a.min(b), a.max(b)))
}

fn intersect(a: (f64, f64), b: Option<(f64, f64)>) -> (f64, f64) {
    match b {
        None => a,
        Some(b) => {
            let lo = a.0.max(b.0);
            let hi = a.1.min(b.1);
            if lo < hi {
                (lo, hi)
            } else {
                (a.0.min(b.0), a.1.max(b.1))
            }
        }
    }
}

fn combined(vals: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = vals.first()?.len();
    let mut w = vec![0.0; n];
    let mut any = false;
    for v in vals {
        let total: f64 = v.iter().map(|x| x.abs()).sum();
        if total > 0.0 && total.is_finite() {
            any = true;
            for (wi, x) in w.iter_mut().zip(v) {
                *wi += x.abs() / total;
            }
        }
    }
    if !any {
        return None;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Some(w)
}

/// Locates the mass of `eval` inside `range` and returns the final window with its values.
fn settle<F: Fn(&Grid) -> Vec<Vec<f64>>>(range: (f64, f64), cfg: &GridConfig, eval: F) -> Option<(Grid, Vec<Vec<f64>>)> {
    let (mut lo, mut hi) = range;
    let (mut center, mut spread) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    for _ in 0..6 {
        let g = Grid::spanning(lo, hi, cfg.scout_nodes);
        let w = combined(&eval(&g))?;
        let (m, s) = moments(&g, &w);
        center = m;
        spread = s.max(0.5 * g.dx);
        let half = (cfg.k + 4.0) * spread;
        if 2.0 * half > 0.5 * (hi - lo) {
            break;
        }
        lo = m - half;
        hi = m + half;
    }
    let mut half = cfg.k * spread;
    let edge = (cfg.nodes / 64).max(1);
    let mut last = None;
    for _ in 0..8 {
        let g = Grid::spanning(center - half, center + half, cfg.nodes);
        let vals = eval(&g);
        let w = combined(&vals)?;
        let tail: f64 = w[..edge].iter().sum::<f64>() + w[w.len() - edge..].iter().sum::<f64>();
        last = Some((g, vals));
        if tail <= cfg.boundary_tol {
            break;
        }
        half *= 1.5;
    }
    last
}

pub(crate) fn init_values(
    model: &StateSpaceModel,
    priors: &[&Prior],
    y0: f64,
    cfg: &GridConfig,
) -> Result<(Grid, Vec<Vec<f64>>)> {
    cfg.validate()?;
    if !model.is_scalar() {
        return Err(Error::Config("grid filters need a scalar state".into()));
    }
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    for p in priors {
        p.validate()?;
        if matches!(p, Prior::Point { .. }) {
            return Err(Error::Config("a point-mass prior has no grid density; use particles".into()));
        }
        let (lo, hi) = p.support();
        range = (range.0.min(lo), range.1.max(hi));
    }
    let range = intersect(range, likelihood_region(model, y0));
    let eval = |g: &Grid| {
        let lik = scaled_likelihood(model, g, y0);
        priors
            .iter()
            .map(|p| {
                (0..g.len)
                    .map(|i| {
                        let lp = p.ln_pdf1(g.node(i)).unwrap_or(f64::NEG_INFINITY);
                        if lp < LOG_MASS_FLOOR {
                            0.0
                        } else {
                            lp.exp() * lik[i]
                        }
                    })
                    .collect()
            })
            .collect()
    };
    settle(range, cfg, eval).ok_or(Error::DegenerateInit)
}

/// Predicts `inputs` from `from` and, when `y` is given, multiplies by the scaled likelihood.
pub(crate) fn step_values(
    model: &StateSpaceModel,
    from: &Grid,
    inputs: &[&[f64]],
    y: Option<f64>,
    cfg: &GridConfig,
) -> Option<(Grid, Vec<Vec<f64>>)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let peak = inputs[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for j in 0..from.len {
        if inputs.iter().any(|v| v[j].abs() > 1e-20 * peak) || peak == 0.0 {
            let fx = model.f.apply1(from.node(j));
            lo = lo.min(fx);
            hi = hi.max(fx);
        }
    }
    let spread = model.state_noise.spread();
    let r = model.state_noise.envelope().0.support_radius(1e-16).min(1e4 * spread);
    let mut range = (lo - r, hi + r);
    if let Some(y) = y {
        range = intersect(range, likelihood_region(model, y));
    }
    let eval = |g: &Grid| {
        let mut out = transport_model(model, from, inputs, g);
        if let Some(y) = y {
            let lik = scaled_likelihood(model, g, y);
            for v in out.iter_mut() {
                v.iter_mut().zip(&lik).for_each(|(a, l)| *a *= l);
            }
        }
        out
    };
    settle(range, cfg, eval)
}

/// Two grid filters sharing observations, propagated as a base density and a scaled difference.
///
/// The pair holds `p' = base` and `p = base + exp(log_scale) * diff` with `max |diff| = 1`.
/// Propagating the difference directly keeps `||p - p'||` accurate long after it drops below
/// the rounding level of either density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPair {
    pub grid: Grid,
    pub base: Vec<f64>,
    pub diff: Vec<f64>,
    pub log_scale: f64,
    pub step: usize,
}

impl GridPair {
    pub fn init(model: &StateSpaceModel, nu: &Prior, nu_prime: &Prior, y0: f64, cfg: &GridConfig) -> Result<Self> {
        let (grid, vals) = init_values(model, &[nu, nu_prime], y0, cfg)?;
        let norm = |v: &[f64]| -> Result<Vec<f64>> {
            let z: f64 = v.iter().sum::<f64>() * grid.dx;
            if !(z > 0.0) {
                return Err(Error::DegenerateInit);
            }
            Ok(v.iter().map(|x| x / z).collect())
        };
        let p = norm(&vals[0])?;
        let base = norm(&vals[1])?;
        let d: Vec<f64> = p.iter().zip(&base).map(|(a, b)| a - b).collect();
        let (diff, log_scale) = rescale(d);
        Ok(GridPair { grid, base, diff, log_scale, step: 0 })
    }

    pub fn step(&mut self, model: &StateSpaceModel, y: f64, cfg: &GridConfig) -> Result<()> {
        let step = self.step + 1;
        let (grid, vals) = step_values(model, &self.grid, &[&self.base, &self.diff], Some(y), cfg)
            .ok_or(Error::FilterCollapse { step })?;
        let z_base: f64 = vals[0].iter().sum::<f64>() * grid.dx;
        let z_diff: f64 = vals[1].iter().sum::<f64>() * grid.dx;
        let z = z_base + self.log_scale.exp() * z_diff;
        if !(z_base > 0.0 && z > 0.0) {
            return Err(Error::FilterCollapse { step });
        }
        let base: Vec<f64> = vals[0].iter().map(|u| u / z_base).collect();
        let d: Vec<f64> = vals[1].iter().zip(&base).map(|(u, b)| u - b * z_diff).collect();
        let (diff, shift) = rescale(d);
        self.log_scale += shift - z.ln();
        self.grid = grid;
        self.base = base;
        self.diff = diff;
        self.step = step;
        Ok(())
    }

    /// `log sup_A |phi(A) - phi'(A)|`.
    pub fn log_tv(&self) -> f64 {
        let l1: f64 = self.diff.iter().map(|d| d.abs()).sum::<f64>() * self.grid.dx;
        if l1 == 0.0 {
            return f64::NEG_INFINITY;
        }
        (self.log_scale + (0.5 * l1).ln()).min(0.0)
    }

    /// Filter started from `nu`.
    pub fn first(&self) -> GridDensity {
        let s = self.log_scale.exp();
        let v: Vec<f64> = self.base.iter().zip(&self.diff).map(|(b, d)| (b + s * d).max(0.0)).collect();
        GridDensity::from_values(self.grid, &v).expect("pair densities carry mass")
    }

    /// Filter started from `nu'`.
    pub fn second(&self) -> GridDensity {
        GridDensity::from_values(self.grid, &self.base).expect("pair densities carry mass")
    }
}

/// Scales a signed vector to unit max-norm, returning the log of the factor removed.
fn rescale(mut d: Vec<f64>) -> (Vec<f64>, f64) {
    let m = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 || !m.is_finite() {
        d.iter_mut().for_each(|x| *x = 0.0);
        return (d, f64::NEG_INFINITY);
    }
    d.iter_mut().for_each(|x| *x /= m);
    (d, m.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::erf::erf;

    fn rw() -> StateSpaceModel {
        StateSpaceModel::gaussian_random_walk(1.0, 1.0)
    }

    /// Kalman recursion for the scalar random walk: (mean, variance) of each filter.
    fn kalman(m0: f64, p0: f64, ys: &[f64]) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let (mut m, mut p) = (m0, p0);
        for (k, &y) in ys.iter().enumerate() {
            if k > 0 {
                p += 1.0;
            }
            let gain = p / (p + 1.0);
            m += gain * (y - m);
            p *= 1.0 - gain;
            out.push((m, p));
        }
        out
    }

    #[test]
    fn uniform_prior_with_flat_likelihood_stays_uniform() {
        let mut m = rw();
        m.obs_noise = crate::model::NoiseDensity::Gaussian { std: 1e6 };
        let d = GridDensity::init(&m, &Prior::Uniform { lo: -1.0, hi: 1.0 }, 0.0, &GridConfig::default()).unwrap();
        let p = d.density();
        let inside: Vec<f64> = p.iter().enumerate().filter(|(i, _)| d.grid.node(*i).abs() < 0.99).map(|(_, v)| *v).collect();
        let (lo, hi) = inside.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!((hi - lo) / hi < 1e-9);
    }

    #[test]
    fn point_prior_on_grid_is_config_error() {
        let err = GridDensity::init(&rw(), &Prior::Point { x: 0.0 }, 0.0, &GridConfig::default()).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn matches_kalman_filter() {
        let m = rw();
        let ys = [0.3, 1.1, 0.4, -0.8, 2.5, 2.9];
        let cfg = GridConfig::default();
        let mut d = GridDensity::init(&m, &Prior::Normal { mean: 1.0, std: 2.0 }, ys[0], &cfg).unwrap();
        let truth = kalman(1.0, 4.0, &ys);
        for (k, &y) in ys.iter().enumerate() {
            if k > 0 {
                d = d.step(&m, y, &cfg, k).unwrap();
            }
            assert!((d.mass() - 1.0).abs() < 1e-9);
            let (mean, std) = d.mean_std();
            assert!((mean - truth[k].0).abs() < 1e-6, "{k}: {mean} vs {}", truth[k].0);
            assert!((std * std - truth[k].1).abs() < 1e-6);
        }
    }

    #[test]
    fn pair_tv_follows_gaussian_closed_form_far_below_rounding() {
        let m = rw();
        let cfg = GridConfig::default();
        let ys: Vec<f64> = (0..60).map(|k| (k as f64 * 0.37).sin() * 2.0).collect();
        let (a, b) = (Prior::Normal { mean: -5.0, std: 1.0 }, Prior::Normal { mean: 5.0, std: 1.0 });
        let mut pair = GridPair::init(&m, &a, &b, ys[0], &cfg).unwrap();
        let ka = kalman(-5.0, 1.0, &ys);
        // with equal variances the mean gap contracts by (1 - gain) each step, independent of y
        let mut d = 10.0;
        for k in 0..ys.len() {
            if k > 0 {
                pair.step(&m, ys[k], &cfg).unwrap();
            }
            let p = ka[k].1;
            let prior_var = if k == 0 { 1.0 } else { ka[k - 1].1 + 1.0 };
            d *= 1.0 - prior_var / (prior_var + 1.0);
            // TV = erf(d / (2 sqrt(2 P))), ~ d / sqrt(2 pi P) when small
            let exact = if d > 1e-6 {
                erf(d / (2.0 * (2.0 * p).sqrt())).ln()
            } else {
                (d / (2.0 * std::f64::consts::PI * p).sqrt()).ln()
            };
            assert!((pair.log_tv() - exact).abs() < 1e-4, "step {k}: {} vs {exact}", pair.log_tv());
        }
        assert!(pair.log_tv() < -50.0);
    }

    #[test]
    fn identical_priors_give_zero_tv() {
        let m = rw();
        let p = Prior::Normal { mean: 0.0, std: 1.0 };
        let mut pair = GridPair::init(&m, &p, &p, 0.2, &GridConfig::default()).unwrap();
        pair.step(&m, 0.5, &GridConfig::default()).unwrap();
        assert_eq!(pair.log_tv(), f64::NEG_INFINITY);
    }

    #[test]
    fn adapt_is_noop_when_centered() {
        let d = GridDensity::init(&rw(), &Prior::Normal { mean: 0.0, std: 1.0 }, 0.0, &GridConfig::default()).unwrap();
        let a = grid_adapt(&d, &AdaptPolicy::default());
        assert_eq!(a.grid, d.grid);
        for (x, y) in a.log_w.iter().zip(&d.log_w) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn adapt_recenters_on_mean() {
        let grid = Grid::spanning(-5.0, 5.0, 512);
        let vals: Vec<f64> = grid.nodes().iter().map(|x| (-(x - 10.0).powi(2) / 2.0).exp()).collect();
        let d = GridDensity::from_values(grid, &vals).unwrap();
        let (mean, std) = d.mean_std();
        let a = grid_adapt(&d, &AdaptPolicy { k: 6.0, nodes: 512 });
        assert!((a.grid.lo - (mean - 6.0 * std)).abs() < 1e-9);
        assert!((a.grid.hi() - (mean + 6.0 * std)).abs() < 1e-9);
        assert!((a.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_prediction_with_adapt_conserves_mass() {
        let m = rw();
        let mut d = GridDensity::init(&m, &Prior::Normal { mean: 0.0, std: 1.0 }, 0.0, &GridConfig::default()).unwrap();
        let policy = AdaptPolicy::default();
        for _ in 0..100 {
            let (mean, std) = d.mean_std();
            let sd = (std * std + 1.0).sqrt();
            let target = Grid::spanning(mean - policy.k * sd, mean + policy.k * sd, policy.nodes);
            let pred = d.predict_on(&m, &target);
            let mass: f64 = pred.iter().sum::<f64>() * target.dx;
            assert!((mass - 1.0).abs() < 1e-6, "{mass}");
            d = grid_adapt(&GridDensity::from_values(target, &pred).unwrap(), &policy);
        }
        let (_, std) = d.mean_std();
        assert!((std * std - 100.5).abs() < 1e-3);
    }

    #[test]
    fn cell_lookup() {
        let g = Grid::spanning(0.0, 1.0, 11);
        assert_eq!(g.cell(0.0), Some(0));
        assert_eq!(g.cell(0.26), Some(3));
        assert_eq!(g.cell(-0.06), None);
        assert_eq!(g.cell(1.04), Some(10));
    }
}
