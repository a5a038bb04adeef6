//! Exact filtering on finite state spaces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FiniteModel;

/// Largest number of paths any exhaustive enumeration will visit.
pub const PATH_LIMIT: f64 = 1e7;

fn check_law(fm: &FiniteModel, nu: &[f64]) -> Result<()> {
    if nu.len() != fm.states() {
        return Err(Error::Config(format!("initial law has {} entries for {} states", nu.len(), fm.states())));
    }
    let s: f64 = nu.iter().sum();
    if nu.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (s - 1.0).abs() > 1e-9 {
        return Err(Error::Config("initial law must be a probability vector".into()));
    }
    Ok(())
}

/// Normalizes in place and returns the normalizing constant.
fn normalize(p: &mut [f64]) -> f64 {
    let z: f64 = p.iter().sum();
    if z > 0.0 && z.is_finite() {
        p.iter_mut().for_each(|v| *v /= z);
    }
    z
}

/// `phi_0 ∝ nu * g(., y0)`.
pub fn finite_init(fm: &FiniteModel, nu: &[f64], y0: f64) -> Result<Vec<f64>> {
    check_law(fm, nu)?;
    let mut p: Vec<f64> = nu.iter().zip(fm.g_vec(y0)).map(|(a, g)| a * g).collect();
    let z = normalize(&mut p);
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::DegenerateInit);
    }
    Ok(p)
}

/// Vector-matrix product, pointwise likelihood, normalization.
pub fn finite_step(fm: &FiniteModel, phi: &[f64], y: f64, step: usize) -> Result<Vec<f64>> {
    let mut p: Vec<f64> = fm.propagate(phi).iter().zip(fm.g_vec(y)).map(|(a, g)| a * g).collect();
    let z = normalize(&mut p);
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::FilterCollapse { step });
    }
    Ok(p)
}

/// Forward recursion: `(phi_n, log E_nu[prod_i g(X_i, y_i)])`.
pub fn exact_filter_finite(fm: &FiniteModel, nu: &[f64], ys: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_law(fm, nu)?;
    let (first, rest) = ys.split_first().ok_or_else(|| Error::Config("no observations".into()))?;
    let mut p: Vec<f64> = nu.iter().zip(fm.g_vec(*first)).map(|(a, g)| a * g).collect();
    let mut log_z = normalize(&mut p).ln();
    for (k, y) in rest.iter().enumerate() {
        let mut next: Vec<f64> = fm.propagate(&p).iter().zip(fm.g_vec(*y)).map(|(a, g)| a * g).collect();
        let z = normalize(&mut next);
        if !(z > 0.0) {
            return Err(Error::FilterCollapse { step: k + 1 });
        }
        log_z += z.ln();
        p = next;
    }
    Ok((p, log_z))
}

/// Number of length-`n + 1` paths on `m` states.
pub fn path_count(m: usize, n: usize) -> f64 {
    (m as f64).powi(n as i32 + 1)
}

/// Calls `visit(path, log_weight)` for every state path, with the weight of
/// `nu(x_0) g(x_0, y_0) prod Q(x_{i-1}, x_i) g(x_i, y_i)`.
pub fn for_each_path<F: FnMut(&[usize], f64)>(fm: &FiniteModel, nu: &[f64], ys: &[f64], mut visit: F) -> Result<()> {
    let m = fm.states();
    let paths = path_count(m, ys.len().saturating_sub(1));
    if paths > PATH_LIMIT {
        return Err(Error::OracleScale { paths, limit: PATH_LIMIT });
    }
    let log_g: Vec<Vec<f64>> = ys.iter().map(|&y| fm.g_vec(y).iter().map(|g| g.ln()).collect()).collect();
    let mut path = vec![0usize; ys.len()];
    let mut acc = vec![0.0; ys.len()];
    fn rec<F: FnMut(&[usize], f64)>(
        fm: &FiniteModel,
        log_g: &[Vec<f64>],
        depth: usize,
        path: &mut [usize],
        acc: &mut [f64],
        visit: &mut F,
    ) {
        for s in 0..fm.states() {
            let prev = acc[depth - 1];
            let w = prev + fm.q(path[depth - 1], s).ln() + log_g[depth][s];
            path[depth] = s;
            acc[depth] = w;
            if depth + 1 == path.len() {
                visit(path, w);
            } else {
                rec(fm, log_g, depth + 1, path, acc, visit);
            }
        }
    }
    for s in 0..m {
        path[0] = s;
        acc[0] = nu[s].ln() + log_g[0][s];
        if ys.len() == 1 {
            visit(&path, acc[0]);
        } else {
            rec(fm, &log_g, 1, &mut path, &mut acc, &mut visit);
        }
    }
    Ok(())
}

/// Compensated sum of `exp(v - shift)`.
pub(crate) fn shifted_sum(values: &[f64], shift: f64) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = (v - shift).exp();
        let s = sum + t;
        if sum.abs() >= t.abs() {
            c += (sum - s) + t;
        } else {
            c += (t - s) + sum;
        }
        sum = s;
    }
    sum + c
}

/// Exhaustive path summation: same outputs as [`exact_filter_finite`].
pub fn exhaustive_filter_finite(fm: &FiniteModel, nu: &[f64], ys: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_law(fm, nu)?;
    if ys.is_empty() {
        return Err(Error::Config("no observations".into()));
    }
    let m = fm.states();
    let mut by_end: Vec<Vec<f64>> = vec![Vec::new(); m];
    for_each_path(fm, nu, ys, |path, w| by_end[path[path.len() - 1]].push(w))?;
    let shift = by_end.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = by_end.iter().map(|v| shifted_sum(v, shift)).collect();
    let z = normalize(&mut p);
    Ok((p, shift + z.ln()))
}

/// Two finite filters propagated as a base vector and a scaled difference, so that
/// tiny distances stay representable (see [`super::grid::GridPair`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitePair {
    pub base: Vec<f64>,
    pub diff: Vec<f64>,
    pub log_scale: f64,
    pub step: usize,
}

impl FinitePair {
    pub fn init(fm: &FiniteModel, nu: &[f64], nu_prime: &[f64], y0: f64) -> Result<Self> {
        let p = finite_init(fm, nu, y0)?;
        let base = finite_init(fm, nu_prime, y0)?;
        let d: Vec<f64> = p.iter().zip(&base).map(|(a, b)| a - b).collect();
        let (diff, log_scale) = unit_scale(d);
        Ok(FinitePair { base, diff, log_scale, step: 0 })
    }

    pub fn step(&mut self, fm: &FiniteModel, y: f64) -> Result<()> {
        let step = self.step + 1;
        let g = fm.g_vec(y);
        let u: Vec<f64> = fm.propagate(&self.base).iter().zip(&g).map(|(a, b)| a * b).collect();
        let ud: Vec<f64> = fm.propagate(&self.diff).iter().zip(&g).map(|(a, b)| a * b).collect();
        let z_base: f64 = u.iter().sum();
        let z_diff: f64 = ud.iter().sum();
        let z = z_base + self.log_scale.exp() * z_diff;
        if !(z_base > 0.0 && z > 0.0) {
            return Err(Error::FilterCollapse { step });
        }
        let base: Vec<f64> = u.iter().map(|v| v / z_base).collect();
        let d: Vec<f64> = ud.iter().zip(&base).map(|(a, b)| a - b * z_diff).collect();
        let (diff, shift) = unit_scale(d);
        self.log_scale += shift - z.ln();
        self.base = base;
        self.diff = diff;
        self.step = step;
        Ok(())
    }

    pub fn log_tv(&self) -> f64 {
        let l1: f64 = self.diff.iter().map(|d| d.abs()).sum();
        if l1 == 0.0 {
            return f64::NEG_INFINITY;
        }
        (self.log_scale + (0.5 * l1).ln()).min(0.0)
    }

    pub fn first(&self) -> Vec<f64> {
        let s = self.log_scale.exp();
        let mut p: Vec<f64> = self.base.iter().zip(&self.diff).map(|(b, d)| (b + s * d).max(0.0)).collect();
        normalize(&mut p);
        p
    }

    pub fn second(&self) -> Vec<f64> {
        self.base.clone()
    }
}

fn unit_scale(mut d: Vec<f64>) -> (Vec<f64>, f64) {
    let m = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 || !m.is_finite() {
        d.iter_mut().for_each(|x| *x = 0.0);
        return (d, f64::NEG_INFINITY);
    }
    d.iter_mut().for_each(|x| *x /= m);
    (d, m.ln())
}
