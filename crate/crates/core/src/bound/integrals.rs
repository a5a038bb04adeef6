//! `Phi_nu` (two-step prior mass into the set) and `Psi` (reference mass of the likelihood on
//! the set) for scalar additive models.

use serde::{Deserialize, Serialize};

use crate::doeblin::ld_set;
use crate::error::{Error, Result};
use crate::model::{stream_rng, NoiseSpec, Prior, StateSpaceModel};
use crate::numeric::{integrate, log_sum_exp};

pub const PHI_TOL: f64 = 1e-8;
const SCAN_POINTS: usize = 401;
const UNDERFLOW: f64 = 1e-300;

/// A positive quantity carried in log form; `underflow` marks values below `1e-300`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    pub log: f64,
    pub underflow: bool,
}

impl LogValue {
    fn new(log: f64) -> Self {
        LogValue { log, underflow: log < UNDERFLOW.ln() }
    }
}

/// `log q(x, x')` without underflow for i.i.d. noise.
fn ln_transition(model: &StateSpaceModel, x: f64, x_next: f64) -> f64 {
    let u = x_next - model.f.apply1(x);
    match &model.state_noise {
        NoiseSpec::Iid { density } => density.ln_pdf1(u),
        spec => spec.density1(x, u).ln(),
    }
}

/// `log int_a^b exp(log_f)`: the integrand is rescaled by its maximum on a scan grid, and
/// integrated piecewise between scan points around the maximum.
fn log_integrate<F: Fn(f64) -> f64>(log_f: F, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return f64::NEG_INFINITY;
    }
    let step = (b - a) / (SCAN_POINTS - 1) as f64;
    let mut peak = f64::NEG_INFINITY;
    let mut at = 0;
    for i in 0..SCAN_POINTS {
        let v = log_f(a + step * i as f64);
        if v > peak {
            peak = v;
            at = i;
        }
    }
    if peak == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let f = |x: f64| (log_f(x) - peak).exp();
    // three pieces so the integrand peak sits inside a short middle one
    let lo = a + step * at.saturating_sub(2) as f64;
    let hi = (a + step * (at + 2) as f64).min(b);
    let total: f64 = [(a, lo), (lo, hi), (hi, b)]
        .iter()
        .filter(|(l, r)| r > l)
        .map(|&(l, r)| integrate(f, l, r, 0.0, PHI_TOL).value)
        .sum();
    peak + total.ln()
}

/// `log nu[g(., y0) Q g(., y1) 1_C(y1)]` by nested quadrature.
pub fn phi_nu(model: &StateSpaceModel, nu: &Prior, y0: f64, y1: f64, delta: f64) -> Result<LogValue> {
    nu.validate()?;
    let (c_lo, c_hi) = ld_set(y1, delta, model)?.require_interval()?;
    let inner = |x: f64| log_integrate(|xp| ln_transition(model, x, xp) + model.ln_likelihood1(xp, y1), c_lo, c_hi);
    let outer = |x: f64| match nu.ln_pdf1(x) {
        Some(l) if l > f64::NEG_INFINITY => l + model.ln_likelihood1(x, y0) + inner(x),
        _ => f64::NEG_INFINITY,
    };
    let log = match nu {
        Prior::Point { x } => model.ln_likelihood1(*x, y0) + inner(*x),
        Prior::Uniform { lo, hi } => log_integrate(outer, *lo, *hi),
        Prior::Normal { .. } => {
            let breaks = outer_breaks(model, nu, y0, (c_lo, c_hi));
            let pieces: Vec<f64> = breaks.windows(2).map(|w| log_integrate(outer, w[0], w[1])).collect();
            log_sum_exp(&pieces)
        }
    };
    Ok(LogValue::new(log))
}

/// Breakpoints covering the prior support, the states explaining `y0`, and the states from
/// which `C` is reachable; the integrand can peak far outside the prior support when `y0`
/// disagrees with it. Each piece gets its own peak scan.
fn outer_breaks(model: &StateSpaceModel, nu: &Prior, y0: f64, c: (f64, f64)) -> Vec<f64> {
    let (p_lo, p_hi) = nu.support();
    let mut pts = vec![p_lo, p_hi];
    let r_v = model.obs_noise.support_radius(1e-16);
    pts.extend([model.h.inverse1(y0 - r_v), model.h.inverse1(y0 + r_v)].into_iter().flatten());
    // heavy-tailed state noise: same reach cap as the grid filter
    let r_q = model.state_noise.envelope().0.support_radius(1e-16).min(1e4 * model.state_noise.spread());
    pts.extend([model.f.inverse1(c.0 - r_q), model.f.inverse1(c.1 + r_q)].into_iter().flatten());
    pts.retain(|x| x.is_finite());
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Monte Carlo estimate of `Phi_nu`: `x ~ nu`, `x' ~ Q(x, .)`.
pub fn phi_nu_monte_carlo(
    model: &StateSpaceModel,
    nu: &Prior,
    y0: f64,
    y1: f64,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    nu.validate()?;
    if samples < 2 {
        return Err(Error::Config("need at least two samples".into()));
    }
    let set = ld_set(y1, delta, model)?;
    let mut rng = stream_rng(seed, 11);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let x = nu.sample1(&mut rng);
        let xp = model.f.apply1(x) + model.state_noise.sample(&[x], &mut rng)[0];
        let v = if set.contains(xp) { model.likelihood1(x, y0) * model.likelihood1(xp, y1) } else { 0.0 };
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(MonteCarloEstimate { mean, std_error: (var / n).sqrt(), samples })
}

/// `int_{C(y', delta)} v(y' - h(x)) dx`.
pub fn psi_c(model: &StateSpaceModel, y_next: f64, delta: f64) -> Result<f64> {
    let (lo, hi) = ld_set(y_next, delta, model)?.require_interval()?;
    Ok(integrate(|x| model.likelihood1(x, y_next), lo, hi, 0.0, 1e-12).value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doeblin::psi_floor;

    #[test]
    fn psi_gaussian_interval() {
        let m = StateSpaceModel::gaussian_random_walk(1.0, 1.0);
        // P(|Z| <= 1) = erf(1 / sqrt 2)
        let oracle = statrs::function::erf::erf(1.0 / 2f64.sqrt());
        let got = psi_c(&m, 0.3, 1.0).unwrap();
        // statrs erf is accurate to a few 1e-11 here
        assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
        assert!((oracle - 0.682689).abs() < 1e-6);
        assert!((psi_c(&m, 0.3, 40.0).unwrap() - 1.0).abs() < 1e-12);
        for d in [0.1, 0.5, 1.0, 3.0] {
            assert!(psi_c(&m, -2.0, d).unwrap() >= psi_floor(&m, -2.0, d).unwrap());
        }
    }

    #[test]
    fn phi_matches_closed_form() {
        // point prior at 0, y0 = 0, y1 = 0, unit variances: g(0, 0) * int_{-1}^{1} N(x'; 0, 1) N(0; x', 1) dx'
        let m = StateSpaceModel::gaussian_random_walk(1.0, 1.0);
        let got = phi_nu(&m, &Prior::Point { x: 0.0 }, 0.0, 0.0, 1.0).unwrap().log.exp();
        let s = (2.0 * std::f64::consts::PI).sqrt();
        // N(x'; 0, 1)^2 = exp(-x'^2) / (2 pi), whose integral over [-1, 1] is sqrt(pi) erf(1) / (2 pi)
        let inner = statrs::function::erf::erf(1.0) / (2.0 * std::f64::consts::PI.sqrt());
        assert!((got - inner / s).abs() < 1e-10 * got);
    }

    #[test]
    fn quadrature_agrees_with_monte_carlo() {
        let m = StateSpaceModel::gaussian_random_walk(1.0, 1.0);
        let nu = Prior::Normal { mean: -1.0, std: 1.0 };
        let q = phi_nu(&m, &nu, -0.5, 0.4, 1.5).unwrap();
        assert!(!q.underflow);
        let mc = phi_nu_monte_carlo(&m, &nu, -0.5, 0.4, 1.5, 1_000_000, 8).unwrap();
        assert!((q.log.exp() - mc.mean).abs() < 3.0 * mc.std_error, "{} vs {} ± {}", q.log.exp(), mc.mean, mc.std_error);
    }

    #[test]
    fn cauchy_state_noise_agrees_with_monte_carlo() {
        use crate::model::{DependentNoise, NoiseSpec};
        let mut m = StateSpaceModel::gaussian_random_walk(1.0, 1.0);
        m.state_noise = NoiseSpec::Dependent { noise: DependentNoise::ScaledCauchy { sigma_mid: 1.0, sigma_amp: 0.3 } };
        let nu = Prior::Normal { mean: -5.0, std: 1.0 };
        let q = phi_nu(&m, &nu, -4.2, -3.1, 2.1).unwrap();
        assert!(q.log.is_finite());
        let mc = phi_nu_monte_carlo(&m, &nu, -4.2, -3.1, 2.1, 1_000_000, 4).unwrap();
        assert!((q.log.exp() - mc.mean).abs() < 3.0 * mc.std_error, "{} vs {} ± {}", q.log.exp(), mc.mean, mc.std_error);
    }

    #[test]
    fn far_priors_stay_finite_in_log() {
        use statrs::function::erf::erfc;
        let m = StateSpaceModel::gaussian_random_walk(1.0, 1.0);
        let nu = Prior::Normal { mean: -40.0, std: 1.0 };
        let q = phi_nu(&m, &nu, 40.0, 40.0, 2.0).unwrap();
        assert!(q.underflow);
        // (y0, y1) ~ N((-40, -40), [[2, 1], [1, 3]]); given them, x' ~ N(24, 0.6)
        let log_joint = -0.5 * 3840.0 - (2.0 * std::f64::consts::PI).ln() - 0.5 * 5f64.ln();
        let z = |c: f64| (c - 24.0) / 0.6f64.sqrt();
        let tail = 0.5 * (erfc(z(38.0) / 2f64.sqrt()) - erfc(z(42.0) / 2f64.sqrt()));
        let oracle = log_joint + tail.ln();
        assert!((q.log - oracle).abs() < 1e-6, "{} vs {oracle}", q.log);
    }
}
