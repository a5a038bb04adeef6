//! Explicit forgetting bound: the worst activation product `Lambda_eta`, the remainder
//! `eta^{a_n} prod (eps Psi)^{-2} prod Upsilon^2 / (Phi_nu Phi_nu')`, and audits of the two
//! propositions behind it on finite models.

pub mod continuous;
pub mod finite;
pub mod integrals;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use continuous::{continuous_inputs, eta_grid, eta_sweep, theorem4_continuous, BoundRequest, PhiMethod};
pub use finite::{finite_inputs, prop2_gap, prop3_gap, theorem4_finite, PropGap};
pub use integrals::{phi_nu, phi_nu_monte_carlo, psi_c, LogValue, MonteCarloEstimate};

use crate::doeblin::DMode;
use crate::error::{Error, Result};
use crate::numeric::log_add_exp;

/// Smallest activation count `m` with `m >= alpha * n`.
pub fn activations(n: usize, alpha: f64) -> usize {
    let target = alpha * n as f64;
    (0..=n).find(|&k| k as f64 >= target).unwrap_or(target.ceil() as usize)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `log Lambda_eta`: the largest `sum delta_k log rho_k` over activation patterns with at
/// least `alpha n` ones, i.e. the sum of the `m` largest log-coefficients.
pub fn lambda_eta(log_rhos: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || alpha.is_nan() {
        return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
    }
    let n = log_rhos.len();
    if n == 0 {
        return Err(Error::Config("need at least one coefficient".into()));
    }
    let m = activations(n, alpha);
    if m > n {
        return Err(Error::InfeasibleConstraint { needed: m, available: n });
    }
    let mut sorted = log_rhos.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[..m].iter().sum())
}

/// `floor((1 - alpha) n / 2)`.
pub fn a_n(n: usize, alpha: f64) -> usize {
    ((1.0 - alpha) * n as f64 / 2.0).floor().max(0.0) as usize
}

/// Per-step ingredients of the bound for an observation record `y_{0:n}`.
///
/// `log_eps_minus`, `log_psi` and `log_rho` are indexed by the transition `k = 1..=n`
/// (entry `k - 1`); `log_upsilon` by the observation `i = 0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub log_eps_minus: Vec<f64>,
    pub log_psi: Vec<f64>,
    pub log_rho: Vec<f64>,
    pub log_upsilon: Vec<f64>,
    pub log_phi_nu: f64,
    pub log_phi_nu_prime: f64,
    pub eta: f64,
    pub delta: Option<f64>,
    pub d_mode: Option<DMode>,
    pub phi_underflow: bool,
}

impl BoundInputs {
    pub fn horizon(&self) -> usize {
        self.log_rho.len()
    }

    /// `i,log_eps_minus,log_psi,log_upsilon,log_rho`; transition columns are empty at `i = 0`.
    pub fn step_csv(&self) -> String {
        let mut out = String::from("i,log_eps_minus,log_psi,log_upsilon,log_rho\n");
        for (i, u) in self.log_upsilon.iter().enumerate() {
            if i == 0 {
                let _ = writeln!(out, "0,,,{u:e},");
            } else {
                let _ = writeln!(
                    out,
                    "{i},{:e},{:e},{u:e},{:e}",
                    self.log_eps_minus[i - 1],
                    self.log_psi[i - 1],
                    self.log_rho[i - 1]
                );
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundBreakdown {
    pub n: usize,
    pub alpha: f64,
    pub eta: f64,
    pub delta: Option<f64>,
    pub a_n: usize,
    pub log_lambda: f64,
    pub log_remainder: f64,
    /// `sum_{i=2}^n log eps_minus(y_{i-1}, y_i)`, unsquared.
    pub sum_log_eps_minus: f64,
    /// `sum_{i=2}^n log Psi(y_{i-1}, y_i)`, unsquared.
    pub sum_log_psi: f64,
    /// `sum_{i=0}^n log Upsilon_X(y_i)`, unsquared.
    pub sum_log_upsilon: f64,
    pub log_phi_nu: f64,
    pub log_phi_nu_prime: f64,
    /// `log(Lambda + remainder)`, possibly positive.
    pub log_bound: f64,
    /// `min(Lambda + remainder, 1)`.
    pub bound: f64,
    pub d_mode: Option<DMode>,
    pub diagnostics: Vec<String>,
}

/// Assembles the bound on the prefix `y_{0:n}` of the inputs.
pub fn assemble(inputs: &BoundInputs, alpha: f64, n: usize) -> Result<BoundBreakdown> {
    check_alpha(alpha)?;
    if n < 2 || n > inputs.horizon() {
        return Err(Error::Config(format!("prefix length must lie in [2, {}], got {n}", inputs.horizon())));
    }
    let log_lambda = lambda_eta(&inputs.log_rho[..n], alpha)?;
    let a = a_n(n, alpha);
    let sum_log_eps_minus: f64 = inputs.log_eps_minus[1..n].iter().sum();
    let sum_log_psi: f64 = inputs.log_psi[1..n].iter().sum();
    let sum_log_upsilon: f64 = inputs.log_upsilon[..=n].iter().sum();
    let eta_term = if a == 0 { 0.0 } else { a as f64 * inputs.eta.ln() };
    let mut diagnostics = Vec::new();
    let phis = inputs.log_phi_nu + inputs.log_phi_nu_prime;
    let log_remainder = if phis == f64::NEG_INFINITY {
        diagnostics.push("Phi underflowed to zero: the remainder is vacuous".to_string());
        f64::INFINITY
    } else if eta_term == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        eta_term - 2.0 * (sum_log_eps_minus + sum_log_psi) + 2.0 * sum_log_upsilon - phis
    };
    if inputs.phi_underflow {
        diagnostics.push("Phi below 1e-300, carried in log form".to_string());
    }
    let log_bound = if log_remainder.is_nan() { f64::INFINITY } else { log_add_exp(log_lambda, log_remainder) };
    Ok(BoundBreakdown {
        n,
        alpha,
        eta: inputs.eta,
        delta: inputs.delta,
        a_n: a,
        log_lambda,
        log_remainder,
        sum_log_eps_minus,
        sum_log_psi,
        sum_log_upsilon,
        log_phi_nu: inputs.log_phi_nu,
        log_phi_nu_prime: inputs.log_phi_nu_prime,
        log_bound,
        bound: log_bound.min(0.0).exp(),
        d_mode: inputs.d_mode,
        diagnostics,
    })
}

/// Breakdowns for every prefix `2..=n`.
pub fn assemble_prefixes(inputs: &BoundInputs, alpha: f64) -> Result<Vec<BoundBreakdown>> {
    (2..=inputs.horizon()).map(|n| assemble(inputs, alpha, n)).collect()
}
