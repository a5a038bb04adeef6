//! Bound ingredients on finite models, and exhaustive audits of the numerator and
//! denominator inequalities.

use serde::{Deserialize, Serialize};

use super::{assemble, BoundBreakdown, BoundInputs};
use crate::doeblin::{log_rho, FiniteLd};
use crate::error::{Error, Result};
use crate::filter::finite::for_each_path;
use crate::numeric::log_sum_exp;

fn check_law(nu: &[f64], m: usize) -> Result<()> {
    if nu.len() != m || nu.iter().any(|p| !(*p >= 0.0)) || (nu.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("initial law must be a probability vector over {m} states")));
    }
    Ok(())
}

/// Exact bound ingredients; `eta` is the smallest value meeting the tail condition on `ys`.
pub fn finite_inputs(ld: &FiniteLd, nu: &[f64], nu_prime: &[f64], ys: &[f64]) -> Result<BoundInputs> {
    let m = ld.model.states();
    check_law(nu, m)?;
    check_law(nu_prime, m)?;
    if ys.len() < 2 {
        return Err(Error::Config("need at least two observations".into()));
    }
    let mut log_eps_minus = Vec::new();
    let mut log_psi = Vec::new();
    let mut log_rhos = Vec::new();
    for w in ys.windows(2) {
        let (lo, hi) = ld.eps(w[0], w[1]);
        log_eps_minus.push(lo.ln());
        log_psi.push(ld.psi(w[1]).ln());
        log_rhos.push(log_rho(lo, hi)?);
    }
    let phi = ld.phi(nu, ys[0], ys[1]);
    let phi_prime = ld.phi(nu_prime, ys[0], ys[1]);
    Ok(BoundInputs {
        log_eps_minus,
        log_psi,
        log_rho: log_rhos,
        log_upsilon: ys.iter().map(|&y| ld.upsilon_all(y).ln()).collect(),
        log_phi_nu: phi.ln(),
        log_phi_nu_prime: phi_prime.ln(),
        eta: ld.eta_for(ys),
        delta: None,
        d_mode: None,
        phi_underflow: phi < 1e-300 || phi_prime < 1e-300,
    })
}

/// The bound on `y_{0:n}` with `n = ys.len() - 1`.
pub fn theorem4_finite(ld: &FiniteLd, nu: &[f64], nu_prime: &[f64], ys: &[f64], alpha: f64) -> Result<BoundBreakdown> {
    let inputs = finite_inputs(ld, nu, nu_prime, ys)?;
    assemble(&inputs, alpha, ys.len() - 1)
}

/// Both sides of an inequality, in log form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropGap {
    pub log_lhs: f64,
    pub log_rhs: f64,
}

impl PropGap {
    /// `lhs <= rhs` up to relative slack.
    pub fn lhs_below(&self, slack: f64) -> bool {
        self.log_lhs == f64::NEG_INFINITY || self.log_lhs <= self.log_rhs + slack.ln_1p()
    }

    /// `lhs >= rhs` up to relative slack.
    pub fn lhs_above(&self, slack: f64) -> bool {
        self.log_rhs == f64::NEG_INFINITY || self.log_lhs >= self.log_rhs - slack.ln_1p()
    }
}

/// Per-final-state path sums `log E_nu[prod g 1{X_n = j}]`.
fn end_state_sums(ld: &FiniteLd, nu: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
    let m = ld.model.states();
    let mut by_end: Vec<Vec<f64>> = vec![Vec::new(); m];
    for_each_path(&ld.model, nu, ys, |path, w| by_end[path[path.len() - 1]].push(w))?;
    Ok(by_end.iter().map(|v| log_sum_exp(v)).collect())
}

/// Numerator inequality. `lhs = max_A |U_nu(A) Z_nu' - U_nu'(A) Z_nu|` over all subsets,
/// from exhaustive path sums; `rhs` is the product-chain expectation with `rho^{delta_i}`
/// discounts, by forward recursion over state pairs.
pub fn prop2_gap(ld: &FiniteLd, nu: &[f64], nu_prime: &[f64], ys: &[f64]) -> Result<PropGap> {
    let m = ld.model.states();
    check_law(nu, m)?;
    check_law(nu_prime, m)?;
    if m > 20 {
        return Err(Error::OracleScale { paths: (2f64).powi(m as i32), limit: (2f64).powi(20) });
    }
    let u = end_state_sums(ld, nu, ys)?;
    let u2 = end_state_sums(ld, nu_prime, ys)?;
    let (z, z2) = (log_sum_exp(&u), log_sum_exp(&u2));
    let shift = z + z2;
    let mut best: f64 = 0.0;
    for mask in 1u64..(1u64 << m) {
        let diff: f64 = (0..m)
            .filter(|j| mask >> j & 1 == 1)
            .map(|j| (u[j] + z2 - shift).exp() - (u2[j] + z - shift).exp())
            .sum();
        best = best.max(diff.abs());
    }
    Ok(PropGap { log_lhs: shift + best.ln(), log_rhs: product_chain_log_mass(ld, nu, nu_prime, ys)? })
}

/// `log E_{nu x nu'}[gbar(X0, y0) prod gbar(X_i, y_i) rho_i^{delta_i}]`.
fn product_chain_log_mass(ld: &FiniteLd, nu: &[f64], nu_prime: &[f64], ys: &[f64]) -> Result<f64> {
    let fm = &ld.model;
    let m = fm.states();
    let g0 = fm.g_vec(ys[0]);
    let mut alpha: Vec<f64> = (0..m * m).map(|s| nu[s / m] * nu_prime[s % m] * g0[s / m] * g0[s % m]).collect();
    let mut log_scale = 0.0;
    for k in 1..ys.len() {
        let (lo, hi) = ld.eps(ys[k - 1], ys[k]);
        let rho_k = log_rho(lo, hi)?.exp();
        let g = fm.g_vec(ys[k]);
        let mut next = vec![0.0; m * m];
        for (s, &a) in alpha.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let (i, j) = (s / m, s % m);
            let from_in = ld.contains(ys[k - 1], i) && ld.contains(ys[k - 1], j);
            for i2 in 0..m {
                for j2 in 0..m {
                    let both_in = from_in && ld.contains(ys[k], i2) && ld.contains(ys[k], j2);
                    let disc = if both_in { rho_k } else { 1.0 };
                    next[i2 * m + j2] += a * fm.q(i, i2) * fm.q(j, j2) * g[i2] * g[j2] * disc;
                }
            }
        }
        let total: f64 = next.iter().sum();
        if total == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        next.iter_mut().for_each(|v| *v /= total);
        log_scale += total.ln();
        alpha = next;
    }
    Ok(log_scale + alpha.iter().sum::<f64>().ln())
}

/// Denominator inequality: `lhs = E_nu[prod g]` by path enumeration,
/// `rhs = prod eps_minus * Phi_nu * prod Psi` over transitions `2..=n`.
pub fn prop3_gap(ld: &FiniteLd, nu: &[f64], ys: &[f64]) -> Result<PropGap> {
    check_law(nu, ld.model.states())?;
    if ys.len() < 2 {
        return Err(Error::Config("need at least two observations".into()));
    }
    let lhs = log_sum_exp(&end_state_sums(ld, nu, ys)?);
    let mut rhs = ld.phi(nu, ys[0], ys[1]).ln();
    for w in ys[1..].windows(2) {
        rhs += ld.eps(w[0], w[1]).0.ln() + ld.psi(w[1]).ln();
    }
    Ok(PropGap { log_lhs: lhs, log_rhs: rhs })
}
