//! Numerical audit of the two-sided sandwich
//! `eps_minus * lambda(A ∩ C') <= Q(x, A ∩ C') <= eps_plus * lambda(A ∩ C')`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{d_exact, ContinuousLd};
use crate::error::Result;
use crate::model::stream_rng;
use crate::numeric::integrate;

pub const QUADRATURE_TOL: f64 = 1e-8;
pub const RELATIVE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdViolation {
    pub x: f64,
    pub a: (f64, f64),
    pub kernel_mass: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdReport {
    pub pairs_checked: usize,
    /// `min (Q - lower) / lower`; negative beyond the slack means a violation.
    pub worst_lower_margin: f64,
    /// `min (upper - Q) / upper`.
    pub worst_upper_margin: f64,
    pub violations: Vec<LdViolation>,
}

impl LdReport {
    pub fn empty() -> Self {
        LdReport {
            pairs_checked: 0,
            worst_lower_margin: f64::INFINITY,
            worst_upper_margin: f64::INFINITY,
            violations: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Records one `(x, A)` check with reference mass `lam = lambda(A)`.
    pub fn record(&mut self, x: f64, a: (f64, f64), kernel_mass: f64, lam: f64, eps: (f64, f64)) {
        let (lower, upper) = (eps.0 * lam, eps.1 * lam);
        let lower_margin = if lower > 0.0 { (kernel_mass - lower) / lower } else { f64::INFINITY };
        let upper_margin = if upper > 0.0 { (upper - kernel_mass) / upper } else { f64::INFINITY };
        self.pairs_checked += 1;
        self.worst_lower_margin = self.worst_lower_margin.min(lower_margin);
        self.worst_upper_margin = self.worst_upper_margin.min(upper_margin);
        if lower_margin < -RELATIVE_SLACK || upper_margin < -RELATIVE_SLACK {
            self.violations.push(LdViolation { x, a, kernel_mass, lower, upper });
        }
    }

    pub fn merge(mut self, other: LdReport) -> Self {
        self.pairs_checked += other.pairs_checked;
        self.worst_lower_margin = self.worst_lower_margin.min(other.worst_lower_margin);
        self.worst_upper_margin = self.worst_upper_margin.min(other.worst_upper_margin);
        self.violations.extend(other.violations);
        self
    }
}

/// Samples `x` uniformly in `from` and a random subinterval `A` of `to`, integrates the
/// transition density `q(x, x')` over `A` and checks the sandwich with Lebesgue reference.
pub fn verify_sandwich<Q: Fn(f64, f64) -> f64>(
    q: Q,
    from: (f64, f64),
    to: (f64, f64),
    eps: (f64, f64),
    budget: usize,
    seed: u64,
) -> LdReport {
    let mut rng = stream_rng(seed, 7);
    let mut report = LdReport::empty();
    for _ in 0..budget {
        let x = from.0 + (from.1 - from.0) * rng.random::<f64>();
        let (u, w): (f64, f64) = (rng.random(), rng.random());
        let a = (to.0 + (to.1 - to.0) * u.min(w), to.0 + (to.1 - to.0) * u.max(w));
        if a.1 <= a.0 {
            continue;
        }
        let mass = integrate(|xp| q(x, xp), a.0, a.1, 0.0, QUADRATURE_TOL).value;
        report.record(x, a, mass, a.1 - a.0, eps);
    }
    report
}

/// Audits the interval construction on the observation pair `(y, y')`, with `D` in exact mode.
pub fn verify_ld_property(ld: &ContinuousLd, y: f64, y_next: f64, budget: usize, seed: u64) -> Result<LdReport> {
    let d = d_exact(&ld.model, y, y_next)?;
    let from = ld.set(y)?.require_interval()?;
    let to = ld.set(y_next)?.require_interval()?;
    let model = &ld.model;
    Ok(verify_sandwich(|x, xp| model.transition_density1(x, xp), from, to, ld.eps(d), budget, seed))
}
