//! Local Doeblin set functions: observation-indexed state sets on which the transition kernel
//! is sandwiched between `eps_minus` and `eps_plus` multiples of a reference measure.

pub mod envelope;
pub mod finite;
pub mod verify;

use serde::{Deserialize, Serialize};

pub use envelope::{
    d_bound_misspecified, d_bound_recorded, d_exact, d_quantity, envelope_radius, eps_envelope, r_delta,
    v_diagnostic, z_diagnostic, DMode, DPreference, EnvelopeFns, MisspecifiedD, NoiseRecord,
};
pub use finite::{finite_ld_construct, FiniteLd};
pub use verify::{verify_ld_property, verify_sandwich, LdReport, LdViolation};

use crate::error::{Error, Result};
use crate::model::{MapFn, NoiseDensity, StateSpaceModel};

/// `{x : |h(x) - y| <= delta}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdSet {
    pub y: f64,
    pub delta: f64,
    pub h: MapFn,
    /// Explicit endpoints when `h` is strictly monotone.
    pub interval: Option<(f64, f64)>,
}

impl LdSet {
    pub fn contains(&self, x: f64) -> bool {
        (self.h.apply1(x) - self.y).abs() <= self.delta
    }

    /// Lebesgue measure; only known in closed form for monotone `h`.
    pub fn measure(&self) -> Option<f64> {
        self.interval.map(|(lo, hi)| hi - lo)
    }

    pub fn require_interval(&self) -> Result<(f64, f64)> {
        self.interval
            .ok_or_else(|| Error::LdConstruction("the set is only available as an interval for monotone h".into()))
    }
}

pub fn ld_set(y: f64, delta: f64, model: &StateSpaceModel) -> Result<LdSet> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Config(format!("delta must be positive and finite, got {delta}")));
    }
    let interval = match (model.h.inverse1(y - delta), model.h.inverse1(y + delta)) {
        (Some(a), Some(b)) => Some((a.min(b), a.max(b))),
        _ => None,
    };
    Ok(LdSet { y, delta, h: model.h.clone(), interval })
}

/// `1 - (eps_minus / eps_plus)^2`.
pub fn rho(eps_minus: f64, eps_plus: f64) -> Result<f64> {
    Ok(log_rho(eps_minus, eps_plus)?.exp())
}

/// `log(1 - r^2)` with `r = eps_minus / eps_plus`, accurate when `r` is tiny.
pub fn log_rho(eps_minus: f64, eps_plus: f64) -> Result<f64> {
    if eps_minus > eps_plus {
        return Err(Error::EnvelopeOrder { minus: eps_minus, plus: eps_plus });
    }
    if !(eps_plus > 0.0) {
        return Err(Error::LdConstruction(format!("eps_plus must be positive, got {eps_plus}")));
    }
    let r = eps_minus / eps_plus;
    Ok((-(r * r)).ln_1p())
}

/// Set over which the likelihood supremum is taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpsilonSet {
    All,
    /// Complement of `C(y, delta)`.
    Complement(f64),
    /// State interval `[lo, hi]`.
    Interval(f64, f64),
}

/// Points per unit window used by grid maximizations.
pub const UPSILON_GRID_POINTS: usize = 20_001;

/// `sup_{x in set} v(y - h(x))`, assuming `h` is onto.
pub fn upsilon(model: &StateSpaceModel, y: f64, set: UpsilonSet) -> f64 {
    let v = &model.obs_noise;
    match set {
        UpsilonSet::All => v.peak1(),
        UpsilonSet::Complement(delta) => tail_sup(v, delta),
        UpsilonSet::Interval(lo, hi) => {
            let n = UPSILON_GRID_POINTS;
            let step = (hi - lo) / (n - 1) as f64;
            let mut best = (0..n).map(|i| v.pdf1(y - model.h.apply1(lo + step * i as f64))).fold(0.0, f64::max);
            // the grid can step over the peak; evaluate it directly when its preimage lies inside
            if let Some(x) = model.h.inverse1(y - v.peak_location()) {
                if x >= lo && x <= hi {
                    best = best.max(v.peak1());
                }
            }
            best
        }
    }
}

/// `sup_{|s| > delta} v(s)`.
pub fn tail_sup(v: &NoiseDensity, delta: f64) -> f64 {
    if v.is_symmetric_unimodal() {
        return v.pdf1(delta);
    }
    let reach = v.support_radius(1e-16).max(delta);
    let n = UPSILON_GRID_POINTS;
    let step = (reach - delta) / (n - 1) as f64;
    (0..n)
        .flat_map(|i| {
            let s = delta + step * i as f64;
            [v.pdf1(s), v.pdf1(-s)]
        })
        .fold(0.0, f64::max)
}

/// `inf_{|s| <= delta} v(s)`.
pub fn inner_inf(v: &NoiseDensity, delta: f64) -> f64 {
    if v.is_symmetric_unimodal() {
        return v.pdf1(delta);
    }
    let n = UPSILON_GRID_POINTS;
    let step = 2.0 * delta / (n - 1) as f64;
    (0..n).map(|i| v.pdf1(-delta + step * i as f64)).fold(f64::INFINITY, f64::min)
}

/// Largest radius tried before declaring the tail condition violated, in units of the spread.
const H2_REACH: f64 = 1e12;

/// Smallest `delta` with `sup_{|s| > delta} v(s) <= eta * sup v`.
pub fn choose_delta_for_eta(model: &StateSpaceModel, eta: f64) -> Result<f64> {
    if !(eta > 0.0) || eta.is_nan() {
        return Err(Error::Config(format!("eta must be positive, got {eta}")));
    }
    if eta >= 1.0 {
        return Ok(0.0);
    }
    let v = &model.obs_noise;
    let target = eta * v.peak1();
    let holds = |d: f64| tail_sup(v, d) <= target;
    let mut delta = match v {
        NoiseDensity::Gaussian { std } => std * (2.0 * (1.0 / eta).ln()).sqrt(),
        _ => {
            let limit = H2_REACH * v.spread();
            let mut hi = v.spread();
            while !holds(hi) {
                hi *= 2.0;
                if hi > limit {
                    return Err(Error::H2Failure(format!(
                        "likelihood tail stays above {eta} of its peak beyond radius {limit:e}"
                    )));
                }
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if holds(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        }
    };
    // rounding in the closed form can leave the test a few ulps short
    let mut nudges = 0;
    while !holds(delta) {
        delta = delta * (1.0 + 4.0 * f64::EPSILON) + f64::MIN_POSITIVE;
        nudges += 1;
        if nudges > 1000 {
            return Err(Error::H2Failure(format!("no radius meets eta = {eta}")));
        }
    }
    Ok(delta)
}

/// `lambda(C(y', delta)) * inf_{|s| <= delta} v(s)`, a floor for `Psi`.
pub fn psi_floor(model: &StateSpaceModel, y_next: f64, delta: f64) -> Result<f64> {
    let set = ld_set(y_next, delta, model)?;
    let (lo, hi) = set.require_interval()?;
    Ok((hi - lo) * inner_inf(&model.obs_noise, delta))
}

/// The interval construction for scalar additive models at a fixed `delta`, with
/// Lebesgue reference measure.
#[derive(Debug, Clone)]
pub struct ContinuousLd {
    pub model: StateSpaceModel,
    pub delta: f64,
    pub env: EnvelopeFns,
}

impl ContinuousLd {
    pub fn new(model: &StateSpaceModel, delta: f64) -> Result<Self> {
        if !model.is_scalar() {
            return Err(Error::LdConstruction("interval sets need a scalar model".into()));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("delta must be positive and finite, got {delta}")));
        }
        Ok(ContinuousLd { model: model.clone(), delta, env: EnvelopeFns::for_model(model) })
    }

    pub fn for_eta(model: &StateSpaceModel, eta: f64) -> Result<Self> {
        ContinuousLd::new(model, choose_delta_for_eta(model, eta)?)
    }

    pub fn set(&self, y: f64) -> Result<LdSet> {
        ld_set(y, self.delta, &self.model)
    }

    /// `(eps_minus, eps_plus)` given the preimage distance `d`.
    pub fn eps(&self, d: f64) -> (f64, f64) {
        eps_envelope(&self.model, &self.env, self.delta, d)
    }
}
