//! Envelopes of the state noise over balls, the preimage distance `D`, and the
//! per-step quantities built from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MisspecifiedTruth, NoiseDensity, NoiseSpec, StateSpaceModel, Trajectory};

/// Radius-grid resolution for densities without closed-form envelopes.
pub const ENVELOPE_TABLE_POINTS: usize = 10_000;

/// `minus(r) = mu_minus * inf_{|s| <= r} psi(s)` and `plus(r) = mu_plus * sup_{|s| <= r} psi(s)`.
/// For i.i.d. noise `psi = gamma` and both constants are 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFns {
    pub psi: NoiseDensity,
    pub mu_minus: f64,
    pub mu_plus: f64,
    table: Option<Table>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Table {
    step: f64,
    inf: Vec<f64>,
    sup: Vec<f64>,
}

impl EnvelopeFns {
    pub fn new(noise: &NoiseSpec) -> Self {
        let (psi, mu_minus, mu_plus) = noise.envelope();
        let table = if psi.is_symmetric_unimodal() { None } else { Some(tabulate(&psi)) };
        EnvelopeFns { psi, mu_minus, mu_plus, table }
    }

    pub fn for_model(model: &StateSpaceModel) -> Self {
        EnvelopeFns::new(&model.state_noise)
    }

    pub fn is_closed_form(&self) -> bool {
        self.table.is_none()
    }

    pub fn minus(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        let inf = match &self.table {
            None => self.psi.pdf1(r),
            Some(t) => {
                let i = (r / t.step).ceil() as usize;
                if i < t.inf.len() {
                    t.inf[i]
                } else {
                    t.inf[t.inf.len() - 1].min(self.psi.pdf1(r)).min(self.psi.pdf1(-r))
                }
            }
        };
        self.mu_minus * inf
    }

    pub fn plus(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        let sup = match &self.table {
            None => self.psi.pdf1(0.0),
            Some(t) => {
                let i = (r / t.step).ceil() as usize;
                t.sup[i.min(t.sup.len() - 1)]
            }
        };
        self.mu_plus * sup
    }
}

fn tabulate(psi: &NoiseDensity) -> Table {
    let r_max = psi.support_radius(1e-12);
    let n = ENVELOPE_TABLE_POINTS;
    let step = r_max / (n - 1) as f64;
    let mut inf = Vec::with_capacity(n);
    let mut sup = Vec::with_capacity(n);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let s = step * i as f64;
        let (a, b) = (psi.pdf1(s), psi.pdf1(-s));
        lo = lo.min(a).min(b);
        hi = hi.max(a).max(b);
        inf.push(lo);
        sup.push(hi);
    }
    Table { step, inf, sup }
}

/// Envelope radius `(a + 1) b0 + (a + 1) b Delta + D`, used for both bounds.
pub fn envelope_radius(model: &StateSpaceModel, delta: f64, d: f64) -> f64 {
    (model.a + 1.0) * model.b0 + (model.a + 1.0) * model.b * delta + d
}

/// `(eps_minus, eps_plus)` for a pair of observations with preimage distance `d`.
pub fn eps_envelope(model: &StateSpaceModel, env: &EnvelopeFns, delta: f64, d: f64) -> (f64, f64) {
    let r = envelope_radius(model, delta, d);
    (env.minus(r), env.plus(r))
}

/// How `D` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DMode {
    Exact,
    RecordedNoise,
    Misspecified,
}

/// Which mode to try first when more than one is available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DPreference {
    #[default]
    ExactFirst,
    RecordedFirst,
}

/// Noises behind the step `k - 1 -> k` of a simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub eps_prev: f64,
    pub zeta: f64,
    pub eps: f64,
}

impl NoiseRecord {
    pub fn from_trajectory(t: &Trajectory, k: usize) -> Self {
        NoiseRecord { eps_prev: t.eps[k - 1][0], zeta: t.zetas[k - 1][0], eps: t.eps[k][0] }
    }

    pub fn all(t: &Trajectory) -> Vec<Self> {
        (1..=t.horizon()).map(|k| NoiseRecord::from_trajectory(t, k)).collect()
    }
}

/// `|f(h^-1(y)) - h^-1(y')|`.
pub fn d_exact(model: &StateSpaceModel, y: f64, y_next: f64) -> Result<f64> {
    let z = model.h.inverse1(y).ok_or_else(|| Error::DUnavailable("h has no inverse".into()))?;
    let z_next = model.h.inverse1(y_next).ok_or_else(|| Error::DUnavailable("h has no inverse".into()))?;
    Ok((model.f.apply1(z) - z_next).abs())
}

/// `(a + 1) b0 + a b |eps_{k-1}| + |zeta_k| + b |eps_k|` for data from the filtering model.
pub fn d_bound_recorded(model: &StateSpaceModel, rec: &NoiseRecord) -> f64 {
    let (a, b0, b) = (model.a, model.b0, model.b);
    (a + 1.0) * b0 + a * b * rec.eps_prev.abs() + rec.zeta.abs() + b * rec.eps.abs()
}

/// Both forms of the mis-specified bound; only their maximum is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisspecifiedD {
    /// `kappa + a* b0* + b0* + a* b* |eps*_{k-1}| + b* |eps*_k| + |zeta*_k|`
    pub proof_form: f64,
    /// `kappa + 2 a* b* + a* b* |eps*_{k-1}| + b* |eps*_k| + |zeta*_k|`
    pub statement_form: f64,
}

impl MisspecifiedD {
    pub fn value(&self) -> f64 {
        self.proof_form.max(self.statement_form)
    }
}

pub fn d_bound_misspecified(truth: &MisspecifiedTruth, rec: &NoiseRecord) -> MisspecifiedD {
    let m = &truth.model;
    let (a, b0, b) = (m.a, m.b0, m.b);
    let noise = a * b * rec.eps_prev.abs() + b * rec.eps.abs() + rec.zeta.abs();
    MisspecifiedD {
        proof_form: truth.kappa + a * b0 + b0 + noise,
        statement_form: truth.kappa + 2.0 * a * b + noise,
    }
}

/// Picks a mode in preference order and evaluates `D(y, y')`.
pub fn d_quantity(
    model: &StateSpaceModel,
    y: f64,
    y_next: f64,
    record: Option<&NoiseRecord>,
    truth: Option<&MisspecifiedTruth>,
    pref: DPreference,
) -> Result<(f64, DMode)> {
    let recorded = || -> Option<(f64, DMode)> {
        let rec = record?;
        Some(match truth {
            Some(t) => (d_bound_misspecified(t, rec).value(), DMode::Misspecified),
            None => (d_bound_recorded(model, rec), DMode::RecordedNoise),
        })
    };
    let exact = || d_exact(model, y, y_next).ok().map(|d| (d, DMode::Exact));
    let found = match pref {
        DPreference::ExactFirst => exact().or_else(recorded),
        DPreference::RecordedFirst => recorded().or_else(exact),
    };
    found.ok_or_else(|| Error::DUnavailable("h is not invertible and no noise record was supplied".into()))
}

/// `Z_k = -log gamma^-[2(a+1) b0 + (a+1) b Delta + a b |eps_{k-1}| + |zeta_k| + b |eps_k|]`.
pub fn z_diagnostic(model: &StateSpaceModel, env: &EnvelopeFns, delta: f64, rec: &NoiseRecord) -> f64 {
    let r = (model.a + 1.0) * model.b0 + (model.a + 1.0) * model.b * delta + d_bound_recorded(model, rec);
    -env.minus(r).ln()
}

/// `V_k = log q^-[c + d Delta + D*_k]` with the mis-specified bound for `D*_k`.
pub fn v_diagnostic(
    model: &StateSpaceModel,
    env: &EnvelopeFns,
    delta: f64,
    truth: &MisspecifiedTruth,
    rec: &NoiseRecord,
) -> f64 {
    env.minus(envelope_radius(model, delta, d_bound_misspecified(truth, rec).value())).ln()
}

/// `R_Delta(x) = log[1 - (minus / plus)^2 (2c + d Delta + x)]` with `c = (a+1) b0`, `d = (a+1) b`.
pub fn r_delta(model: &StateSpaceModel, env: &EnvelopeFns, delta: f64, x: f64) -> f64 {
    let c = (model.a + 1.0) * model.b0;
    let d = (model.a + 1.0) * model.b;
    let r = 2.0 * c + d * delta + x;
    let ratio = env.minus(r) / env.plus(r);
    (1.0 - ratio * ratio).ln()
}
