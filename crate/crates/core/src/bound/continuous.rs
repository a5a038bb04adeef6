//! Bound ingredients for scalar additive models with the interval construction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integrals::{phi_nu, phi_nu_monte_carlo, psi_c, LogValue};
use super::{assemble, assemble_prefixes, BoundBreakdown, BoundInputs};
use crate::doeblin::{d_quantity, log_rho, upsilon, ContinuousLd, DMode, DPreference, NoiseRecord, UpsilonSet};
use crate::error::{Error, Result};
use crate::model::{MisspecifiedTruth, Prior, StateSpaceModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum PhiMethod {
    #[default]
    Quadrature,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRequest {
    pub alpha: f64,
    pub eta: f64,
    #[serde(default)]
    pub d_preference: DPreference,
    #[serde(default)]
    pub phi: PhiMethod,
}

fn phi_log(model: &StateSpaceModel, nu: &Prior, y0: f64, y1: f64, delta: f64, method: PhiMethod) -> Result<LogValue> {
    match method {
        PhiMethod::Quadrature => phi_nu(model, nu, y0, y1, delta),
        PhiMethod::MonteCarlo { samples, seed } => {
            let est = phi_nu_monte_carlo(model, nu, y0, y1, delta, samples, seed)?;
            Ok(LogValue { log: est.mean.ln(), underflow: est.mean < 1e-300 })
        }
    }
}

/// Per-step ingredients on `ys`, with `Delta` chosen so that the tail condition holds at `eta`.
/// `records[k - 1]` holds the noises behind the transition `k`, when known.
pub fn continuous_inputs(
    model: &StateSpaceModel,
    ys: &[f64],
    nu: &Prior,
    nu_prime: &Prior,
    records: Option<&[NoiseRecord]>,
    truth: Option<&MisspecifiedTruth>,
    req: &BoundRequest,
) -> Result<BoundInputs> {
    if !(req.eta > 0.0 && req.eta < 1.0) {
        return Err(Error::Config(format!("eta must lie in (0, 1), got {}", req.eta)));
    }
    if ys.len() < 2 {
        return Err(Error::Config("need at least two observations".into()));
    }
    if let Some(r) = records {
        if r.len() + 1 < ys.len() {
            return Err(Error::Config(format!("{} noise records for {} transitions", r.len(), ys.len() - 1)));
        }
    }
    let ld = ContinuousLd::for_eta(model, req.eta)?;
    let n = ys.len() - 1;
    let mut log_eps_minus = Vec::with_capacity(n);
    let mut log_psi = Vec::with_capacity(n);
    let mut log_rhos = Vec::with_capacity(n);
    let mut mode: Option<DMode> = None;
    for k in 1..=n {
        let rec = records.map(|r| &r[k - 1]);
        let (d, m) = d_quantity(model, ys[k - 1], ys[k], rec, truth, req.d_preference)?;
        mode = Some(match mode {
            Some(prev) if prev != m => return Err(Error::DUnavailable("D mode changed along the record".into())),
            _ => m,
        });
        let (lo, hi) = ld.eps(d);
        log_eps_minus.push(lo.ln());
        log_rhos.push(log_rho(lo, hi)?);
        log_psi.push(psi_c(model, ys[k], ld.delta)?.ln());
    }
    let phi = phi_log(model, nu, ys[0], ys[1], ld.delta, req.phi)?;
    let phi_prime = phi_log(model, nu_prime, ys[0], ys[1], ld.delta, req.phi)?;
    Ok(BoundInputs {
        log_eps_minus,
        log_psi,
        log_rho: log_rhos,
        log_upsilon: ys.iter().map(|&y| upsilon(model, y, UpsilonSet::All).ln()).collect(),
        log_phi_nu: phi.log,
        log_phi_nu_prime: phi_prime.log,
        eta: req.eta,
        delta: Some(ld.delta),
        d_mode: mode,
        phi_underflow: phi.underflow || phi_prime.underflow,
    })
}

pub fn theorem4_continuous(
    model: &StateSpaceModel,
    ys: &[f64],
    nu: &Prior,
    nu_prime: &Prior,
    records: Option<&[NoiseRecord]>,
    truth: Option<&MisspecifiedTruth>,
    req: &BoundRequest,
) -> Result<BoundBreakdown> {
    let inputs = continuous_inputs(model, ys, nu, nu_prime, records, truth, req)?;
    assemble(&inputs, req.alpha, ys.len() - 1)
}

/// Log-spaced `eta` grid `10^-1 ... 10^-decades`, `per_decade` points per decade.
pub fn eta_grid(decades: usize, per_decade: usize) -> Vec<f64> {
    (0..=decades.saturating_sub(1) * per_decade)
        .map(|i| 10f64.powf(-1.0 - i as f64 / per_decade as f64))
        .collect()
}

/// For each prefix `n = 2..`, the tightest breakdown over the `eta` grid.
pub fn eta_sweep(
    model: &StateSpaceModel,
    ys: &[f64],
    nu: &Prior,
    nu_prime: &Prior,
    records: Option<&[NoiseRecord]>,
    truth: Option<&MisspecifiedTruth>,
    base: &BoundRequest,
    etas: &[f64],
) -> Result<Vec<BoundBreakdown>> {
    let per_eta: Vec<Vec<BoundBreakdown>> = etas
        .par_iter()
        .map(|&eta| {
            let req = BoundRequest { eta, ..*base };
            let inputs = continuous_inputs(model, ys, nu, nu_prime, records, truth, &req)?;
            assemble_prefixes(&inputs, req.alpha)
        })
        .collect::<Result<_>>()?;
    let prefixes = per_eta.first().map_or(0, |v| v.len());
    Ok((0..prefixes)
        .map(|p| {
            per_eta
                .iter()
                .map(|v| &v[p])
                .min_by(|a, b| a.log_bound.total_cmp(&b.log_bound))
                .expect("non-empty eta grid")
                .clone()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doeblin::NoiseRecord;
    use crate::model::simulate_trajectory;

    fn setup() -> (StateSpaceModel, Vec<f64>, Vec<NoiseRecord>) {
        let m = StateSpaceModel::gaussian_random_walk(1.0, 1.0);
        let t = simulate_trajectory(&m, &Prior::Normal { mean: 0.0, std: 1.0 }, 40, 3).unwrap();
        (m, t.scalar_observations(), NoiseRecord::all(&t))
    }

    fn req(eta: f64, pref: DPreference) -> BoundRequest {
        BoundRequest { alpha: 0.5, eta, d_preference: pref, phi: PhiMethod::Quadrature }
    }

    #[test]
    fn lambda_shrinks_over_prefixes() {
        let (m, ys, recs) = setup();
        let nu = Prior::Normal { mean: -5.0, std: 1.0 };
        let nu2 = Prior::Normal { mean: 5.0, std: 1.0 };
        let inputs = continuous_inputs(&m, &ys, &nu, &nu2, Some(&recs), None, &req(0.1, DPreference::ExactFirst)).unwrap();
        assert_eq!(inputs.d_mode, Some(DMode::Exact));
        let bs = assemble_prefixes(&inputs, 0.5).unwrap();
        assert!(bs.last().unwrap().log_lambda < bs[0].log_lambda);
        for b in &bs {
            assert!(b.log_bound >= b.log_lambda);
            assert!(b.bound <= 1.0);
        }
    }

    #[test]
    fn recorded_mode_is_looser() {
        let (m, ys, recs) = setup();
        let nu = Prior::Normal { mean: 0.0, std: 1.0 };
        let exact = continuous_inputs(&m, &ys, &nu, &nu, Some(&recs), None, &req(0.1, DPreference::ExactFirst)).unwrap();
        let rec = continuous_inputs(&m, &ys, &nu, &nu, Some(&recs), None, &req(0.1, DPreference::RecordedFirst)).unwrap();
        assert_eq!(rec.d_mode, Some(DMode::RecordedNoise));
        for (a, b) in exact.log_rho.iter().zip(&rec.log_rho) {
            assert!(b >= a);
        }
    }

    #[test]
    fn sweep_is_no_worse_than_each_eta() {
        let (m, ys, recs) = setup();
        let ys = &ys[..12];
        let nu = Prior::Normal { mean: -1.0, std: 1.0 };
        let nu2 = Prior::Normal { mean: 1.0, std: 1.0 };
        let base = req(0.1, DPreference::ExactFirst);
        let etas = eta_grid(3, 2);
        assert_eq!(etas.len(), 5);
        let best = eta_sweep(&m, ys, &nu, &nu2, Some(&recs), None, &base, &etas).unwrap();
        for &eta in &etas {
            let inputs = continuous_inputs(&m, ys, &nu, &nu2, Some(&recs), None, &BoundRequest { eta, ..base }).unwrap();
            let each = assemble_prefixes(&inputs, 0.5).unwrap();
            for (b, e) in best.iter().zip(&each) {
                assert!(b.log_bound <= e.log_bound);
            }
        }
    }

    #[test]
    fn eta_must_be_below_one() {
        let (m, ys, _) = setup();
        let nu = Prior::Normal { mean: 0.0, std: 1.0 };
        assert!(continuous_inputs(&m, &ys, &nu, &nu, None, None, &req(1.0, DPreference::ExactFirst)).is_err());
    }
}
