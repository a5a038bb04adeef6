//! One scenario run: simulate, filter from both priors on the shared stream, record the
//! distance and optionally the bound, fit the decay rate, and write the outputs.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Built, EtaChoice, ScenarioConfig};
use crate::bound::{assemble_prefixes, continuous_inputs, eta_grid, finite_inputs, BoundBreakdown, BoundInputs, BoundRequest};
use crate::doeblin::{choose_delta_for_eta, v_diagnostic, z_diagnostic, DMode, EnvelopeFns, NoiseRecord};
use crate::error::{Error, Result};
use crate::filter::{decay_rate, DecayFit, FinitePair, Grid, GridPair, ParticleCloud, ReprConfig, SeriesMeta, TvSeries};
use crate::model::{simulate_trajectory, MisspecifiedTruth, Prior, StateSpaceModel, Trajectory};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `eta` used for the diagnostics when the bound sweeps over a grid.
const DIAGNOSTIC_ETA: f64 = 0.1;
const SWEEP_DECADES: usize = 4;
const SWEEP_PER_DECADE: usize = 2;
/// Cells of the shared window onto which two particle clouds are projected.
const PAIR_PROJECTION_CELLS: usize = 512;

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub step: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    /// Smallest effective sample size seen by either particle filter.
    pub ess_min: Option<f64>,
    /// Grid window `(lo, hi)` after each step.
    pub grid_window: Vec<(f64, f64)>,
    /// Radius giving the tail condition at the bound's `eta`.
    pub delta: Option<f64>,
    pub d_mode: Option<DMode>,
    /// Empirical mean of `Z_k` (well-specified data).
    pub mean_z: Option<f64>,
    /// Empirical mean of `V_k` (mis-specified data).
    pub mean_v: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub series: TvSeries,
    pub bound: Option<Vec<BoundBreakdown>>,
    pub bound_inputs: Option<BoundInputs>,
    pub bound_error: Option<String>,
    pub fit: Option<DecayFit>,
    pub fit_error: Option<String>,
    pub failure: Option<Failure>,
    pub diagnostics: Diagnostics,
    pub config: ScenarioConfig,
    pub config_hash: String,
    pub command: String,
    pub version: String,
}

impl RunReport {
    pub fn log_tvs(&self) -> Vec<f64> {
        self.series.points.iter().map(|p| p.log_tv).collect()
    }
}

/// Observation record shared by both filters.
struct Data {
    ys: Vec<f64>,
    traj: Option<Trajectory>,
}

fn prior_label(law: &super::config::InitialLaw) -> String {
    serde_json::to_string(law).expect("law serializes")
}

pub fn run_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<RunReport> {
    let built = cfg.build()?;
    let repr = match (&built, &cfg.representation) {
        (Built::Finite { .. }, _) => "finite-exact".to_string(),
        (_, ReprConfig::Grid(g)) => format!("grid({} nodes)", g.nodes),
        (_, ReprConfig::Particles(p)) => format!("particles({})", p.count),
    };
    let meta = SeriesMeta {
        seed,
        model_id: cfg.name.clone(),
        priors: vec![prior_label(&cfg.prior), prior_label(&cfg.prior_prime)],
        representation: repr,
        tv_convention: crate::filter::TV_CONVENTION.to_string(),
    };
    let mut report = RunReport {
        scenario: cfg.name.clone(),
        seed,
        series: TvSeries::new(meta),
        bound: None,
        bound_inputs: None,
        bound_error: None,
        fit: None,
        fit_error: None,
        failure: None,
        diagnostics: Diagnostics::default(),
        config: cfg.clone(),
        config_hash: cfg.hash(),
        command: format!("ldlab experiment --config config.json --seed {seed}"),
        version: VERSION.to_string(),
    };
    let mut log_tv = Vec::new();
    match &built {
        Built::Continuous { model, truth, nu, nu_prime, x0 } => {
            let sim_model = truth.as_ref().map_or(model, |t| &t.model);
            let traj = simulate_trajectory(sim_model, x0, cfg.horizon, seed)?;
            let data = Data { ys: traj.scalar_observations(), traj: Some(traj) };
            if let Err((step, e)) = run_continuous(cfg, model, nu, nu_prime, &data, &mut log_tv, &mut report.diagnostics, seed) {
                report.failure = Some(Failure { step, message: e.to_string() });
            }
            if let Some(b) = &cfg.bound {
                let records = data.traj.as_ref().map(NoiseRecord::all);
                match continuous_bound(cfg, b, model, truth.as_ref(), nu, nu_prime, &data.ys, records.as_deref()) {
                    Ok((inputs, series)) => {
                        report.bound = Some(series);
                        report.bound_inputs = Some(inputs);
                    }
                    Err(e) => report.bound_error = Some(e.to_string()),
                }
                let eta = match b.eta {
                    EtaChoice::Value(e) => e,
                    EtaChoice::Sweep(_) => DIAGNOSTIC_ETA,
                };
                if let (Ok(delta), Some(records)) = (choose_delta_for_eta(model, eta), records) {
                    fill_noise_diagnostics(&mut report.diagnostics, model, truth.as_ref(), delta, &records);
                }
            }
        }
        Built::Finite { fm, ld, nu, nu_prime, x0 } => {
            let (_, ys) = fm.simulate(x0, cfg.horizon, seed)?;
            let mut pair = FinitePair::init(fm, nu, nu_prime, ys[0])?;
            log_tv.push(pair.log_tv());
            for (k, &y) in ys.iter().enumerate().skip(1) {
                if let Err(e) = pair.step(fm, y) {
                    report.failure = Some(Failure { step: k, message: e.to_string() });
                    break;
                }
                log_tv.push(pair.log_tv());
            }
            if let Some(b) = &cfg.bound {
                match finite_inputs(ld, nu, nu_prime, &ys).and_then(|i| Ok((assemble_prefixes(&i, b.alpha)?, i))) {
                    Ok((series, inputs)) => {
                        report.bound = Some(series);
                        report.bound_inputs = Some(inputs);
                    }
                    Err(e) => report.bound_error = Some(e.to_string()),
                }
            }
        }
    }
    let bound_at = |n: usize| -> Option<f64> {
        report.bound.as_ref().and_then(|bs| bs.iter().find(|b| b.n == n)).map(|b| b.log_bound.min(0.0))
    };
    let mut series = report.series.clone();
    for (n, &l) in log_tv.iter().enumerate() {
        series.push(n, l, bound_at(n));
    }
    report.series = series;
    match decay_rate(&report.series, cfg.fit_range()) {
        Ok(f) => report.fit = Some(f),
        Err(e) => report.fit_error = Some(e.to_string()),
    }
    report.diagnostics.delta = report.bound_inputs.as_ref().and_then(|i| i.delta).or(report.diagnostics.delta);
    report.diagnostics.d_mode = report.bound_inputs.as_ref().and_then(|i| i.d_mode);
    Ok(report)
}

/// Runs the filter pair; on failure returns the failing step.
fn run_continuous(
    cfg: &ScenarioConfig,
    model: &StateSpaceModel,
    nu: &Prior,
    nu_prime: &Prior,
    data: &Data,
    log_tv: &mut Vec<f64>,
    diag: &mut Diagnostics,
    seed: u64,
) -> std::result::Result<(), (usize, Error)> {
    let ys = &data.ys;
    match &cfg.representation {
        ReprConfig::Grid(g) => {
            let mut pair = GridPair::init(model, nu, nu_prime, ys[0], g).map_err(|e| (0, e))?;
            log_tv.push(pair.log_tv());
            diag.grid_window.push((pair.grid.lo, pair.grid.hi()));
            for (k, &y) in ys.iter().enumerate().skip(1) {
                pair.step(model, y, g).map_err(|e| (k, e))?;
                log_tv.push(pair.log_tv());
                diag.grid_window.push((pair.grid.lo, pair.grid.hi()));
            }
        }
        ReprConfig::Particles(p) => {
            // both clouds draw from one stream, so equal priors give equal clouds
            let pc = crate::filter::ParticleConfig { seed, ..*p };
            let mut a = ParticleCloud::init(model, nu, ys[0], &pc).map_err(|e| (0, e))?;
            let mut b = ParticleCloud::init(model, nu_prime, ys[0], &pc).map_err(|e| (0, e))?;
            let mut ess = a.ess.min(b.ess);
            log_tv.push(particle_pair_tv(&a, &b).ln());
            for (k, &y) in ys.iter().enumerate().skip(1) {
                a.step(model, y, k).map_err(|e| (k, e))?;
                b.step(model, y, k).map_err(|e| (k, e))?;
                ess = ess.min(a.ess).min(b.ess);
                log_tv.push(particle_pair_tv(&a, &b).ln());
            }
            diag.ess_min = Some(ess);
        }
    }
    Ok(())
}

/// Distance between two clouds after projection onto a common window.
pub fn particle_pair_tv(a: &ParticleCloud, b: &ParticleCloud) -> f64 {
    let lo = a.x.iter().chain(&b.x).copied().fold(f64::INFINITY, f64::min);
    let hi = a.x.iter().chain(&b.x).copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
    let grid = Grid::spanning(lo - pad, hi + pad, PAIR_PROJECTION_CELLS);
    let (ca, oa) = a.project(&grid);
    let (cb, ob) = b.project(&grid);
    let l1: f64 = ca.iter().zip(&cb).map(|(x, y)| (x - y).abs()).sum::<f64>() + (oa - ob).abs();
    (0.5 * l1).clamp(0.0, 1.0)
}

fn continuous_bound(
    cfg: &ScenarioConfig,
    b: &super::config::BoundConfig,
    model: &StateSpaceModel,
    truth: Option<&MisspecifiedTruth>,
    nu: &Prior,
    nu_prime: &Prior,
    ys: &[f64],
    records: Option<&[NoiseRecord]>,
) -> Result<(BoundInputs, Vec<BoundBreakdown>)> {
    let _ = cfg;
    let request = |eta: f64| BoundRequest { alpha: b.alpha, eta, d_preference: b.d_preference, phi: b.phi };
    match b.eta {
        EtaChoice::Value(eta) => {
            let inputs = continuous_inputs(model, ys, nu, nu_prime, records, truth, &request(eta))?;
            let series = assemble_prefixes(&inputs, b.alpha)?;
            Ok((inputs, series))
        }
        EtaChoice::Sweep(_) => {
            let runs: Vec<(BoundInputs, Vec<BoundBreakdown>)> = eta_grid(SWEEP_DECADES, SWEEP_PER_DECADE)
                .par_iter()
                .map(|&eta| {
                    let inputs = continuous_inputs(model, ys, nu, nu_prime, records, truth, &request(eta))?;
                    let series = assemble_prefixes(&inputs, b.alpha)?;
                    Ok((inputs, series))
                })
                .collect::<Result<_>>()?;
            let prefixes = runs[0].1.len();
            let best: Vec<BoundBreakdown> = (0..prefixes)
                .map(|p| {
                    runs.iter()
                        .map(|r| &r.1[p])
                        .min_by(|x, y| x.log_bound.total_cmp(&y.log_bound))
                        .expect("non-empty grid")
                        .clone()
                })
                .collect();
            let final_eta = best.last().map_or(runs[0].0.eta, |b| b.eta);
            let inputs = runs.into_iter().find(|r| r.0.eta == final_eta).expect("eta from the grid").0;
            Ok((inputs, best))
        }
    }
}

fn fill_noise_diagnostics(
    diag: &mut Diagnostics,
    model: &StateSpaceModel,
    truth: Option<&MisspecifiedTruth>,
    delta: f64,
    records: &[NoiseRecord],
) {
    let env = EnvelopeFns::for_model(model);
    let n = records.len() as f64;
    match truth {
        None => {
            diag.mean_z = Some(records.iter().map(|r| z_diagnostic(model, &env, delta, r)).sum::<f64>() / n);
        }
        Some(t) => {
            diag.mean_v = Some(records.iter().map(|r| v_diagnostic(model, &env, delta, t, r)).sum::<f64>() / n);
        }
    }
}

/// Writes `tv.csv`, `report.json`, `config.json`, the per-step bound table and `plotdata/`.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir.join("plotdata"))?;
    std::fs::write(dir.join("tv.csv"), report.series.to_csv())?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)? + "\n")?;
    std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&report.config)? + "\n")?;
    let mut tv = String::from("# n log_tv\n");
    for p in &report.series.points {
        let _ = writeln!(tv, "{} {:e}", p.n, p.log_tv);
    }
    std::fs::write(dir.join("plotdata/tv.dat"), tv)?;
    if let Some(bs) = &report.bound {
        let mut out = String::from("# n log_bound log_lambda log_remainder\n");
        for b in bs {
            let _ = writeln!(out, "{} {:e} {:e} {:e}", b.n, b.log_bound, b.log_lambda, b.log_remainder);
        }
        std::fs::write(dir.join("plotdata/bound.dat"), out)?;
    }
    if let Some(inputs) = &report.bound_inputs {
        std::fs::write(dir.join("bound_steps.csv"), inputs.step_csv())?;
    }
    if !report.diagnostics.grid_window.is_empty() {
        let mut out = String::from("# n lo hi\n");
        for (n, (lo, hi)) in report.diagnostics.grid_window.iter().enumerate() {
            let _ = writeln!(out, "{n} {lo:e} {hi:e}");
        }
        std::fs::write(dir.join("plotdata/window.dat"), out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::exact_filter_finite;
    use crate::lab::config::{preset, InitialLaw};

    fn short(name: &str, n: usize) -> ScenarioConfig {
        let mut cfg = preset(name).unwrap();
        cfg.horizon = n;
        cfg.fit_range = None;
        cfg
    }

    #[test]
    fn rw_gauss_forgets() {
        let r = run_scenario(&preset("rw-gauss").unwrap(), 3).unwrap();
        assert!(r.failure.is_none());
        let fit = r.fit.unwrap();
        assert!(fit.slope < -0.05, "{fit:?}");
        let tv = r.series.tvs();
        assert!(tv[100] < tv[0]);
        assert_eq!(r.diagnostics.d_mode, Some(DMode::RecordedNoise));
        assert!(r.diagnostics.mean_z.unwrap().is_finite());
        // the bound holds wherever it is not vacuous
        for p in &r.series.points {
            if let Some(b) = p.bound_log {
                assert!(p.log_tv <= b + 1e-9, "n = {}", p.n);
            }
        }
    }

    #[test]
    fn equal_priors_give_zero_distance() {
        for repr in ["grid", "particles"] {
            let mut cfg = short("rw-gauss", 10);
            cfg.prior_prime = cfg.prior.clone();
            cfg.degenerate = true;
            cfg.bound = None;
            if repr == "particles" {
                cfg.representation = ReprConfig::Particles(crate::filter::ParticleConfig::new(2000, 0));
            }
            let r = run_scenario(&cfg, 1).unwrap();
            assert!(r.series.tvs().iter().all(|&t| t == 0.0), "{repr}");
        }
    }

    #[test]
    fn finite_series_matches_oracle() {
        let cfg = short("finite-oracle", 8);
        let r = run_scenario(&cfg, 5).unwrap();
        let fixture = cfg.finite.clone().unwrap();
        let (fm, _) = fixture.build().unwrap();
        let (_, ys) = fm.simulate(cfg.x0.probs().unwrap(), 8, 5).unwrap();
        let (InitialLaw::Probs { probs: a }, InitialLaw::Probs { probs: b }) = (&cfg.prior, &cfg.prior_prime) else {
            unreachable!()
        };
        for n in 0..=8 {
            let (p, _) = exact_filter_finite(&fm, a, &ys[..=n]).unwrap();
            let (q, _) = exact_filter_finite(&fm, b, &ys[..=n]).unwrap();
            let tv = 0.5 * p.iter().zip(&q).map(|(x, y)| (x - y).abs()).sum::<f64>();
            assert!((r.series.points[n].tv() - tv).abs() < 1e-12);
            if let Some(bl) = r.series.points[n].bound_log {
                assert!(tv.ln() <= bl + 1e-12);
            }
        }
    }

    #[test]
    fn outputs_are_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = short("dep-noise", 15);
        for sub in ["a", "b"] {
            write_report(&run_scenario(&cfg, 9).unwrap(), &dir.path().join(sub)).unwrap();
        }
        for f in ["tv.csv", "report.json", "bound_steps.csv", "plotdata/tv.dat"] {
            let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
            let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
            assert_eq!(a, b, "{f}");
        }
        let report: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("a/report.json")).unwrap()).unwrap();
        let embedded: ScenarioConfig = serde_json::from_value(report["config"].clone()).unwrap();
        assert_eq!(embedded.hash(), report["config_hash"].as_str().unwrap());
    }

    #[test]
    fn sweep_picks_tightest() {
        let mut cfg = short("rw-gauss", 12);
        cfg.bound.as_mut().unwrap().eta = EtaChoice::parse("sweep").unwrap();
        let swept = run_scenario(&cfg, 2).unwrap();
        cfg.bound.as_mut().unwrap().eta = EtaChoice::Value(0.1);
        let single = run_scenario(&cfg, 2).unwrap();
        for (a, b) in swept.bound.unwrap().iter().zip(single.bound.unwrap().iter()) {
            assert!(a.log_bound <= b.log_bound);
        }
    }

    #[test]
    fn particle_pair_distance_is_symmetric() {
        let m = StateSpaceModel::gaussian_random_walk(1.0, 1.0);
        let pc = crate::filter::ParticleConfig::new(500, 1);
        let a = ParticleCloud::init(&m, &Prior::Normal { mean: 0.0, std: 1.0 }, 0.0, &pc).unwrap();
        let b = ParticleCloud::init(&m, &Prior::Normal { mean: 0.5, std: 1.0 }, 0.0, &pc).unwrap();
        assert_eq!(particle_pair_tv(&a, &b), particle_pair_tv(&b, &a));
        assert_eq!(particle_pair_tv(&a, &a), 0.0);
    }
}
