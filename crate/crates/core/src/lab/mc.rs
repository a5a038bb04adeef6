//! Replicated runs: per-seed experiments and the Monte Carlo expectation curve with
//! empirical tail frequencies.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{EventThresholds, ScenarioConfig};
use super::run::{run_scenario, RunReport};
use crate::bound::BoundBreakdown;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub slopes: Vec<Option<f64>>,
    pub mean_slope: Option<f64>,
    pub median_r2: Option<f64>,
    pub failed_seeds: Vec<u64>,
}

/// One run per configured seed, in parallel.
pub fn run_experiment(cfg: &ScenarioConfig) -> Result<(Vec<RunReport>, ExperimentSummary)> {
    check_unique(&cfg.seeds)?;
    let reports: Vec<RunReport> = cfg.seeds.par_iter().map(|&s| run_scenario(cfg, s)).collect::<Result<_>>()?;
    let slopes: Vec<Option<f64>> = reports.iter().map(|r| r.fit.as_ref().map(|f| f.slope)).collect();
    let ok: Vec<f64> = slopes.iter().flatten().copied().collect();
    let mut r2: Vec<f64> = reports.iter().filter_map(|r| r.fit.as_ref().map(|f| f.r2)).collect();
    r2.sort_by(f64::total_cmp);
    let summary = ExperimentSummary {
        mean_slope: (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64),
        median_r2: median(&r2),
        slopes,
        failed_seeds: reports.iter().filter(|r| r.failure.is_some()).map(|r| r.seed).collect(),
    };
    Ok((reports, summary))
}

fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2])),
    }
}

fn check_unique(seeds: &[u64]) -> Result<()> {
    let mut seen = HashSet::new();
    for &s in seeds {
        if !seen.insert(s) {
            return Err(Error::DuplicateSeed(s));
        }
    }
    Ok(())
}

/// The first `replicates` configured seeds, extended by consecutive integers past the largest.
pub fn replicate_seeds(cfg: &ScenarioConfig, replicates: usize) -> Vec<u64> {
    let mut seeds: Vec<u64> = cfg.seeds.iter().copied().take(replicates).collect();
    let mut next = cfg.seeds.iter().copied().max().map_or(0, |m| m + 1);
    while seeds.len() < replicates {
        seeds.push(next);
        next += 1;
    }
    seeds
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    pub mean_tv: f64,
    pub std_error: f64,
    pub mean_log_tv: f64,
    pub replicates: usize,
}

/// Fraction of replicates whose final-step bound ingredients cross each threshold.
#[derive(Debug, Clone, Serialize)]
pub struct EventFrequencies {
    pub n: usize,
    pub replicates: usize,
    pub thresholds: EventThresholds,
    /// `log Phi_nu <= -M0 n`
    pub r0_nu: f64,
    /// `log Phi_nu' <= -M0 n`
    pub r0_nu_prime: f64,
    /// `sum log eps_minus <= -M1 n`
    pub r1: f64,
    /// `sum log Upsilon >= M2 n`
    pub r2: f64,
    /// `sum log Psi <= -M3 n`
    pub r3: f64,
    /// `log Lambda >= -delta n`
    pub r4: f64,
}

impl EventFrequencies {
    fn from_breakdowns(bs: &[&BoundBreakdown], th: EventThresholds) -> Option<Self> {
        let first = bs.first()?;
        let n = first.n;
        let nf = n as f64;
        let freq = |pred: &dyn Fn(&BoundBreakdown) -> bool| bs.iter().filter(|b| pred(b)).count() as f64 / bs.len() as f64;
        Some(EventFrequencies {
            n,
            replicates: bs.len(),
            thresholds: th,
            r0_nu: freq(&|b| b.log_phi_nu <= -th.m0 * nf),
            r0_nu_prime: freq(&|b| b.log_phi_nu_prime <= -th.m0 * nf),
            r1: freq(&|b| b.sum_log_eps_minus <= -th.m1 * nf),
            r2: freq(&|b| b.sum_log_upsilon >= th.m2 * nf),
            r3: freq(&|b| b.sum_log_psi <= -th.m3 * nf),
            r4: freq(&|b| b.log_lambda >= -th.delta * nf),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FailedReplicate {
    pub seed: u64,
    pub step: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub curve: Vec<CurvePoint>,
    /// Slope of the mean log distance over the fit range.
    pub mean_slope: Option<f64>,
    /// Normal 95% interval for the mean of per-replicate slopes.
    pub slope_ci: Option<(f64, f64)>,
    pub events: Option<EventFrequencies>,
    pub failed: Vec<FailedReplicate>,
    pub config_hash: String,
}

impl McReport {
    /// `n,mean_tv,std_error,mean_log_tv,replicates`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,mean_tv,std_error,mean_log_tv,replicates\n");
        for p in &self.curve {
            out += &format!("{},{:e},{:e},{:e},{}\n", p.n, p.mean_tv, p.std_error, p.mean_log_tv, p.replicates);
        }
        out
    }
}

pub fn monte_carlo_expectation(cfg: &ScenarioConfig, replicates: usize) -> Result<McReport> {
    if replicates < 2 {
        return Err(Error::Config(format!("need at least two replicates, got {replicates}")));
    }
    let seeds = replicate_seeds(cfg, replicates);
    check_unique(&seeds)?;
    cfg.build()?;
    let outcomes: Vec<(u64, Result<RunReport>)> = seeds.par_iter().map(|&s| (s, run_scenario(cfg, s))).collect();

    let mut failed = Vec::new();
    let mut reports = Vec::new();
    for (seed, out) in outcomes {
        match out {
            Ok(r) => {
                if let Some(f) = &r.failure {
                    failed.push(FailedReplicate { seed, step: Some(f.step), message: f.message.clone() });
                }
                reports.push(r);
            }
            Err(e) => failed.push(FailedReplicate { seed, step: None, message: e.to_string() }),
        }
    }

    let horizon = reports.iter().map(|r| r.series.points.len()).max().unwrap_or(0);
    let curve: Vec<CurvePoint> = (0..horizon)
        .map(|n| {
            // replicates that failed before step n do not contribute to it
            let vals: Vec<(f64, f64)> = reports
                .iter()
                .filter_map(|r| r.series.points.get(n))
                .map(|p| (p.tv(), p.log_tv))
                .collect();
            let k = vals.len() as f64;
            let mean = vals.iter().map(|v| v.0).sum::<f64>() / k;
            let var = if vals.len() > 1 { vals.iter().map(|v| (v.0 - mean).powi(2)).sum::<f64>() / (k - 1.0) } else { 0.0 };
            CurvePoint {
                n,
                mean_tv: mean,
                std_error: (var / k).sqrt(),
                mean_log_tv: vals.iter().map(|v| v.1).sum::<f64>() / k,
                replicates: vals.len(),
            }
        })
        .collect();

    let (lo, hi) = cfg.fit_range();
    let fit_pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|p| p.n >= lo && p.n <= hi && p.mean_log_tv.is_finite())
        .map(|p| (p.n as f64, p.mean_log_tv))
        .collect();
    let mean_slope = ols_slope(&fit_pts);

    let slopes: Vec<f64> = reports.iter().filter_map(|r| r.fit.as_ref().map(|f| f.slope)).collect();
    let slope_ci = (slopes.len() >= 2).then(|| {
        let k = slopes.len() as f64;
        let m = slopes.iter().sum::<f64>() / k;
        let se = (slopes.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt();
        (m - 1.96 * se, m + 1.96 * se)
    });

    let th = cfg.events.unwrap_or_default();
    let finals: Vec<&BoundBreakdown> = reports
        .iter()
        .filter(|r| r.failure.is_none())
        .filter_map(|r| r.bound.as_ref().and_then(|b| b.last()))
        .collect();
    let events = EventFrequencies::from_breakdowns(&finals, th);

    Ok(McReport {
        scenario: cfg.name.clone(),
        seeds,
        curve,
        mean_slope,
        slope_ci,
        events,
        failed,
        config_hash: cfg.hash(),
    })
}

fn ols_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}
