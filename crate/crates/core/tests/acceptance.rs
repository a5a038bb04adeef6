//! Acceptance runner: one PASS/FAIL line per criterion. Set `ACCEPTANCE_STRICT` to exit
//! nonzero when any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{random_fixture, random_law, Fixture};
use ldfilter::bound::{lambda_eta, prop2_gap, prop3_gap, theorem4_finite};
use ldfilter::doeblin::{ContinuousLd, LdReport};
use ldfilter::filter::{
    exact_filter_finite, exhaustive_filter_finite, filter_init, filter_step, tv_distance, FinitePair, GridConfig,
    ParticleConfig, ReprConfig,
};
use ldfilter::filter::finite::path_count;
use ldfilter::lab::{preset, run_scenario, PRESETS};
use ldfilter::model::{simulate_trajectory, Prior};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIXTURES: u64 = 200;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn brute_lambda(log_rhos: &[f64], alpha: f64) -> f64 {
    let n = log_rhos.len();
    (0u32..1 << n)
        .filter(|mask| mask.count_ones() as f64 >= alpha * n as f64)
        .map(|mask| (0..n).filter(|k| mask >> k & 1 == 1).map(|k| log_rhos[k]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn lambda_vs_enumeration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..=12);
        let l: Vec<f64> = (0..n).map(|_| rng.random_range(1e-6f64..0.999).ln()).collect();
        for alpha in [0.3, 0.5, 0.8] {
            worst = worst.max((lambda_eta(&l, alpha).unwrap() - brute_lambda(&l, alpha)).abs());
            cases += 1;
        }
    }
    outcome(worst <= 1e-12, format!("{cases} cases, max |diff| {worst:.1e}"))
}

fn fixtures(n: usize) -> Vec<Fixture> {
    (0..FIXTURES).map(|s| random_fixture(s, n)).collect()
}

fn prior_pair(seed: u64, m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (random_law(&mut rng, m), random_law(&mut rng, m))
}

fn proposition2() -> Outcome {
    let mut bad = 0;
    let mut worst = f64::NEG_INFINITY;
    for (s, fx) in fixtures(6).iter().enumerate() {
        let (nu, nu2) = prior_pair(10_000 + s as u64, fx.fm.states());
        let g = prop2_gap(&fx.ld, &nu, &nu2, &fx.ys).unwrap();
        if !g.lhs_below(1e-10) {
            bad += 1;
        }
        if g.log_lhs.is_finite() && g.log_rhs.is_finite() {
            worst = worst.max(g.log_lhs - g.log_rhs);
        }
    }
    outcome(bad == 0, format!("{FIXTURES} fixtures, {bad} violations, max log(lhs/rhs) {worst:.3}"))
}

fn proposition3() -> Outcome {
    let mut bad = 0;
    let mut worst = f64::INFINITY;
    for (s, fx) in fixtures(8).iter().enumerate() {
        let (nu, _) = prior_pair(20_000 + s as u64, fx.fm.states());
        let g = prop3_gap(&fx.ld, &nu, &fx.ys).unwrap();
        if !g.lhs_above(1e-10) {
            bad += 1;
        }
        worst = worst.min(g.log_lhs - g.log_rhs);
    }
    outcome(bad == 0, format!("{FIXTURES} fixtures, {bad} violations, min log(lhs/rhs) {worst:.3e}"))
}

fn theorem_bound() -> Outcome {
    let mut bad = 0;
    let mut checked = 0;
    let mut non_vacuous = 0;
    for (s, fx) in fixtures(6).iter().enumerate() {
        for p in 0..20u64 {
            let (nu, nu2) = prior_pair(30_000 + 100 * s as u64 + p, fx.fm.states());
            let b = theorem4_finite(&fx.ld, &nu, &nu2, &fx.ys, 0.5).unwrap();
            let mut pair = FinitePair::init(&fx.fm, &nu, &nu2, fx.ys[0]).unwrap();
            for &y in &fx.ys[1..] {
                pair.step(&fx.fm, y).unwrap();
            }
            checked += 1;
            if b.bound < 1.0 {
                non_vacuous += 1;
            }
            if pair.log_tv().exp() > b.bound * (1.0 + 1e-12) {
                bad += 1;
            }
        }
    }
    outcome(bad == 0, format!("{checked} prior pairs, {bad} violations, {non_vacuous} bounds below 1"))
}

fn filter_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut used = 0;
    for (s, fx) in fixtures(8).iter().enumerate() {
        if path_count(fx.fm.states(), fx.ys.len() - 1) > (1u64 << 20) as f64 {
            continue;
        }
        let (nu, _) = prior_pair(40_000 + s as u64, fx.fm.states());
        let (a, za) = exact_filter_finite(&fx.fm, &nu, &fx.ys).unwrap();
        let (b, zb) = exhaustive_filter_finite(&fx.fm, &nu, &fx.ys).unwrap();
        worst = worst.max((za - zb).abs());
        worst = a.iter().zip(&b).fold(worst, |w, (x, y)| w.max((x - y).abs()));
        used += 1;
    }
    outcome(worst <= 1e-10, format!("{used} fixtures, max |diff| {worst:.1e}"))
}

fn rw_forgetting() -> Outcome {
    let mut cfg = preset("rw-gauss").unwrap();
    cfg.bound = None;
    cfg.fit_range = Some((20, 100));
    let mut slopes = Vec::new();
    let mut r2 = Vec::new();
    for &s in &cfg.seeds {
        let fit = run_scenario(&cfg, s).unwrap().fit.expect("fit over [20, 100]");
        slopes.push(fit.slope);
        r2.push(fit.r2);
    }
    r2.sort_by(f64::total_cmp);
    let median = 0.5 * (r2[9] + r2[10]);
    let max_slope = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        slopes.len() == 20 && max_slope <= -0.05 && median >= 0.8,
        format!("20 seeds, max slope {max_slope:.4}, median R2 {median:.4}"),
    )
}

fn misspecified_forgetting() -> Outcome {
    let mut cfg = preset("misspec").unwrap();
    cfg.bound = None;
    let negative = cfg
        .seeds
        .iter()
        .filter(|&&s| run_scenario(&cfg, s).unwrap().fit.is_some_and(|f| f.slope < 0.0))
        .count();
    outcome(negative >= 19, format!("{negative} of {} seeds with negative slope", cfg.seeds.len()))
}

/// Largest per-step distance between a 1e5-particle cloud and the grid posterior.
fn particle_grid_gap(model: &ldfilter::model::StateSpaceModel, prior: &Prior, x0: &Prior, seed: u64) -> (f64, usize) {
    let ys = simulate_trajectory(model, x0, 50, seed).unwrap().scalar_observations();
    let grid = ReprConfig::Grid(GridConfig::default());
    let parts = ReprConfig::Particles(ParticleConfig::new(100_000, seed));
    let mut g = filter_init(model, prior, ys[0], &grid).unwrap();
    let mut p = filter_init(model, prior, ys[0], &parts).unwrap();
    let mut worst = (tv_distance(&p, &g).unwrap(), 0);
    for (k, &y) in ys.iter().enumerate().skip(1) {
        g = filter_step(model, &g, y).unwrap();
        p = filter_step(model, &p, y).unwrap();
        let t = tv_distance(&p, &g).unwrap();
        if t > worst.0 {
            worst = (t, k);
        }
    }
    worst
}

fn grid_particle_agreement() -> Outcome {
    let cfg = preset("rw-gauss").unwrap();
    let ldfilter::lab::Built::Continuous { model, nu, x0, .. } = cfg.build().unwrap() else { unreachable!() };
    let (mut worst, mut worst_x0) = ((0.0f64, 0usize, 0u64), 0.0f64);
    for seed in 1..=5u64 {
        let (t, k) = particle_grid_gap(&model, &nu, &x0, seed);
        if t > worst.0 {
            worst = (t, k, seed);
        }
        worst_x0 = worst_x0.max(particle_grid_gap(&model, &x0, &x0, seed).0);
    }
    outcome(
        worst.0 <= 0.05,
        format!(
            "5 seeds x 51 steps from the preset prior, max TV {:.4} at step {} of seed {}; \
             from the simulation law, max TV {worst_x0:.4}",
            worst.0, worst.1, worst.2
        ),
    )
}

fn sandwich() -> Outcome {
    let cfg = preset("rw-gauss").unwrap();
    let ldfilter::lab::Built::Continuous { model, x0, .. } = cfg.build().unwrap() else { unreachable!() };
    let ld = ContinuousLd::for_eta(&model, 0.1).unwrap();
    let ys = simulate_trajectory(&model, &x0, 10, 1).unwrap().scalar_observations();
    let mut report = LdReport::empty();
    for (k, w) in ys.windows(2).enumerate() {
        report = report.merge(ldfilter::doeblin::verify_ld_property(&ld, w[0], w[1], 100, k as u64).unwrap());
    }
    outcome(
        report.passed() && report.pairs_checked == 1000,
        format!(
            "Delta {:.4}, {} (x, A) pairs, {} violations, worst margins {:.2e} / {:.2e}",
            ld.delta,
            report.pairs_checked,
            report.violations.len(),
            report.worst_lower_margin,
            report.worst_upper_margin
        ),
    )
}

fn reproducibility() -> Outcome {
    let mut differing = Vec::new();
    for name in PRESETS {
        let cfg = preset(name).unwrap();
        let seed = cfg.seeds[0];
        let a = run_scenario(&cfg, seed).unwrap().series.to_csv();
        let b = run_scenario(&cfg, seed).unwrap().series.to_csv();
        if a != b {
            differing.push(name);
        }
    }
    outcome(differing.is_empty(), format!("{} presets, differing: {differing:?}", PRESETS.len()))
}

/// Name, check and runtime limit in seconds.
type Criterion = (&'static str, fn() -> Outcome, Option<f64>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("lambda equals enumeration", lambda_vs_enumeration, Some(5.0)),
        ("numerator inequality", proposition2, Some(60.0)),
        ("denominator inequality", proposition3, Some(60.0)),
        ("bound dominates exact distance", theorem_bound, Some(120.0)),
        ("recursion equals path sums", filter_oracle, None),
        ("random walk forgets", rw_forgetting, Some(60.0)),
        ("mis-specified forgetting", misspecified_forgetting, Some(60.0)),
        ("grid and particle filters agree", grid_particle_agreement, None),
        ("sandwich verified", sandwich, None),
        ("byte-identical reruns", reproducibility, None),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let in_time = limit.is_none_or(|l| secs < l);
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget = limit.map_or(String::new(), |l| format!(" < {l:.0} s"));
        println!(
            "criterion {:>2} {}: {} ({}; {secs:.2} s{budget})",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    // the report above is the result; a strict run turns any FAIL into a nonzero exit
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
