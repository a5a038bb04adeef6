//! `ldlab`: run forgetting experiments from presets or JSON scenario files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ldfilter::lab::{
    monte_carlo_expectation, preset, run_experiment, run_scenario, write_report, BoundConfig, Built, EtaChoice,
    ScenarioConfig, PRESETS,
};
use ldfilter::model::simulate_trajectory;
use ldfilter::Error;

#[derive(Parser)]
#[command(name = "ldlab", version, about = "Filter forgetting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate states and observations.
    Simulate(Common),
    /// Run both filters and record their distance.
    Filter(Common),
    /// Run both filters and evaluate the explicit bound on every prefix.
    Bound(Common),
    /// One run per configured seed.
    Experiment(Common),
    /// Mean distance curve over replicates, with tail-event frequencies.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50)]
        replicates: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// A value in (0, 1) or `sweep`.
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
}

impl Common {
    fn scenario(&self) -> Result<ScenarioConfig, Error> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                ScenarioConfig::from_json(&text)?
            }
            (None, Some(name)) => preset(name)?,
            (None, None) => {
                return Err(Error::Config(format!("give --config or --preset (one of {})", PRESETS.join(", "))))
            }
        };
        if self.eta.is_some() || self.alpha.is_some() {
            let b = cfg.bound.get_or_insert_with(BoundConfig::default);
            if let Some(e) = &self.eta {
                b.eta = EtaChoice::parse(e)?;
            }
            if let Some(a) = self.alpha {
                b.alpha = a;
            }
        }
        Ok(cfg)
    }

    fn seed(&self, cfg: &ScenarioConfig) -> u64 {
        self.seed.or_else(|| cfg.seeds.first().copied()).unwrap_or(0)
    }
}

enum Outcome {
    Done,
    /// Outputs were written but a run stopped early.
    Partial(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(msg)) => {
            eprintln!("ldlab: {msg}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("ldlab: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn dispatch(cmd: Command) -> Result<Outcome, Error> {
    match cmd {
        Command::Simulate(c) => {
            let cfg = c.scenario()?;
            simulate(&cfg, c.seed(&cfg), &c.out)?;
            Ok(Outcome::Done)
        }
        Command::Filter(c) => {
            let mut cfg = c.scenario()?;
            cfg.bound = None;
            single(&cfg, c.seed(&cfg), &c.out, "filter")
        }
        Command::Bound(c) => {
            let mut cfg = c.scenario()?;
            cfg.bound.get_or_insert_with(BoundConfig::default);
            single(&cfg, c.seed(&cfg), &c.out, "bound")
        }
        Command::Experiment(c) => {
            let mut cfg = c.scenario()?;
            if let Some(s) = c.seed {
                cfg.seeds = vec![s];
            }
            cfg.build()?;
            let (reports, summary) = run_experiment(&cfg)?;
            for r in &reports {
                write_report(r, &c.out.join(format!("seed_{}", r.seed)))?;
            }
            std::fs::create_dir_all(&c.out)?;
            std::fs::write(c.out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
            for (r, s) in reports.iter().zip(&summary.slopes) {
                match s {
                    Some(s) => println!("seed {}: slope {s:.5}", r.seed),
                    None => println!("seed {}: no fit ({})", r.seed, r.fit_error.as_deref().unwrap_or("")),
                }
            }
            if summary.failed_seeds.is_empty() {
                Ok(Outcome::Done)
            } else {
                Ok(Outcome::Partial(format!("runs stopped early for seeds {:?}", summary.failed_seeds)))
            }
        }
        Command::Mc { common: c, replicates } => {
            let mut cfg = c.scenario()?;
            if let Some(s) = c.seed {
                cfg.seeds = vec![s];
            }
            let report = monte_carlo_expectation(&cfg, replicates)?;
            std::fs::create_dir_all(c.out.join("plotdata"))?;
            std::fs::write(c.out.join("mc.csv"), report.to_csv())?;
            std::fs::write(c.out.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
            std::fs::write(c.out.join("config.json"), serde_json::to_string_pretty(&cfg)? + "\n")?;
            let mut dat = String::from("# n mean_tv\n");
            for p in &report.curve {
                let _ = writeln!(dat, "{} {:e}", p.n, p.mean_tv);
            }
            std::fs::write(c.out.join("plotdata/mean_tv.dat"), dat)?;
            if let Some(s) = report.mean_slope {
                println!("slope of mean log tv: {s:.5}");
            }
            if let Some((lo, hi)) = report.slope_ci {
                println!("per-replicate slope 95% interval: [{lo:.5}, {hi:.5}]");
            }
            if report.failed.is_empty() {
                Ok(Outcome::Done)
            } else {
                Ok(Outcome::Partial(format!("{} replicates failed", report.failed.len())))
            }
        }
    }
}

fn single(cfg: &ScenarioConfig, seed: u64, out: &Path, sub: &str) -> Result<Outcome, Error> {
    let mut report = run_scenario(cfg, seed)?;
    report.command = format!("ldlab {sub} --config config.json --seed {seed}");
    write_report(&report, out)?;
    if let Some(f) = &report.fit {
        println!("slope {:.5} (r2 {:.3}, n in [{}, {}])", f.slope, f.r2, f.n_min, f.n_max);
    }
    if let Some(e) = &report.bound_error {
        eprintln!("ldlab: bound unavailable: {e}");
    }
    match &report.failure {
        None => Ok(Outcome::Done),
        Some(f) => Ok(Outcome::Partial(format!("filter failed at step {}: {}", f.step, f.message))),
    }
}

fn simulate(cfg: &ScenarioConfig, seed: u64, out: &Path) -> Result<(), Error> {
    let mut csv = String::from("n,x,y\n");
    match cfg.build()? {
        Built::Continuous { model, truth, x0, .. } => {
            let sim = truth.as_ref().map_or(&model, |t| &t.model);
            let t = simulate_trajectory(sim, &x0, cfg.horizon, seed)?;
            for (n, (x, y)) in t.states.iter().zip(&t.observations).enumerate() {
                let _ = writeln!(csv, "{n},{:e},{:e}", x[0], y[0]);
            }
        }
        Built::Finite { fm, x0, .. } => {
            let (xs, ys) = fm.simulate(&x0, cfg.horizon, seed)?;
            for (n, (x, y)) in xs.iter().zip(&ys).enumerate() {
                let _ = writeln!(csv, "{n},{x},{y:e}");
            }
        }
    }
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("trajectory.csv"), csv)?;
    std::fs::write(out.join("config.json"), serde_json::to_string_pretty(cfg)? + "\n")?;
    Ok(())
}
