//! Scenario configs, single runs, replicated experiments and report files.

pub mod config;
pub mod mc;
pub mod run;

pub use config::{preset, BoundConfig, Built, EtaChoice, EventThresholds, FiniteFixture, InitialLaw, ScenarioConfig, PRESETS};
pub use mc::{monte_carlo_expectation, replicate_seeds, run_experiment, CurvePoint, EventFrequencies, ExperimentSummary, McReport};
pub use run::{particle_pair_tv, run_scenario, write_report, Diagnostics, Failure, RunReport, VERSION};
