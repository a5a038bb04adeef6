//! Declarative scenarios and the built-in presets.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bound::PhiMethod;
use crate::doeblin::{finite_ld_construct, DPreference, FiniteLd};
use crate::error::{Error, Result};
use crate::filter::{GridConfig, ReprConfig};
use crate::model::{
    DependentNoise, Emission, FiniteModel, MapFn, MisspecifiedTruth, ModelKind, ModelSpec, NoiseSpec, Prior,
    StateSpaceModel,
};

/// Initial law: a named family for continuous models, or probabilities for finite ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialLaw {
    Prior(Prior),
    Probs { probs: Vec<f64> },
}

impl InitialLaw {
    pub fn prior(&self) -> Option<&Prior> {
        match self {
            InitialLaw::Prior(p) => Some(p),
            InitialLaw::Probs { .. } => None,
        }
    }

    pub fn probs(&self) -> Option<&[f64]> {
        match self {
            InitialLaw::Probs { probs } => Some(probs),
            InitialLaw::Prior(_) => None,
        }
    }
}

/// Finite hidden Markov model with its set table (bins cut by `edges`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteFixture {
    pub q: Vec<Vec<f64>>,
    pub emissions: Vec<Emission>,
    #[serde(default)]
    pub edges: Vec<f64>,
    /// One state subset per bin; empty means the whole space for every bin.
    #[serde(default)]
    pub sets: Vec<Vec<usize>>,
}

impl FiniteFixture {
    pub fn build(&self) -> Result<(FiniteModel, FiniteLd)> {
        let fm = FiniteModel::new(self.q.clone(), self.emissions.clone())?;
        let ld = if self.sets.is_empty() {
            FiniteLd::full(&fm)?
        } else {
            finite_ld_construct(&fm, self.edges.clone(), self.sets.clone())?
        };
        Ok((fm, ld))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaChoice {
    Value(f64),
    Sweep(SweepTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepTag {
    Sweep,
}

impl EtaChoice {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "sweep" {
            return Ok(EtaChoice::Sweep(SweepTag::Sweep));
        }
        s.parse::<f64>()
            .map(EtaChoice::Value)
            .map_err(|_| Error::Config(format!("--eta takes a number or `sweep`, got {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    pub alpha: f64,
    pub eta: EtaChoice,
    /// Data are simulated, so recorded noises are available for `D`.
    #[serde(default = "recorded_first")]
    pub d_preference: DPreference,
    #[serde(default)]
    pub phi: PhiMethod,
}

fn recorded_first() -> DPreference {
    DPreference::RecordedFirst
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig { alpha: 0.5, eta: EtaChoice::Value(0.1), d_preference: recorded_first(), phi: PhiMethod::Quadrature }
    }
}

/// Thresholds of the tail events estimated by Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventThresholds {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub delta: f64,
}

impl Default for EventThresholds {
    fn default() -> Self {
        EventThresholds { m0: 1.0, m1: 3.0, m2: 0.0, m3: 2.0, delta: 0.01 }
    }
}

fn default_x0() -> InitialLaw {
    InitialLaw::Prior(Prior::Normal { mean: 0.0, std: 1.0 })
}

fn default_repr() -> ReprConfig {
    ReprConfig::Grid(GridConfig::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub finite: Option<FiniteFixture>,
    /// Data-generating model when it differs from the filtering model.
    #[serde(default)]
    pub truth: Option<ModelSpec>,
    pub prior: InitialLaw,
    pub prior_prime: InitialLaw,
    /// Law of the true initial state.
    #[serde(default = "default_x0")]
    pub x0: InitialLaw,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_repr")]
    pub representation: ReprConfig,
    #[serde(default)]
    pub bound: Option<BoundConfig>,
    #[serde(default)]
    pub events: Option<EventThresholds>,
    #[serde(default)]
    pub fit_range: Option<(usize, usize)>,
    /// Allows `prior == prior_prime`.
    #[serde(default)]
    pub degenerate: bool,
}

/// Continuous or finite building blocks, validated.
pub enum Built {
    Continuous { model: StateSpaceModel, truth: Option<MisspecifiedTruth>, nu: Prior, nu_prime: Prior, x0: Prior },
    Finite { fm: FiniteModel, ld: FiniteLd, nu: Vec<f64>, nu_prime: Vec<f64>, x0: Vec<f64> },
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))
    }

    pub fn fit_range(&self) -> (usize, usize) {
        self.fit_range.unwrap_or_else(|| crate::filter::default_fit_range(self.horizon))
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Validates every field and reports all problems together.
    pub fn build(&self) -> Result<Built> {
        let mut problems = Vec::new();
        if self.horizon < 2 {
            problems.push(format!("horizon: need at least 2 steps, got {}", self.horizon));
        }
        if self.seeds.is_empty() {
            problems.push("seeds: list is empty".to_string());
        }
        if let Some(r) = self.fit_range {
            if r.0 >= r.1 || r.1 > self.horizon {
                problems.push(format!("fit_range: {r:?} must satisfy lo < hi <= horizon"));
            }
        }
        if let Some(b) = &self.bound {
            if !(b.alpha > 0.0 && b.alpha < 1.0) {
                problems.push(format!("bound.alpha: must lie in (0, 1), got {}", b.alpha));
            }
            if let EtaChoice::Value(e) = b.eta {
                if !(e > 0.0 && e < 1.0) {
                    problems.push(format!("bound.eta: must lie in (0, 1), got {e}"));
                }
            }
        }
        if self.prior == self.prior_prime && !self.degenerate {
            problems.push("prior_prime: equal to prior; set `degenerate` to allow this".to_string());
        }
        match &self.representation {
            ReprConfig::Grid(g) => {
                if let Err(e) = g.validate() {
                    problems.push(format!("representation: {e}"));
                }
            }
            ReprConfig::Particles(p) => {
                if p.count == 0 {
                    problems.push("representation.count: must be positive".to_string());
                }
            }
        }
        let built = match (&self.model, &self.finite) {
            (Some(spec), None) => self.build_continuous(spec, &mut problems),
            (None, Some(fixture)) => self.build_finite(fixture, &mut problems),
            _ => {
                problems.push("model/finite: exactly one of them must be given".to_string());
                None
            }
        };
        match built {
            Some(b) if problems.is_empty() => Ok(b),
            _ => Err(Error::Config(problems.join("; "))),
        }
    }

    fn build_continuous(&self, spec: &ModelSpec, problems: &mut Vec<String>) -> Option<Built> {
        let model = spec.build().map_err(|e| problems.push(format!("model: {e}"))).ok();
        let truth = match (&self.truth, &model) {
            (Some(t), Some(m)) => match t.build().and_then(|tm| MisspecifiedTruth::new(tm, m)) {
                Ok(t) => Some(t),
                Err(e) => {
                    problems.push(format!("truth: {e}"));
                    None
                }
            },
            _ => None,
        };
        let mut prior_of = |field: &str, law: &InitialLaw| match law {
            InitialLaw::Prior(p) => match p.validate() {
                Ok(()) => Some(p.clone()),
                Err(e) => {
                    problems.push(format!("{field}: {e}"));
                    None
                }
            },
            InitialLaw::Probs { .. } => {
                problems.push(format!("{field}: continuous models need a named prior family"));
                None
            }
        };
        let nu = prior_of("prior", &self.prior);
        let nu_prime = prior_of("prior_prime", &self.prior_prime);
        let x0 = prior_of("x0", &self.x0);
        if let Some(m) = &model {
            if !m.is_scalar() {
                problems.push("model.dims: scenarios run scalar filters".to_string());
            }
        }
        Some(Built::Continuous { model: model?, truth, nu: nu?, nu_prime: nu_prime?, x0: x0? })
    }

    fn build_finite(&self, fixture: &FiniteFixture, problems: &mut Vec<String>) -> Option<Built> {
        if self.truth.is_some() {
            problems.push("truth: not supported for finite fixtures".to_string());
        }
        let (fm, ld) = fixture.build().map_err(|e| problems.push(format!("finite: {e}"))).ok()?;
        let m = fm.states();
        let mut probs_of = |field: &str, law: &InitialLaw| match law.probs() {
            Some(p) if p.len() == m && p.iter().all(|v| *v >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-9 => {
                Some(p.to_vec())
            }
            _ => {
                problems.push(format!("{field}: need a probability vector over {m} states"));
                None
            }
        };
        let nu = probs_of("prior", &self.prior);
        let nu_prime = probs_of("prior_prime", &self.prior_prime);
        let x0 = match &self.x0 {
            InitialLaw::Prior(_) => Some(vec![1.0 / m as f64; m]),
            law => probs_of("x0", law),
        };
        Some(Built::Finite { fm, ld, nu: nu?, nu_prime: nu_prime?, x0: x0? })
    }
}

pub const PRESETS: [&str; 5] = ["rw-gauss", "ar-unstable", "dep-noise", "misspec", "finite-oracle"];

fn rw_spec() -> ModelSpec {
    ModelSpec::from_model(ModelKind::LinearGaussian, &StateSpaceModel::gaussian_random_walk(1.0, 1.0))
}

fn split_priors() -> (InitialLaw, InitialLaw) {
    (
        InitialLaw::Prior(Prior::Normal { mean: -5.0, std: 1.0 }),
        InitialLaw::Prior(Prior::Normal { mean: 5.0, std: 1.0 }),
    )
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let (prior, prior_prime) = split_priors();
    let base = ScenarioConfig {
        name: name.to_string(),
        model: Some(rw_spec()),
        finite: None,
        truth: None,
        prior,
        prior_prime,
        x0: default_x0(),
        horizon: 100,
        seeds: (1..=20).collect(),
        representation: default_repr(),
        bound: Some(BoundConfig::default()),
        events: Some(EventThresholds::default()),
        fit_range: Some((20, 100)),
        degenerate: false,
    };
    Ok(match name {
        "rw-gauss" => base,
        "ar-unstable" => {
            let mut spec = rw_spec();
            spec.kind = ModelKind::Nonlinear;
            spec.f = MapFn::Affine { slope: 1.05, offset: 0.0 };
            spec.a = 1.05;
            ScenarioConfig { model: Some(spec), ..base }
        }
        "dep-noise" => {
            let mut spec = rw_spec();
            spec.kind = ModelKind::DependentNoise;
            spec.state_noise =
                NoiseSpec::Dependent { noise: DependentNoise::ScaledCauchy { sigma_mid: 1.0, sigma_amp: 0.3 } };
            ScenarioConfig { model: Some(spec), ..base }
        }
        "misspec" => {
            let mut truth = rw_spec();
            truth.kind = ModelKind::Nonlinear;
            truth.f = MapFn::SinePerturbedAffine { slope: 1.0, offset: 0.0, amplitude: 1.0, freq: 1.0 };
            truth.a = 2.0;
            ScenarioConfig { truth: Some(truth), ..base }
        }
        "finite-oracle" => ScenarioConfig {
            model: None,
            finite: Some(FiniteFixture {
                q: vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.5, 0.3], vec![0.15, 0.25, 0.6]],
                emissions: vec![Emission::gaussian(-1.0, 1.0), Emission::gaussian(0.0, 1.0), Emission::gaussian(1.0, 1.0)],
                edges: vec![-0.5, 0.5],
                sets: vec![vec![0, 1], vec![0, 1, 2], vec![1, 2]],
            }),
            prior: InitialLaw::Probs { probs: vec![0.9, 0.05, 0.05] },
            prior_prime: InitialLaw::Probs { probs: vec![0.05, 0.05, 0.9] },
            x0: InitialLaw::Probs { probs: vec![1.0 / 3.0; 3] },
            horizon: 60,
            fit_range: Some((5, 60)),
            ..base
        },
        other => {
            return Err(Error::Config(format!("unknown preset `{other}`; known: {}", PRESETS.join(", "))));
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_build_and_round_trip() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            assert!(cfg.build().is_ok(), "{name}");
            let text = serde_json::to_string_pretty(&cfg).unwrap();
            let back = ScenarioConfig::from_json(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.hash(), cfg.hash());
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn misspec_gap_is_one() {
        let cfg = preset("misspec").unwrap();
        match cfg.build().unwrap() {
            Built::Continuous { truth: Some(t), .. } => assert!((t.f_gap - 1.0).abs() < 1e-3),
            _ => panic!("expected a truth model"),
        }
    }

    #[test]
    fn problems_are_listed_per_field() {
        let mut cfg = preset("rw-gauss").unwrap();
        cfg.prior_prime = cfg.prior.clone();
        cfg.horizon = 1;
        cfg.seeds.clear();
        let msg = match cfg.build() {
            Err(Error::Config(m)) => m,
            _ => panic!("expected a config error"),
        };
        for field in ["horizon", "seeds", "prior_prime"] {
            assert!(msg.contains(field), "{msg}");
        }
        cfg.degenerate = true;
        cfg.horizon = 10;
        cfg.seeds = vec![1];
        cfg.fit_range = None;
        assert!(cfg.build().is_ok());
    }

    #[test]
    fn terse_json_uses_defaults() {
        let text = r#"{
            "name": "custom",
            "model": {"kind": "nonlinear", "f": {"type": "affine", "params": {"slope": 1.05, "offset": 0.0}},
                      "h": {"type": "identity"}, "a": 1.05, "b0": 0.0, "b": 1.0,
                      "state_noise": {"kind": "iid", "density": {"type": "gaussian", "std": 1.0}},
                      "obs_noise": {"type": "gaussian", "std": 1.0}, "dims": {"state": 1, "obs": 1}},
            "prior": {"family": "normal", "mean": -5.0, "std": 1.0},
            "prior_prime": {"family": "uniform", "lo": 0.0, "hi": 10.0},
            "horizon": 50, "seeds": [7],
            "representation": {"type": "particles", "count": 1000},
            "bound": {"alpha": 0.5, "eta": "sweep"}
        }"#;
        let cfg = ScenarioConfig::from_json(text).unwrap();
        assert!(matches!(cfg.bound.unwrap().eta, EtaChoice::Sweep(_)));
        assert_eq!(cfg.bound.unwrap().d_preference, DPreference::RecordedFirst);
        assert!(matches!(cfg.representation, ReprConfig::Particles(p) if p.ess_fraction == 0.5));
        assert!(cfg.build().is_ok());
        let finite = r#"{"name": "f", "finite": {"q": [[0.5, 0.5], [0.5, 0.5]],
            "emissions": [{"type": "table", "values": [1.0, 2.0]}, {"type": "table", "values": [2.0, 1.0]}]},
            "prior": {"probs": [1.0, 0.0]}, "prior_prime": {"probs": [0.0, 1.0]}, "horizon": 5, "seeds": [1]}"#;
        assert!(ScenarioConfig::from_json(finite).unwrap().build().is_ok());
    }

    #[test]
    fn eta_parsing() {
        assert_eq!(EtaChoice::parse("0.05").unwrap(), EtaChoice::Value(0.05));
        assert!(matches!(EtaChoice::parse("sweep").unwrap(), EtaChoice::Sweep(_)));
        assert!(EtaChoice::parse("lots").is_err());
    }
}
