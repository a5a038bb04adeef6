//! Declarative JSON model specification.
//!
//! ```json
//! {"kind": "nonlinear",
//!  "f": {"type": "affine", "params": {"slope": 1.05, "offset": 0.0}},
//!  "h": {"type": "identity"},
//!  "a": 1.05, "b0": 0.0, "b": 1.0,
//!  "state_noise": {"kind": "iid", "density": {"type": "gaussian", "std": 1.0}},
//!  "obs_noise": {"type": "gaussian", "std": 1.0},
//!  "dims": {"state": 1, "obs": 1}}
//! ```

use serde::{Deserialize, Serialize};

use super::funcs::MapFn;
use super::noise::NoiseDensity;
use super::state_noise::NoiseSpec;
use super::state_space::StateSpaceModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LinearGaussian,
    Nonlinear,
    DependentNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub state: usize,
    pub obs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub f: MapFn,
    pub h: MapFn,
    pub a: f64,
    pub b0: f64,
    pub b: f64,
    pub state_noise: NoiseSpec,
    pub obs_noise: NoiseDensity,
    pub dims: Dims,
}

impl ModelSpec {
    pub fn from_model(kind: ModelKind, m: &StateSpaceModel) -> Self {
        ModelSpec {
            kind,
            f: m.f.clone(),
            h: m.h.clone(),
            a: m.a,
            b0: m.b0,
            b: m.b,
            state_noise: m.state_noise.clone(),
            obs_noise: m.obs_noise.clone(),
            dims: Dims { state: m.dim, obs: m.dim },
        }
    }

    pub fn build(&self) -> Result<StateSpaceModel> {
        if self.dims.obs != self.dims.state {
            return Err(Error::Config(format!(
                "observation maps act componentwise: obs dimension {} must equal state dimension {}",
                self.dims.obs, self.dims.state
            )));
        }
        let linear = |m: &MapFn| matches!(m, MapFn::Identity | MapFn::Affine { .. });
        match self.kind {
            ModelKind::LinearGaussian => {
                let gaussian_state =
                    matches!(self.state_noise, NoiseSpec::Iid { density: NoiseDensity::Gaussian { .. } });
                if !(linear(&self.f) && linear(&self.h) && gaussian_state)
                    || !matches!(self.obs_noise, NoiseDensity::Gaussian { .. })
                {
                    return Err(Error::Config(
                        "linear_gaussian models need affine f, h and Gaussian i.i.d. noises".into(),
                    ));
                }
            }
            ModelKind::DependentNoise => {
                if !matches!(self.state_noise, NoiseSpec::Dependent { .. }) {
                    return Err(Error::Config("dependent_noise models need a dependent state noise".into()));
                }
            }
            ModelKind::Nonlinear => {}
        }
        StateSpaceModel::new(
            self.f.clone(),
            self.a,
            self.h.clone(),
            self.b0,
            self.b,
            self.state_noise.clone(),
            self.obs_noise.clone(),
            self.dims.state,
        )
        .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
