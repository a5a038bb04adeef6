//! State-space and finite hidden Markov models, densities, priors and simulation.

pub mod finite;
pub mod funcs;
pub mod noise;
pub mod prior;
pub mod simulate;
pub mod spec_file;
pub mod state_noise;
pub mod state_space;

pub use finite::{Emission, FiniteModel};
pub use funcs::MapFn;
pub use noise::{MixtureComponent, NoiseDensity};
pub use prior::Prior;
pub use simulate::{
    replay, simulate_misspecified, simulate_trajectory, stream_rng, MisspecifiedTruth, Trajectory,
};
pub use spec_file::{Dims, ModelKind, ModelSpec};
pub use state_noise::{DependentNoise, NoiseSpec};
pub use state_space::StateSpaceModel;
