use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::funcs::MapFn;
use super::noise::NoiseDensity;
use super::state_noise::NoiseSpec;
use crate::error::{Error, Result};

/// Additive nonlinear state-space model
/// `X_k = f(X_{k-1}) + zeta_k`, `Y_k = h(X_k) + eps_k` on `R^dim`.
///
/// `a` is the Lipschitz constant of `f`; `b0`, `b` bound preimage distances of `h`:
/// `|x1 - x2| <= b0 + b |h(x1) - h(x2)|`. The constants are supplied, not inferred;
/// [`StateSpaceModel::audit_lipschitz`] spot-checks `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpaceModel {
    pub f: MapFn,
    pub a: f64,
    pub h: MapFn,
    pub b0: f64,
    pub b: f64,
    pub state_noise: NoiseSpec,
    pub obs_noise: NoiseDensity,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzAudit {
    pub pairs: usize,
    pub worst_excess: f64,
    pub passed: bool,
}

impl StateSpaceModel {
    pub fn new(
        f: MapFn,
        a: f64,
        h: MapFn,
        b0: f64,
        b: f64,
        state_noise: NoiseSpec,
        obs_noise: NoiseDensity,
        dim: usize,
    ) -> Result<Self> {
        let model = StateSpaceModel { f, a, h, b0, b, state_noise, obs_noise, dim };
        model.validate()?;
        Ok(model)
    }

    /// Scalar random walk with Gaussian state and observation noise.
    pub fn gaussian_random_walk(sigma_state: f64, sigma_obs: f64) -> Self {
        StateSpaceModel {
            f: MapFn::Identity,
            a: 1.0,
            h: MapFn::Identity,
            b0: 0.0,
            b: 1.0,
            state_noise: NoiseSpec::iid(NoiseDensity::Gaussian { std: sigma_state }),
            obs_noise: NoiseDensity::Gaussian { std: sigma_obs },
            dim: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.dim == 0 {
            return bad("state dimension must be positive".into());
        }
        for (name, v) in [("a", self.a), ("b0", self.b0), ("b", self.b)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("constant {name} must be finite and >= 0, got {v}"));
            }
        }
        self.state_noise.validate(self.dim).map_err(Error::Validation)?;
        self.obs_noise.validate().map_err(Error::Validation)?;
        if !self.obs_noise.peak1().is_finite() {
            return bad("observation noise density must be bounded".into());
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        self.dim
    }

    pub fn is_scalar(&self) -> bool {
        self.dim == 1
    }

    /// Preimage under `h`, present when `h` is a bijection.
    pub fn h_inverse(&self, y: &[f64]) -> Option<Vec<f64>> {
        self.h.inverse(y)
    }

    /// Density of `Q(x, .)` at `x_next`.
    pub fn transition_density(&self, x: &[f64], x_next: &[f64]) -> f64 {
        let fx = self.f.apply(x);
        let u: Vec<f64> = x_next.iter().zip(&fx).map(|(a, b)| a - b).collect();
        self.state_noise.density(x, &u)
    }

    #[inline]
    pub fn transition_density1(&self, x: f64, x_next: f64) -> f64 {
        self.state_noise.density1(x, x_next - self.f.apply1(x))
    }

    /// `g(x, y) = v(y - h(x))`.
    pub fn likelihood(&self, x: &[f64], y: &[f64]) -> f64 {
        let hx = self.h.apply(x);
        let u: Vec<f64> = y.iter().zip(&hx).map(|(a, b)| a - b).collect();
        self.obs_noise.pdf(&u)
    }

    #[inline]
    pub fn likelihood1(&self, x: f64, y: f64) -> f64 {
        self.obs_noise.pdf1(y - self.h.apply1(x))
    }

    #[inline]
    pub fn ln_likelihood1(&self, x: f64, y: f64) -> f64 {
        self.obs_noise.ln_pdf1(y - self.h.apply1(x))
    }

    pub fn ln_likelihood(&self, x: &[f64], y: &[f64]) -> f64 {
        let hx = self.h.apply(x);
        let u: Vec<f64> = y.iter().zip(&hx).map(|(a, b)| a - b).collect();
        self.obs_noise.ln_pdf(&u)
    }

    /// Checks `|f(x) - f(x')| <= a |x - x'| + 1e-9` on random pairs drawn from `[-scale, scale]^dim`.
    pub fn audit_lipschitz(&self, pairs: usize, scale: f64, seed: u64) -> LipschitzAudit {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..pairs {
            let x: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-scale..scale)).collect();
            let y: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-scale..scale)).collect();
            let lhs = euclid(&self.f.apply(&x), &self.f.apply(&y));
            let rhs = self.a * euclid(&x, &y);
            worst = worst.max(lhs - rhs);
        }
        LipschitzAudit { pairs, worst_excess: worst, passed: worst <= 1e-9 }
    }
}

pub fn euclid(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}
