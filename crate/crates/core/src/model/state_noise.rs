//! State noise: i.i.d. increments or increments whose law depends on the previous state,
//! sandwiched as `mu_minus * psi(u) <= q(x, u) <= mu_plus * psi(u)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::noise::NoiseDensity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Iid { density: NoiseDensity },
    Dependent { noise: DependentNoise },
}

/// Conditional increment densities `q(x, u)` on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DependentNoise {
    /// `q(x, u) = psi(u) (1 + theta sin(x) sin(u))` with `psi` symmetric, so the
    /// normalizer is identically one.
    SineModulated { psi: NoiseDensity, theta: f64 },
    /// `u = sigma(x) * xi` with `xi` standard Cauchy and
    /// `sigma(x) = sigma_mid + sigma_amp * sin(x)` bounded away from zero.
    ScaledCauchy { sigma_mid: f64, sigma_amp: f64 },
}

impl DependentNoise {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            DependentNoise::SineModulated { psi, theta } => {
                psi.validate()?;
                if !psi.is_symmetric_unimodal() {
                    return Err("sine-modulated noise needs a symmetric envelope density".into());
                }
                if !(theta.abs() < 1.0) {
                    return Err(format!("|theta| must be < 1, got {theta}"));
                }
                Ok(())
            }
            DependentNoise::ScaledCauchy { sigma_mid, sigma_amp } => {
                if !(sigma_mid.is_finite() && sigma_amp.is_finite() && sigma_mid - sigma_amp.abs() > 0.0) {
                    return Err("sigma(x) must stay positive: need sigma_mid > |sigma_amp|".into());
                }
                Ok(())
            }
        }
    }

    fn sigma_bounds(sigma_mid: f64, sigma_amp: f64) -> (f64, f64) {
        (sigma_mid - sigma_amp.abs(), sigma_mid + sigma_amp.abs())
    }

    pub fn density(&self, x: f64, u: f64) -> f64 {
        match self {
            DependentNoise::SineModulated { psi, theta } => psi.pdf1(u) * (1.0 + theta * x.sin() * u.sin()),
            DependentNoise::ScaledCauchy { sigma_mid, sigma_amp } => {
                let s = sigma_mid + sigma_amp * x.sin();
                NoiseDensity::Cauchy { scale: s }.pdf1(u)
            }
        }
    }

    /// The envelope density `psi`.
    pub fn envelope(&self) -> NoiseDensity {
        match self {
            DependentNoise::SineModulated { psi, .. } => psi.clone(),
            DependentNoise::ScaledCauchy { sigma_mid, sigma_amp } => {
                NoiseDensity::Cauchy { scale: Self::sigma_bounds(*sigma_mid, *sigma_amp).1 }
            }
        }
    }

    pub fn mu_minus(&self) -> f64 {
        match self {
            DependentNoise::SineModulated { theta, .. } => 1.0 - theta.abs(),
            DependentNoise::ScaledCauchy { sigma_mid, sigma_amp } => {
                let (lo, hi) = Self::sigma_bounds(*sigma_mid, *sigma_amp);
                lo / hi
            }
        }
    }

    pub fn mu_plus(&self) -> f64 {
        match self {
            DependentNoise::SineModulated { theta, .. } => 1.0 + theta.abs(),
            DependentNoise::ScaledCauchy { sigma_mid, sigma_amp } => {
                let (lo, hi) = Self::sigma_bounds(*sigma_mid, *sigma_amp);
                hi / lo
            }
        }
    }

    /// Rejection sampling against `psi` with acceptance bound `mu_plus`.
    pub fn sample<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        let psi = self.envelope();
        let bound = self.mu_plus();
        loop {
            let u = psi.sample1(rng);
            let accept: f64 = rng.random();
            if accept * bound * psi.pdf1(u) <= self.density(x, u) {
                return u;
            }
        }
    }
}

impl NoiseSpec {
    pub fn iid(density: NoiseDensity) -> Self {
        NoiseSpec::Iid { density }
    }

    pub fn validate(&self, dim: usize) -> Result<(), String> {
        match self {
            NoiseSpec::Iid { density } => density.validate(),
            NoiseSpec::Dependent { noise } => {
                if dim != 1 {
                    return Err("dependent state noise is only supported for scalar states".into());
                }
                noise.validate()
            }
        }
    }

    /// Increment density `q(x, u)` (`gamma(u)` for i.i.d. noise).
    pub fn density(&self, x: &[f64], u: &[f64]) -> f64 {
        match self {
            NoiseSpec::Iid { density } => density.pdf(u),
            NoiseSpec::Dependent { noise } => noise.density(x[0], u[0]),
        }
    }

    #[inline]
    pub fn density1(&self, x: f64, u: f64) -> f64 {
        match self {
            NoiseSpec::Iid { density } => density.pdf1(u),
            NoiseSpec::Dependent { noise } => noise.density(x, u),
        }
    }

    /// `(psi, mu_minus, mu_plus)`; i.i.d. noise is its own envelope with unit constants.
    pub fn envelope(&self) -> (NoiseDensity, f64, f64) {
        match self {
            NoiseSpec::Iid { density } => (density.clone(), 1.0, 1.0),
            NoiseSpec::Dependent { noise } => (noise.envelope(), noise.mu_minus(), noise.mu_plus()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Vec<f64> {
        match self {
            NoiseSpec::Iid { density } => density.sample(rng, x.len()),
            NoiseSpec::Dependent { noise } => vec![noise.sample(x[0], rng)],
        }
    }

    /// Rough spread of the increments, used to size grids.
    pub fn spread(&self) -> f64 {
        let (psi, _, mu_plus) = self.envelope();
        psi.spread() * mu_plus.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid_ratio_range(noise: &DependentNoise) -> (f64, f64) {
        let psi = noise.envelope();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..100 {
            let x = -10.0 + 20.0 * i as f64 / 99.0;
            for j in 0..100 {
                let u = -10.0 + 20.0 * j as f64 / 99.0;
                let r = noise.density(x, u) / psi.pdf1(u);
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        (lo, hi)
    }

    #[test]
    fn sine_modulated_envelope_constants() {
        let noise = DependentNoise::SineModulated { psi: NoiseDensity::standard_normal(), theta: 0.1 };
        // normalizer Z(x) by quadrature; symmetry of psi makes it one
        let mut z_min = f64::INFINITY;
        let mut z_max = 0.0f64;
        for i in 0..50 {
            let x = -5.0 + 10.0 * i as f64 / 49.0;
            let z = integrate(|u| noise.density(x, u), -40.0, 40.0, 1e-13, 1e-13).value;
            z_min = z_min.min(z);
            z_max = z_max.max(z);
        }
        assert!((z_min - 1.0).abs() < 1e-10 && (z_max - 1.0).abs() < 1e-10);
        assert!((noise.mu_minus() - 0.9 / z_max).abs() < 1e-9);
        assert!((noise.mu_plus() - 1.1 / z_min).abs() < 1e-9);
        let (lo, hi) = grid_ratio_range(&noise);
        assert!(lo >= noise.mu_minus() - 1e-12 && hi <= noise.mu_plus() + 1e-12);
    }

    #[test]
    fn scaled_cauchy_envelope_holds_on_grid() {
        let noise = DependentNoise::ScaledCauchy { sigma_mid: 1.0, sigma_amp: 0.4 };
        let (lo, hi) = grid_ratio_range(&noise);
        assert!(lo >= noise.mu_minus() - 1e-12, "{lo}");
        assert!(hi <= noise.mu_plus() + 1e-12, "{hi}");
    }

    #[test]
    fn rejection_sampler_matches_density() {
        let noise = DependentNoise::SineModulated { psi: NoiseDensity::standard_normal(), theta: 0.5 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = 1.2;
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| noise.sample(x, &mut rng)).collect();
        // E[sin U] = theta sin(x) E_psi[sin^2 U]
        let mean_sin = draws.iter().map(|u| u.sin()).sum::<f64>() / n as f64;
        // E[sin^2 U] = (1 - e^{-2}) / 2 for a standard normal U
        let e_sin2 = 0.5 * (1.0 - (-2.0f64).exp());
        let expected = 0.5 * x.sin() * e_sin2;
        assert!((mean_sin - expected).abs() < 4.0 * 0.7 / (n as f64).sqrt(), "{mean_sin} vs {expected}");
    }
}
