//! Noise densities on the real line; vector noise uses i.i.d. components.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Cauchy, Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NoiseDensity {
    Gaussian { std: f64 },
    Laplace { scale: f64 },
    Cauchy { scale: f64 },
    StudentT { df: f64, scale: f64 },
    /// Finite Gaussian mixture; weights need not be normalized.
    GaussianMixture { components: Vec<MixtureComponent> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7, n = 9
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

impl NoiseDensity {
    pub fn standard_normal() -> Self {
        NoiseDensity::Gaussian { std: 1.0 }
    }

    pub fn validate(&self) -> Result<(), String> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be positive and finite, got {v}"))
            }
        };
        match self {
            NoiseDensity::Gaussian { std } => pos("std", *std),
            NoiseDensity::Laplace { scale } | NoiseDensity::Cauchy { scale } => pos("scale", *scale),
            NoiseDensity::StudentT { df, scale } => pos("df", *df).and(pos("scale", *scale)),
            NoiseDensity::GaussianMixture { components } => {
                if components.is_empty() {
                    return Err("mixture needs at least one component".into());
                }
                for c in components {
                    pos("weight", c.weight)?;
                    pos("std", c.std)?;
                }
                Ok(())
            }
        }
    }

    pub fn ln_pdf1(&self, u: f64) -> f64 {
        match self {
            NoiseDensity::Gaussian { std } => {
                let z = u / std;
                -0.5 * z * z - std.ln() - 0.5 * (2.0 * PI).ln()
            }
            NoiseDensity::Laplace { scale } => -u.abs() / scale - (2.0 * scale).ln(),
            NoiseDensity::Cauchy { scale } => {
                let z = u / scale;
                -(PI * scale).ln() - z.mul_add(z, 1.0).ln()
            }
            NoiseDensity::StudentT { df, scale } => {
                let z = u / scale;
                ln_gamma(0.5 * (df + 1.0))
                    - ln_gamma(0.5 * df)
                    - 0.5 * (df * PI).ln()
                    - scale.ln()
                    - 0.5 * (df + 1.0) * (z * z / df).ln_1p()
            }
            NoiseDensity::GaussianMixture { .. } => self.pdf1(u).ln(),
        }
    }

    pub fn pdf1(&self, u: f64) -> f64 {
        match self {
            NoiseDensity::Gaussian { std } => {
                let z = u / std;
                (-0.5 * z * z).exp() / (std * (2.0 * PI).sqrt())
            }
            NoiseDensity::GaussianMixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                components
                    .iter()
                    .map(|c| {
                        let z = (u - c.mean) / c.std;
                        c.weight * (-0.5 * z * z).exp() / (c.std * (2.0 * PI).sqrt())
                    })
                    .sum::<f64>()
                    / total
            }
            _ => self.ln_pdf1(u).exp(),
        }
    }

    /// Product density of i.i.d. components.
    pub fn pdf(&self, u: &[f64]) -> f64 {
        if u.len() == 1 {
            return self.pdf1(u[0]);
        }
        self.ln_pdf(u).exp()
    }

    pub fn ln_pdf(&self, u: &[f64]) -> f64 {
        u.iter().map(|&v| self.ln_pdf1(v)).sum()
    }

    /// Symmetric about zero and non-increasing in `|u|`.
    pub fn is_symmetric_unimodal(&self) -> bool {
        !matches!(self, NoiseDensity::GaussianMixture { .. })
    }

    /// Radial densities have `inf/sup` over balls determined by the radius alone in any dimension.
    pub fn is_radial(&self, dim: usize) -> bool {
        dim == 1 && self.is_symmetric_unimodal() || matches!(self, NoiseDensity::Gaussian { .. })
    }

    /// `sup_u pdf1(u)`.
    pub fn peak1(&self) -> f64 {
        if self.is_symmetric_unimodal() {
            return self.pdf1(0.0);
        }
        self.pdf1(self.peak_location())
    }

    /// Maximizer of `pdf1`.
    pub fn peak_location(&self) -> f64 {
        if self.is_symmetric_unimodal() {
            return 0.0;
        }
        let r = self.support_radius(1e-18);
        let n = 200_001;
        let step = 2.0 * r / (n - 1) as f64;
        let mut best = (0.0, 0.0);
        for i in 0..n {
            let u = -r + step * i as f64;
            let p = self.pdf1(u);
            if p > best.1 {
                best = (u, p);
            }
        }
        // golden-section refinement around the best grid point
        let (mut a, mut b) = (best.0 - step, best.0 + step);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if self.pdf1(c) > self.pdf1(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let mid = 0.5 * (a + b);
        if self.pdf1(mid) >= best.1 {
            mid
        } else {
            best.0
        }
    }

    /// `sup` of the `dim`-fold product density.
    pub fn peak(&self, dim: usize) -> f64 {
        self.peak1().powi(dim as i32)
    }

    /// Radius beyond which `pdf1 < rel_tol * peak1` (for symmetric unimodal densities exactly).
    pub fn support_radius(&self, rel_tol: f64) -> f64 {
        let l = (1.0 / rel_tol).ln();
        match self {
            NoiseDensity::Gaussian { std } => std * (2.0 * l).sqrt(),
            NoiseDensity::Laplace { scale } => scale * l,
            NoiseDensity::Cauchy { scale } => scale * (1.0 / rel_tol - 1.0).max(0.0).sqrt(),
            NoiseDensity::StudentT { df, scale } => {
                scale * (df * ((1.0 / rel_tol).powf(2.0 / (df + 1.0)) - 1.0)).max(0.0).sqrt()
            }
            NoiseDensity::GaussianMixture { components } => components
                .iter()
                .map(|c| c.mean.abs() + c.std * (2.0 * (l + 10.0)).sqrt())
                .fold(0.0, f64::max),
        }
    }

    /// Standard deviation when finite, otherwise a robust scale (interquartile half-width).
    pub fn spread(&self) -> f64 {
        match self {
            NoiseDensity::Gaussian { std } => *std,
            NoiseDensity::Laplace { scale } => scale * 2f64.sqrt(),
            NoiseDensity::Cauchy { scale } => *scale,
            NoiseDensity::StudentT { df, scale } => {
                if *df > 2.0 {
                    scale * (df / (df - 2.0)).sqrt()
                } else {
                    *scale
                }
            }
            NoiseDensity::GaussianMixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                let mean: f64 = components.iter().map(|c| c.weight * c.mean).sum::<f64>() / total;
                let second: f64 = components
                    .iter()
                    .map(|c| c.weight * (c.std * c.std + c.mean * c.mean))
                    .sum::<f64>()
                    / total;
                (second - mean * mean).max(0.0).sqrt()
            }
        }
    }

    pub fn sample1<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseDensity::Gaussian { std } => Normal::new(0.0, *std).expect("validated std").sample(rng),
            NoiseDensity::Laplace { scale } => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            NoiseDensity::Cauchy { scale } => Cauchy::new(0.0, *scale).expect("validated scale").sample(rng),
            NoiseDensity::StudentT { df, scale } => {
                scale * StudentT::new(*df).expect("validated df").sample(rng)
            }
            NoiseDensity::GaussianMixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                let mut pick = rng.random::<f64>() * total;
                let mut chosen = &components[components.len() - 1];
                for c in components {
                    if pick < c.weight {
                        chosen = c;
                        break;
                    }
                    pick -= c.weight;
                }
                chosen.mean + chosen.std * Normal::new(0.0, 1.0).expect("unit normal").sample(rng)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.sample1(rng)).collect()
    }
}
