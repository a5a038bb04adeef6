//! Registry of named drift and observation maps. All maps act componentwise.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "snake_case")]
pub enum MapFn {
    Identity,
    /// `slope * x + offset`
    Affine { slope: f64, offset: f64 },
    /// `slope * x + offset + amplitude * sin(freq * x)`
    SinePerturbedAffine { slope: f64, offset: f64, amplitude: f64, freq: f64 },
    /// `gain * x^3 / (scale^2 + x^2)`: cubic near zero, linear growth `gain * x` far out.
    CubicSaturating { gain: f64, scale: f64 },
}

impl MapFn {
    #[inline]
    pub fn apply1(&self, x: f64) -> f64 {
        match *self {
            MapFn::Identity => x,
            MapFn::Affine { slope, offset } => slope * x + offset,
            MapFn::SinePerturbedAffine { slope, offset, amplitude, freq } => {
                slope * x + offset + amplitude * (freq * x).sin()
            }
            MapFn::CubicSaturating { gain, scale } => gain * x * x * x / (scale * scale + x * x),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.apply1(v)).collect()
    }

    /// Analytic Lipschitz constant (per component, hence also in Euclidean norm).
    pub fn lipschitz(&self) -> f64 {
        match *self {
            MapFn::Identity => 1.0,
            MapFn::Affine { slope, .. } => slope.abs(),
            MapFn::SinePerturbedAffine { slope, amplitude, freq, .. } => {
                slope.abs() + (amplitude * freq).abs()
            }
            // sup of d/dx x^3/(s^2+x^2) is 9/8, reached at x^2 = 3 s^2
            MapFn::CubicSaturating { gain, .. } => 1.125 * gain.abs(),
        }
    }

    /// Strictly monotone maps admit an inverse.
    pub fn is_strictly_monotone(&self) -> bool {
        match *self {
            MapFn::Identity => true,
            MapFn::Affine { slope, .. } => slope != 0.0,
            MapFn::SinePerturbedAffine { slope, amplitude, freq, .. } => {
                slope.abs() > (amplitude * freq).abs()
            }
            MapFn::CubicSaturating { gain, scale } => gain != 0.0 && scale != 0.0,
        }
    }

    /// Preimage of a scalar value for strictly monotone maps.
    pub fn inverse1(&self, y: f64) -> Option<f64> {
        if !self.is_strictly_monotone() {
            return None;
        }
        match *self {
            MapFn::Identity => Some(y),
            MapFn::Affine { slope, offset } => Some((y - offset) / slope),
            _ => self.bisect_inverse(y),
        }
    }

    pub fn inverse(&self, y: &[f64]) -> Option<Vec<f64>> {
        y.iter().map(|&v| self.inverse1(v)).collect()
    }

    fn bisect_inverse(&self, y: f64) -> Option<f64> {
        let increasing = self.apply1(1.0) > self.apply1(-1.0);
        let g = |x: f64| if increasing { self.apply1(x) - y } else { y - self.apply1(x) };
        let mut lo = -1.0;
        let mut hi = 1.0;
        let mut expand = 0;
        while g(lo) > 0.0 {
            lo *= 2.0;
            expand += 1;
            if expand > 1100 {
                return None;
            }
        }
        while g(hi) < 0.0 {
            hi *= 2.0;
            expand += 1;
            if expand > 1100 {
                return None;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Numerical sup-norm of `self - other` over `[-half_width, half_width]`.
    pub fn sup_gap(&self, other: &MapFn, half_width: f64, points: usize) -> f64 {
        let step = 2.0 * half_width / (points.max(2) - 1) as f64;
        (0..points.max(2))
            .map(|i| {
                let x = -half_width + step * i as f64;
                (self.apply1(x) - other.apply1(x)).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverses_round_trip() {
        let maps = [
            MapFn::Identity,
            MapFn::Affine { slope: 2.0, offset: -1.0 },
            MapFn::SinePerturbedAffine { slope: 1.0, offset: 0.0, amplitude: 0.5, freq: 1.0 },
            MapFn::CubicSaturating { gain: 1.0, scale: 2.0 },
        ];
        for m in &maps {
            for &x in &[-7.3, -0.4, 0.0, 0.9, 12.0] {
                let y = m.apply1(x);
                let back = m.inverse1(y).unwrap();
                assert!((m.apply1(back) - y).abs() < 1e-9, "{m:?} at {x}");
            }
        }
    }

    #[test]
    fn non_monotone_has_no_inverse() {
        let m = MapFn::SinePerturbedAffine { slope: 0.5, offset: 0.0, amplitude: 1.0, freq: 1.0 };
        assert!(m.inverse1(0.3).is_none());
    }

    #[test]
    fn sine_gap_is_amplitude() {
        let f = MapFn::Identity;
        let g = MapFn::SinePerturbedAffine { slope: 1.0, offset: 0.0, amplitude: 1.0, freq: 1.0 };
        let gap = f.sup_gap(&g, 50.0, 100_001);
        assert!((gap - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cubic_saturating_lipschitz_bound_is_tight() {
        let m = MapFn::CubicSaturating { gain: 1.0, scale: 1.0 };
        let h = 1e-6;
        let x = 3f64.sqrt();
        let slope = (m.apply1(x + h) - m.apply1(x - h)) / (2.0 * h);
        assert!((slope - 1.125).abs() < 1e-6);
    }
}
