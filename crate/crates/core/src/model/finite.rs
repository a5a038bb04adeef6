use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::noise::NoiseDensity;
use super::simulate::{stream_rng, SIMULATION_STREAM};
use crate::error::{Error, Result};

/// Per-state emission density `g(i, .)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Emission {
    /// `g(i, y) = noise(y - loc)`.
    Located { loc: f64, noise: NoiseDensity },
    /// Piecewise-constant table: `g(i, y) = values[round(y)]`, index clamped to the table.
    Table { values: Vec<f64> },
}

impl Emission {
    pub fn gaussian(loc: f64, std: f64) -> Self {
        Emission::Located { loc, noise: NoiseDensity::Gaussian { std } }
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Emission::Located { loc, noise } => noise.pdf1(y - loc),
            Emission::Table { values } => {
                let idx = y.round().clamp(0.0, (values.len() - 1) as f64) as usize;
                values[idx]
            }
        }
    }

    /// Draws an observation; tables are read as unnormalized masses on `0..len`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Emission::Located { loc, noise } => loc + noise.sample1(rng),
            Emission::Table { values } => {
                WeightedIndex::new(values).expect("validated table").sample(rng) as f64
            }
        }
    }
}

/// Hidden Markov model on states `0..m` with real-valued observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteModel {
    q: Vec<Vec<f64>>,
    emissions: Vec<Emission>,
}

pub const ROW_SUM_TOL: f64 = 1e-12;

impl FiniteModel {
    pub fn new(q: Vec<Vec<f64>>, emissions: Vec<Emission>) -> Result<Self> {
        let m = q.len();
        if m == 0 {
            return Err(Error::Validation("empty state space".into()));
        }
        if emissions.len() != m {
            return Err(Error::Validation(format!("{} emissions for {m} states", emissions.len())));
        }
        for (row, r) in q.iter().enumerate() {
            if r.len() != m {
                return Err(Error::Validation(format!("row {row} has {} entries, expected {m}", r.len())));
            }
            if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Validation(format!("row {row} has a negative or non-finite entry")));
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::RowSum { row, sum });
            }
        }
        for (i, e) in emissions.iter().enumerate() {
            match e {
                Emission::Located { noise, .. } => noise.validate().map_err(Error::Validation)?,
                Emission::Table { values } => {
                    if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                        return Err(Error::Validation(format!("emission table {i} must be non-empty and positive")));
                    }
                }
            }
        }
        Ok(FiniteModel { q, emissions })
    }

    /// Two-state symmetric chain `[[0.7, 0.3], [0.3, 0.7]]` with Gaussian emissions at -1 and +1.
    pub fn two_state_fixture() -> Self {
        FiniteModel::new(
            vec![vec![0.7, 0.3], vec![0.3, 0.7]],
            vec![Emission::gaussian(-1.0, 1.0), Emission::gaussian(1.0, 1.0)],
        )
        .expect("fixture is valid")
    }

    pub fn states(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.q[i][j]
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.q
    }

    pub fn emissions(&self) -> &[Emission] {
        &self.emissions
    }

    pub fn g(&self, i: usize, y: f64) -> f64 {
        self.emissions[i].eval(y)
    }

    pub fn g_vec(&self, y: f64) -> Vec<f64> {
        self.emissions.iter().map(|e| e.eval(y)).collect()
    }

    /// Hidden path `x_{0:n}` and observations `y_{0:n}`, deterministic in `seed`.
    pub fn simulate(&self, init: &[f64], n: usize, seed: u64) -> Result<(Vec<usize>, Vec<f64>)> {
        let m = self.states();
        if init.len() != m || init.iter().any(|p| !(*p >= 0.0)) || !(init.iter().sum::<f64>() > 0.0) {
            return Err(Error::Config(format!("initial law must be a nonnegative vector over {m} states")));
        }
        let mut rng = stream_rng(seed, SIMULATION_STREAM);
        let mut x = WeightedIndex::new(init).map_err(|e| Error::Config(e.to_string()))?.sample(&mut rng);
        let mut states = vec![x];
        let mut ys = vec![self.emissions[x].sample(&mut rng)];
        for _ in 0..n {
            x = WeightedIndex::new(&self.q[x]).expect("validated row").sample(&mut rng);
            states.push(x);
            ys.push(self.emissions[x].sample(&mut rng));
        }
        Ok((states, ys))
    }

    /// Row vector times transition matrix.
    pub fn propagate(&self, p: &[f64]) -> Vec<f64> {
        let m = self.states();
        let mut out = vec![0.0; m];
        for (i, pi) in p.iter().enumerate() {
            if *pi == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += pi * self.q[i][j];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulation_is_seeded_and_follows_q() {
        let fm = FiniteModel::new(
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![Emission::Table { values: vec![3.0, 1.0] }, Emission::gaussian(5.0, 0.1)],
        )
        .unwrap();
        let (xs, ys) = fm.simulate(&[1.0, 0.0], 20_000, 4).unwrap();
        assert_eq!(fm.simulate(&[1.0, 0.0], 20_000, 4).unwrap().1, ys);
        assert_eq!(xs[0], 0);
        let from0 = xs.windows(2).filter(|w| w[0] == 0).count() as f64;
        let stay0 = xs.windows(2).filter(|w| w[0] == 0 && w[1] == 0).count() as f64;
        assert!((stay0 / from0 - 0.9).abs() < 0.01);
        let zeros = xs.iter().zip(&ys).filter(|(x, _)| **x == 0).count() as f64;
        let y0 = xs.iter().zip(&ys).filter(|(x, y)| **x == 0 && **y == 0.0).count() as f64;
        assert!((y0 / zeros - 0.75).abs() < 0.02);
    }

    #[test]
    fn identity_matrix_is_valid() {
        let m = FiniteModel::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![Emission::gaussian(0.0, 1.0), Emission::Table { values: vec![1.0, 2.0] }],
        );
        assert!(m.is_ok());
    }

    #[test]
    fn row_sum_violation_reports_row() {
        let err = FiniteModel::new(
            vec![vec![0.5, 0.5], vec![0.6, 0.5]],
            vec![Emission::gaussian(0.0, 1.0), Emission::gaussian(1.0, 1.0)],
        )
        .unwrap_err();
        match err {
            Error::RowSum { row, sum } => {
                assert_eq!(row, 1);
                assert!((sum - 1.1).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fixture_is_valid() {
        let m = FiniteModel::two_state_fixture();
        assert_eq!(m.states(), 2);
        assert!(m.g(0, -1.0) > m.g(1, -1.0));
    }

    #[test]
    fn table_emission_clamps() {
        let e = Emission::Table { values: vec![2.0, 1.0] };
        assert_eq!(e.eval(0.0), 2.0);
        assert_eq!(e.eval(1.2), 1.0);
        assert_eq!(e.eval(9.0), 1.0);
        assert_eq!(e.eval(-3.0), 2.0);
    }
}
