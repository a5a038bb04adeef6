//! Random finite fixtures shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use ldfilter::doeblin::{finite_ld_construct, FiniteLd};
use ldfilter::model::{Emission, FiniteModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub fm: FiniteModel,
    pub ld: FiniteLd,
    pub ys: Vec<f64>,
}

/// Probability vector with entries bounded away from zero.
pub fn random_law(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

/// 2 to 4 states, positive transition rows, table emissions over `symbols` observation values,
/// one bin per symbol with a random non-empty set each, and `n + 1` observations.
pub fn random_fixture(seed: u64, n: usize) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(2..=4);
    let symbols = rng.random_range(2..=3);
    let q: Vec<Vec<f64>> = (0..m).map(|_| random_law(&mut rng, m)).collect();
    let emissions = (0..m)
        .map(|_| Emission::Table { values: (0..symbols).map(|_| rng.random_range(0.1..2.0)).collect() })
        .collect();
    let fm = FiniteModel::new(q, emissions).expect("valid fixture");
    let edges: Vec<f64> = (1..symbols).map(|s| s as f64 - 0.5).collect();
    let sets: Vec<Vec<usize>> = (0..symbols)
        .map(|_| {
            let mask = rng.random_range(1u32..(1 << m));
            (0..m).filter(|i| mask >> i & 1 == 1).collect()
        })
        .collect();
    let ld = finite_ld_construct(&fm, edges, sets).expect("positive rows always construct");
    let ys = (0..=n).map(|_| rng.random_range(0..symbols) as f64).collect();
    Fixture { fm, ld, ys }
}
