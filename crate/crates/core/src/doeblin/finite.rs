//! Exact local Doeblin constructions on finite state spaces, with the uniform law on
//! `C(y')` as reference measure.

use serde::{Deserialize, Serialize};

use super::verify::LdReport;
use crate::error::{Error, Result};
use crate::model::FiniteModel;

/// Observation bins are cut by sorted `edges`: `bin(y)` is the number of edges `<= y`, and
/// `sets[bin]` is the state subset attached to that bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteLd {
    pub model: FiniteModel,
    pub edges: Vec<f64>,
    pub sets: Vec<Vec<usize>>,
}

pub fn finite_ld_construct(fm: &FiniteModel, edges: Vec<f64>, sets: Vec<Vec<usize>>) -> Result<FiniteLd> {
    let m = fm.states();
    if sets.len() != edges.len() + 1 {
        return Err(Error::LdConstruction(format!("{} edges need {} sets, got {}", edges.len(), edges.len() + 1, sets.len())));
    }
    if edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::LdConstruction("bin edges must be strictly increasing".into()));
    }
    let mut sets = sets;
    for (b, s) in sets.iter_mut().enumerate() {
        s.sort_unstable();
        s.dedup();
        if s.is_empty() {
            return Err(Error::LdConstruction(format!("set for bin {b} is empty")));
        }
        if let Some(&bad) = s.iter().find(|&&i| i >= m) {
            return Err(Error::LdConstruction(format!("state {bad} in bin {b} is out of range")));
        }
    }
    for (b, from) in sets.iter().enumerate() {
        for (b2, to) in sets.iter().enumerate() {
            for &i in from {
                for &j in to {
                    if fm.q(i, j) <= 0.0 {
                        return Err(Error::LdConstruction(format!(
                            "Q({i}, {j}) = 0 between bins {b} and {b2}: eps_minus would vanish"
                        )));
                    }
                }
            }
        }
    }
    Ok(FiniteLd { model: fm.clone(), edges, sets })
}

impl FiniteLd {
    /// `C` is the whole state space for every observation.
    pub fn full(fm: &FiniteModel) -> Result<Self> {
        finite_ld_construct(fm, Vec::new(), vec![(0..fm.states()).collect()])
    }

    pub fn bin(&self, y: f64) -> usize {
        self.edges.partition_point(|&e| e <= y)
    }

    pub fn set(&self, y: f64) -> &[usize] {
        &self.sets[self.bin(y)]
    }

    pub fn contains(&self, y: f64, i: usize) -> bool {
        self.set(y).binary_search(&i).is_ok()
    }

    /// `(eps_minus, eps_plus) = |C'| * (min, max) Q(x, x')` over `x in C(y)`, `x' in C(y')`.
    pub fn eps(&self, y: f64, y_next: f64) -> (f64, f64) {
        let (from, to) = (self.set(y), self.set(y_next));
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for &i in from {
            for &j in to {
                lo = lo.min(self.model.q(i, j));
                hi = hi.max(self.model.q(i, j));
            }
        }
        let c = to.len() as f64;
        (c * lo, c * hi)
    }

    /// `lambda[g(., y') 1_C(y')]` with `lambda` uniform on `C(y')`.
    pub fn psi(&self, y_next: f64) -> f64 {
        let to = self.set(y_next);
        to.iter().map(|&j| self.model.g(j, y_next)).sum::<f64>() / to.len() as f64
    }

    pub fn upsilon_all(&self, y: f64) -> f64 {
        (0..self.model.states()).map(|i| self.model.g(i, y)).fold(0.0, f64::max)
    }

    /// Likelihood supremum outside `C(y)`, zero when `C(y)` is everything.
    pub fn upsilon_complement(&self, y: f64) -> f64 {
        (0..self.model.states()).filter(|&i| !self.contains(y, i)).map(|i| self.model.g(i, y)).fold(0.0, f64::max)
    }

    /// Smallest `eta` meeting the tail condition at every observation of `ys`.
    pub fn eta_for(&self, ys: &[f64]) -> f64 {
        ys.iter().map(|&y| self.upsilon_complement(y) / self.upsilon_all(y)).fold(0.0, f64::max)
    }

    /// `nu[g(., y0) Q g(., y1) 1_C(y1)]`.
    pub fn phi(&self, nu: &[f64], y0: f64, y1: f64) -> f64 {
        let to = self.set(y1);
        nu.iter()
            .enumerate()
            .map(|(i, &p)| {
                p * self.model.g(i, y0) * to.iter().map(|&j| self.model.q(i, j) * self.model.g(j, y1)).sum::<f64>()
            })
            .sum()
    }

    /// Checks the sandwich for every `x in C(y)` and every nonempty `A ⊆ C(y')`.
    pub fn verify_exhaustive(&self, y: f64, y_next: f64) -> LdReport {
        let (from, to) = (self.set(y), self.set(y_next));
        let eps = self.eps(y, y_next);
        let c = to.len() as f64;
        let mut report = LdReport::empty();
        for &i in from {
            for mask in 1u64..(1u64 << to.len()) {
                let members: Vec<usize> = (0..to.len()).filter(|b| mask >> b & 1 == 1).map(|b| to[b]).collect();
                let mass: f64 = members.iter().map(|&j| self.model.q(i, j)).sum();
                report.record(i as f64, (mask as f64, mask as f64), mass, members.len() as f64 / c, eps);
            }
        }
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doeblin::rho;
    use crate::model::Emission;

    fn two_state() -> FiniteModel {
        FiniteModel::two_state_fixture()
    }

    #[test]
    fn full_set_envelopes() {
        let ld = FiniteLd::full(&two_state()).unwrap();
        let (lo, hi) = ld.eps(0.0, 1.0);
        assert!((lo - 0.6).abs() < 1e-15 && (hi - 1.4).abs() < 1e-15);
    }

    #[test]
    fn singleton_sets_have_zero_rho() {
        let ld = finite_ld_construct(&two_state(), vec![0.0], vec![vec![0], vec![1]]).unwrap();
        let (lo, hi) = ld.eps(-1.0, -2.0);
        assert_eq!((lo, hi), (0.7, 0.7));
        assert_eq!(rho(lo, hi).unwrap(), 0.0);
        assert_eq!(ld.eps(-1.0, 1.0), (0.3, 0.3));
    }

    #[test]
    fn bins_follow_edges() {
        let ld = finite_ld_construct(&two_state(), vec![0.0, 2.0], vec![vec![0], vec![1], vec![0, 1]]).unwrap();
        assert_eq!(ld.bin(-0.1), 0);
        assert_eq!(ld.bin(0.0), 1);
        assert_eq!(ld.bin(3.0), 2);
    }

    #[test]
    fn construction_errors() {
        let sparse = FiniteModel::new(
            vec![vec![1.0, 0.0], vec![0.5, 0.5]],
            vec![Emission::Table { values: vec![1.0] }, Emission::Table { values: vec![1.0] }],
        )
        .unwrap();
        assert!(matches!(FiniteLd::full(&sparse), Err(Error::LdConstruction(_))));
        assert!(finite_ld_construct(&sparse, vec![], vec![vec![0]]).is_ok());
        assert!(finite_ld_construct(&sparse, vec![], vec![vec![]]).is_err());
        assert!(finite_ld_construct(&sparse, vec![1.0], vec![vec![0]]).is_err());
    }

    #[test]
    fn exhaustive_sandwich_is_tight() {
        let fm = FiniteModel::new(
            vec![vec![0.2, 0.3, 0.1, 0.4], vec![0.25, 0.25, 0.25, 0.25], vec![0.1, 0.2, 0.3, 0.4], vec![0.4, 0.3, 0.2, 0.1]],
            (0..4).map(|i| Emission::gaussian(i as f64, 1.0)).collect(),
        )
        .unwrap();
        let ld = FiniteLd::full(&fm).unwrap();
        let r = ld.verify_exhaustive(0.0, 1.0);
        assert_eq!(r.pairs_checked, 4 * 15);
        assert!(r.passed());
        // the extremal singletons hit the bounds exactly
        assert!(r.worst_lower_margin.abs() < 1e-12);
        assert!(r.worst_upper_margin.abs() < 1e-12);
    }

    #[test]
    fn phi_by_hand() {
        let fm = FiniteModel::new(
            vec![vec![0.7, 0.3], vec![0.3, 0.7]],
            vec![Emission::Table { values: vec![0.5, 2.0] }, Emission::Table { values: vec![1.5, 0.25] }],
        )
        .unwrap();
        let ld = finite_ld_construct(&fm, vec![0.5], vec![vec![0, 1], vec![1]]).unwrap();
        let nu = [0.4, 0.6];
        // y0 = 0: g = (0.5, 1.5); y1 = 1 selects C = {1} with g(1, 1) = 0.25
        let expect = 0.4 * 0.5 * 0.3 * 0.25 + 0.6 * 1.5 * 0.7 * 0.25;
        assert!((ld.phi(&nu, 0.0, 1.0) - expect).abs() < 1e-15);
        let ones = FiniteModel::new(
            vec![vec![0.7, 0.3], vec![0.3, 0.7]],
            vec![Emission::Table { values: vec![1.0] }, Emission::Table { values: vec![1.0] }],
        )
        .unwrap();
        assert!((FiniteLd::full(&ones).unwrap().phi(&[1.0, 0.0], 0.0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eta_and_upsilon() {
        let fm = FiniteModel::new(
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![Emission::Table { values: vec![2.0, 0.5] }, Emission::Table { values: vec![0.2, 1.0] }],
        )
        .unwrap();
        let ld = finite_ld_construct(&fm, vec![0.5], vec![vec![0], vec![1]]).unwrap();
        assert_eq!(ld.upsilon_all(0.0), 2.0);
        assert_eq!(ld.upsilon_complement(0.0), 0.2);
        assert!((ld.eta_for(&[0.0, 1.0]) - 0.5).abs() < 1e-15);
        assert_eq!(FiniteLd::full(&fm).unwrap().eta_for(&[0.0, 1.0]), 0.0);
    }
}
