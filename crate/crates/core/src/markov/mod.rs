//! Finite continuous-time Markov chains with rate rewards.
//!
//! A chain is described by its infinitesimal generator: off-diagonal entries
//! are transition rates (1/s) and each diagonal entry is minus the row's exit
//! rate. Only stationary (long-run) analysis is provided.

mod solve;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use solve::{reachable_states, steady_state, steady_state_with};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MarkovError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("structure error: {0}")]
    Structure(String),
    #[error("stationary residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
}

/// Numeric tolerances used by the solver and the generator checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Maximum absolute row sum of a generator.
    pub row_sum: f64,
    /// Maximum `‖πQ‖∞` accepted from the stationary solve.
    pub residual: f64,
    /// Maximum `|Σπ − 1|`.
    pub normalization: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            row_sum: 1e-12,
            residual: 1e-10,
            normalization: 1e-12,
        }
    }
}

/// A single positive-rate transition `from → to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

impl Transition {
    pub fn new(from: usize, to: usize, rate: f64) -> Self {
        Transition { from, to, rate }
    }
}

impl From<(usize, usize, f64)> for Transition {
    fn from((from, to, rate): (usize, usize, f64)) -> Self {
        Transition { from, to, rate }
    }
}

/// Sparse infinitesimal generator `Q` of a finite CTMC.
///
/// Rows hold the off-diagonal rates sorted by target state; the diagonal is
/// stored separately and always equals minus the sum of the row.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    rows: Vec<Vec<(usize, f64)>>,
    diagonal: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    /// Off-diagonal entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// `Q[i][j]`, including the diagonal.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diagonal[i];
        }
        match self.rows[i].binary_search_by_key(&j, |&(c, _)| c) {
            Ok(k) => self.rows[i][k].1,
            Err(_) => 0.0,
        }
    }

    /// Total outgoing rate of state `i`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.diagonal[i]
    }

    /// Mean residence time in state `i` (infinite for absorbing states).
    pub fn mean_residence_time(&self, i: usize) -> f64 {
        1.0 / self.exit_rate(i)
    }

    /// All off-diagonal transitions in row-major order.
    pub fn transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, r)| Transition::new(i, j, r)))
    }

    pub fn n_transitions(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// The same chain with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<GeneratorMatrix, MarkovError> {
        let ts: Vec<Transition> = self
            .transitions()
            .map(|t| Transition::new(t.from, t.to, t.rate * factor))
            .collect();
        build_generator(self.n_states(), ts)
    }

    /// Largest absolute row sum; zero up to rounding for every generator.
    pub fn max_row_sum(&self) -> f64 {
        self.rows
            .iter()
            .zip(&self.diagonal)
            .map(|(row, d)| libm::fabs(row.iter().map(|&(_, r)| r).sum::<f64>() + d))
            .fold(0.0, f64::max)
    }

    /// Dense copy, mainly for tests and debugging output.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n_states();
        let mut m = alloc::vec![alloc::vec![0.0; n]; n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, r) in row {
                m[i][j] = r;
            }
            m[i][i] = self.diagonal[i];
        }
        m
    }
}

/// Builds a generator from a list of transitions.
///
/// Parallel transitions between the same pair of states are summed.
pub fn build_generator<I, T>(n_states: usize, transitions: I) -> Result<GeneratorMatrix, MarkovError>
where
    I: IntoIterator<Item = T>,
    T: Into<Transition>,
{
    if n_states == 0 {
        return Err(MarkovError::Validation("a chain needs at least one state".into()));
    }
    let mut acc: Vec<BTreeMap<usize, f64>> = (0..n_states).map(|_| BTreeMap::new()).collect();
    for t in transitions {
        let t: Transition = t.into();
        if t.from >= n_states || t.to >= n_states {
            return Err(MarkovError::Validation(alloc::format!(
                "transition {} -> {} out of range for {} states",
                t.from,
                t.to,
                n_states
            )));
        }
        if t.from == t.to {
            return Err(MarkovError::Validation(alloc::format!("self-loop on state {}", t.from)));
        }
        if !(t.rate > 0.0) || !t.rate.is_finite() {
            return Err(MarkovError::Validation(alloc::format!(
                "transition {} -> {} has non-positive or non-finite rate {}",
                t.from,
                t.to,
                t.rate
            )));
        }
        *acc[t.from].entry(t.to).or_insert(0.0) += t.rate;
    }
    let rows: Vec<Vec<(usize, f64)>> = acc.into_iter().map(|m| m.into_iter().collect()).collect();
    let diagonal = rows
        .iter()
        .map(|row| -row.iter().map(|&(_, r)| r).sum::<f64>())
        .collect();
    Ok(GeneratorMatrix { rows, diagonal })
}

/// Long-run state occupancy probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    probabilities: Vec<f64>,
}

impl StationaryDistribution {
    pub(crate) fn from_vec(probabilities: Vec<f64>) -> Self {
        StationaryDistribution { probabilities }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probabilities[i]
    }

    /// `‖πQ‖∞` against the given generator.
    pub fn residual(&self, generator: &GeneratorMatrix) -> f64 {
        let n = generator.n_states();
        let mut flow = alloc::vec![0.0; n];
        for i in 0..n {
            let p = self.probabilities[i];
            flow[i] += p * generator.diagonal[i];
            for &(j, r) in generator.row(i) {
                flow[j] += p * r;
            }
        }
        flow.iter().map(|v| libm::fabs(*v)).fold(0.0, f64::max)
    }
}

/// Per-state rate rewards (units are the caller's: Watts, Mbps, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct RewardVector {
    rewards: Vec<f64>,
}

impl RewardVector {
    pub fn new(rewards: Vec<f64>) -> Result<Self, MarkovError> {
        if let Some((i, r)) = rewards.iter().enumerate().find(|(_, r)| !r.is_finite() || **r < 0.0) {
            return Err(MarkovError::Validation(alloc::format!(
                "reward of state {i} must be finite and non-negative, got {r}"
            )));
        }
        Ok(RewardVector { rewards })
    }

    pub fn zeros(n: usize) -> Self {
        RewardVector {
            rewards: alloc::vec![0.0; n],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rewards
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Stationary probability mass of the states selected by `predicate`.
pub fn steady_state_probability<P>(dist: &StationaryDistribution, mut predicate: P) -> f64
where
    P: FnMut(usize) -> bool,
{
    let p: f64 = dist
        .probabilities
        .iter()
        .enumerate()
        .filter(|(i, _)| predicate(*i))
        .map(|(_, p)| *p)
        .sum();
    p.clamp(0.0, 1.0)
}

/// `Σ π_i r_i`.
pub fn expected_reward(dist: &StationaryDistribution, rewards: &RewardVector) -> Result<f64, MarkovError> {
    if dist.len() != rewards.len() {
        return Err(MarkovError::Validation(alloc::format!(
            "reward vector has {} entries but the chain has {} states",
            rewards.len(),
            dist.len()
        )));
    }
    Ok(dist
        .probabilities
        .iter()
        .zip(&rewards.rewards)
        .map(|(p, r)| p * r)
        .sum())
}

impl fmt::Display for GeneratorMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in self.transitions() {
            writeln!(f, "{} {} {:e}", t.from, t.to, t.rate)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn two_state_generator() {
        let q = build_generator(2, [(0, 1, 1.0), (1, 0, 2.0)]).unwrap();
        assert_eq!(q.to_dense(), vec![vec![-1.0, 1.0], vec![2.0, -2.0]]);
    }

    #[test]
    fn singleton_is_absorbing() {
        let q = build_generator(1, Vec::<Transition>::new()).unwrap();
        assert_eq!(q.to_dense(), vec![vec![0.0]]);
    }

    #[test]
    fn parallel_transitions_are_summed() {
        let q = build_generator(2, [(0, 1, 1.0), (0, 1, 0.5), (1, 0, 1.0)]).unwrap();
        assert_eq!(q.entry(0, 1), 1.5);
        assert_eq!(q.entry(0, 0), -1.5);
        assert_eq!(q.n_transitions(), 2);
    }

    #[test]
    fn rejects_bad_transitions() {
        assert!(matches!(
            build_generator(2, [(0, 1, 0.0)]),
            Err(MarkovError::Validation(_))
        ));
        assert!(matches!(
            build_generator(2, [(0, 1, -1.0)]),
            Err(MarkovError::Validation(_))
        ));
        assert!(matches!(
            build_generator(2, [(0, 2, 1.0)]),
            Err(MarkovError::Validation(_))
        ));
        assert!(matches!(
            build_generator(2, [(1, 1, 1.0)]),
            Err(MarkovError::Validation(_))
        ));
    }

    #[test]
    fn probability_and_reward() {
        let pi = StationaryDistribution::from_vec(vec![2.0 / 3.0, 1.0 / 3.0]);
        assert!((steady_state_probability(&pi, |i| i == 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(steady_state_probability(&pi, |_| false), 0.0);
        let r = RewardVector::new(vec![0.0, 3.0]).unwrap();
        assert!((expected_reward(&pi, &r).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(expected_reward(&pi, &RewardVector::zeros(2)).unwrap(), 0.0);
        assert!(expected_reward(&pi, &RewardVector::zeros(3)).is_err());
    }

    #[test]
    fn reward_vector_rejects_negative_and_nan() {
        assert!(RewardVector::new(vec![1.0, -0.5]).is_err());
        assert!(RewardVector::new(vec![f64::NAN]).is_err());
    }
}
