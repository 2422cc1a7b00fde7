//! Exact tabular MDP machinery: induced dynamics, stationary distributions,
//! gain/bias solutions of Poisson's equation, and n-step kernels.
//!
//! Everything here is deterministic linear algebra; these routines provide
//! the ground truth that the learner and the stability analyzer are checked
//! against.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

/// Absolute tolerance used when validating probability rows.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Default absolute tolerance for solver residuals (stationarity, Poisson,
/// centering).
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// A finite MDP with dense tables: transition tensor p(s'|s,a), reward
/// table r(s,a), and a start distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    /// Row-major [s][a][s'].
    transition: Vec<f64>,
    /// Row-major [s][a].
    reward: Vec<f64>,
    start: Vec<f64>,
}

/// On-disk form of [`TabularMdp`]: plain nested arrays, losslessly
/// round-trippable through JSON.
#[derive(Debug, Serialize, Deserialize)]
struct MdpFile {
    num_states: usize,
    num_actions: usize,
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
    start: Vec<f64>,
}

fn check_probability_row(row: &[f64], what: &str) -> Result<()> {
    let mut sum = 0.0;
    for &p in row {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::Input(format!("{what}: entry {p} is not a probability")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(Error::Input(format!("{what}: row sums to {sum}, expected 1")));
    }
    Ok(())
}

impl TabularMdp {
    /// Builds an MDP from flat row-major tables, validating all stochastic
    /// invariants: each `transition[s][a][..]` row and `start` must be a
    /// probability vector (sum within `1e-12` of one, entries nonnegative).
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        start: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::Domain("num_states and num_actions must be positive".into()));
        }
        if transition.len() != num_states * num_actions * num_states {
            return Err(Error::Shape(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                num_states * num_actions * num_states
            )));
        }
        if reward.len() != num_states * num_actions {
            return Err(Error::Shape(format!(
                "reward has {} entries, expected {}",
                reward.len(),
                num_states * num_actions
            )));
        }
        if start.len() != num_states {
            return Err(Error::Shape(format!(
                "start has {} entries, expected {}",
                start.len(),
                num_states
            )));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::Input("reward table contains a non-finite entry".into()));
        }
        for s in 0..num_states {
            for a in 0..num_actions {
                let base = (s * num_actions + a) * num_states;
                check_probability_row(
                    &transition[base..base + num_states],
                    &format!("transition[{s}][{a}]"),
                )?;
            }
        }
        check_probability_row(&start, "start")?;
        Ok(Self { num_states, num_actions, transition, reward, start })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// The row p(·|s,a) as a slice of length `num_states`.
    pub fn transition_row(&self, state: usize, action: usize) -> &[f64] {
        let base = (state * self.num_actions + action) * self.num_states;
        &self.transition[base..base + self.num_states]
    }

    pub fn transition_prob(&self, state: usize, action: usize, next: usize) -> f64 {
        self.transition[(state * self.num_actions + action) * self.num_states + next]
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.reward[state * self.num_actions + action]
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    /// Serializes to the JSON specification format (nested arrays, full
    /// float precision).
    pub fn to_json(&self) -> String {
        let file = MdpFile {
            num_states: self.num_states,
            num_actions: self.num_actions,
            transition: (0..self.num_states)
                .map(|s| {
                    (0..self.num_actions)
                        .map(|a| self.transition_row(s, a).to_vec())
                        .collect()
                })
                .collect(),
            reward: (0..self.num_states)
                .map(|s| (0..self.num_actions).map(|a| self.reward(s, a)).collect())
                .collect(),
            start: self.start.clone(),
        };
        serde_json::to_string_pretty(&file).expect("MDP serialization cannot fail")
    }

    /// Parses the JSON specification format, re-validating every invariant.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: MdpFile = serde_json::from_str(text)?;
        if file.transition.len() != file.num_states
            || file.transition.iter().any(|per_a| per_a.len() != file.num_actions)
            || file.reward.len() != file.num_states
            || file.reward.iter().any(|row| row.len() != file.num_actions)
        {
            return Err(Error::Shape("transition/reward nesting does not match num_states × num_actions".into()));
        }
        let mut transition = Vec::with_capacity(file.num_states * file.num_actions * file.num_states);
        for per_a in &file.transition {
            for row in per_a {
                if row.len() != file.num_states {
                    return Err(Error::Shape("transition row length does not match num_states".into()));
                }
                transition.extend_from_slice(row);
            }
        }
        let reward = file.reward.into_iter().flatten().collect();
        Self::new(file.num_states, file.num_actions, transition, reward, file.start)
    }

    pub fn store(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// A row-stochastic action-probability table π(a|s).
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    num_states: usize,
    num_actions: usize,
    /// Row-major [s][a].
    probs: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PolicyFile {
    probs: Vec<Vec<f64>>,
}

impl Policy {
    /// Builds a policy from a flat row-major table; each row must be a
    /// probability vector.
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != num_states * num_actions {
            return Err(Error::Shape(format!(
                "policy table has {} entries, expected {}",
                probs.len(),
                num_states * num_actions
            )));
        }
        for s in 0..num_states {
            check_probability_row(&probs[s * num_actions..(s + 1) * num_actions], &format!("policy[{s}]"))?;
        }
        Ok(Self { num_states, num_actions, probs })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state * self.num_actions + action]
    }

    /// The row π(·|s).
    pub fn row(&self, state: usize) -> &[f64] {
        &self.probs[state * self.num_actions..(state + 1) * self.num_actions]
    }

    /// True when `self` assigns positive probability wherever `target`
    /// does (the off-policy coverage requirement, with `self` as behavior).
    pub fn covers(&self, target: &Policy) -> bool {
        self.num_states == target.num_states
            && self.num_actions == target.num_actions
            && self
                .probs
                .iter()
                .zip(&target.probs)
                .all(|(&mu, &pi)| pi <= 0.0 || mu > 0.0)
    }

    pub fn to_json(&self) -> String {
        let file = PolicyFile {
            probs: (0..self.num_states).map(|s| self.row(s).to_vec()).collect(),
        };
        serde_json::to_string_pretty(&file).expect("policy serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PolicyFile = serde_json::from_str(text)?;
        let num_states = file.probs.len();
        if num_states == 0 {
            return Err(Error::Shape("policy table is empty".into()));
        }
        let num_actions = file.probs[0].len();
        if num_actions == 0 || file.probs.iter().any(|row| row.len() != num_actions) {
            return Err(Error::Shape("policy rows must share one positive action count".into()));
        }
        Policy::new(num_states, num_actions, file.probs.into_iter().flatten().collect())
    }

    pub fn store(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// The Markov reward process induced by running a fixed policy on an MDP:
/// row-stochastic transition matrix and expected-reward vector.
#[derive(Debug, Clone)]
pub struct InducedChain {
    pub p: DMatrix<f64>,
    pub r: DVector<f64>,
}

/// Exact solution of the average-reward evaluation problem for one chain.
///
/// `bias` is the centered solution of Poisson's equation
/// `v = r − gain·e + P v` with `stationaryᵀ bias = 0`.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub gain: f64,
    pub bias: DVector<f64>,
    pub stationary: DVector<f64>,
}

/// Marginalizes an MDP over a policy: P(s,s') = Σ_a π(a|s) p(s'|s,a) and
/// r(s) = Σ_a π(a|s) r(s,a).
pub fn induced_dynamics(mdp: &TabularMdp, policy: &Policy) -> Result<InducedChain> {
    if policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions() {
        return Err(Error::Shape(format!(
            "policy is {}×{}, mdp is {}×{}",
            policy.num_states(),
            policy.num_actions(),
            mdp.num_states(),
            mdp.num_actions()
        )));
    }
    let n = mdp.num_states();
    let mut p = DMatrix::zeros(n, n);
    let mut r = DVector::zeros(n);
    for s in 0..n {
        for a in 0..mdp.num_actions() {
            let pi = policy.prob(s, a);
            if pi == 0.0 {
                continue;
            }
            r[s] += pi * mdp.reward(s, a);
            let row = mdp.transition_row(s, a);
            for (s2, &prob) in row.iter().enumerate() {
                p[(s, s2)] += pi * prob;
            }
        }
    }
    Ok(InducedChain { p, r })
}

/// Solves dᵀP = dᵀ, Σd = 1 from the stacked system [Pᵀ − I; eᵀ] d = [0; 1].
///
/// Because the rows of Pᵀ − I sum to zero, any one of them is implied by
/// the rest, so the system is solved in square form with the last row
/// replaced by the normalization eᵀd = 1 and pivoted elimination. That
/// square matrix is nonsingular exactly when the chain has a unique
/// stationary distribution.
///
/// Fails with a non-ergodicity diagnostic when the system is rank-deficient
/// (no unique stationary distribution) or when the solution has an entry
/// ≤ 1e-12 (some state is unreachable in steady state).
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    stationary_distribution_with(p, DEFAULT_TOLERANCE)
}

/// As [`stationary_distribution`], with an explicit residual tolerance.
pub fn stationary_distribution_with(p: &DMatrix<f64>, tolerance: f64) -> Result<DVector<f64>> {
    let n = p.nrows();
    if p.ncols() != n {
        return Err(Error::Shape(format!("transition matrix is {}×{}", p.nrows(), p.ncols())));
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        for j in 0..n {
            m[(i, j)] = p[(j, i)] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        m[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;

    let mut d = m.lu().solve(&b).ok_or_else(|| {
        Error::NonErgodic(
            "stationary system is rank-deficient; the chain has no unique stationary distribution"
                .into(),
        )
    })?;

    let total: f64 = d.sum();
    d /= total;
    if d.iter().any(|&x| x <= 1e-12) {
        return Err(Error::NonErgodic(
            "stationary distribution has a vanishing entry; the chain is not irreducible".into(),
        ));
    }
    let residual = (p.transpose() * &d - &d).abs().max();
    if residual > tolerance {
        return Err(Error::NonErgodic(format!(
            "stationary residual {residual:.3e} exceeds tolerance {tolerance:.3e}"
        )));
    }
    Ok(d)
}

/// Solves the average-reward evaluation problem exactly: gain = dᵀr and the
/// centered bias from the stacked Poisson system [(I − P); dᵀ] v = [r − gain·e; 0].
pub fn exact_solve(chain: &InducedChain) -> Result<ExactSolution> {
    exact_solve_with(chain, DEFAULT_TOLERANCE)
}

/// As [`exact_solve`], with an explicit residual tolerance.
///
/// The rows of I − P are linearly dependent through the left kernel dᵀ, so
/// the stacked system is solved in square form with the last Poisson row
/// replaced by the centering constraint dᵀv = 0.
pub fn exact_solve_with(chain: &InducedChain, tolerance: f64) -> Result<ExactSolution> {
    let n = chain.p.nrows();
    if chain.p.ncols() != n || chain.r.len() != n {
        return Err(Error::Shape("chain matrix and reward vector sizes disagree".into()));
    }
    let d = stationary_distribution_with(&chain.p, tolerance)?;
    let gain = d.dot(&chain.r);

    let mut m = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        for j in 0..n {
            m[(i, j)] = if i == j { 1.0 } else { 0.0 } - chain.p[(i, j)];
        }
    }
    for j in 0..n {
        m[(n - 1, j)] = d[j];
    }
    let mut b = DVector::zeros(n);
    for i in 0..n - 1 {
        b[i] = chain.r[i] - gain;
    }

    let mut bias = m
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NonErgodic("Poisson system is singular".into()))?;
    // Constant shifts leave the Poisson equation invariant, so the
    // centering constraint can be enforced exactly after the solve.
    let offset = d.dot(&bias);
    bias.add_scalar_mut(-offset);

    let poisson_residual = (&chain.r - DVector::from_element(n, gain) + &chain.p * &bias - &bias)
        .abs()
        .max();
    if poisson_residual > tolerance {
        return Err(Error::NonErgodic(format!(
            "Poisson residual {poisson_residual:.3e} exceeds tolerance {tolerance:.3e}"
        )));
    }
    Ok(ExactSolution { gain, bias, stationary: d })
}

/// Returns `(Pⁿ, r⁽ⁿ⁾)` where `r⁽ⁿ⁾ = Σ_{k=0}^{n−1} Pᵏ r` is the expected
/// n-step reward vector.
pub fn n_step_kernel(chain: &InducedChain, n: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if n == 0 {
        return Err(Error::Domain("n-step kernel requires n ≥ 1".into()));
    }
    let mut p_n = chain.p.clone();
    let mut r_n = chain.r.clone();
    let mut propagated = chain.r.clone();
    for _ in 1..n {
        propagated = &chain.p * propagated;
        r_n += &propagated;
        p_n *= &chain.p;
    }
    Ok((p_n, r_n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_mdp() -> TabularMdp {
        // Two actions with distinct kernels and rewards.
        TabularMdp::new(
            2,
            2,
            vec![
                0.9, 0.1, // s0, a0
                0.2, 0.8, // s0, a1
                0.2, 0.8, // s1, a0
                0.9, 0.1, // s1, a1
            ],
            vec![1.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_rows() {
        let err = TabularMdp::new(2, 1, vec![0.5, 0.4, 0.5, 0.5], vec![0.0, 0.0], vec![1.0, 0.0]);
        assert!(matches!(err, Err(Error::Input(_))));
        let err = Policy::new(1, 2, vec![0.7, 0.4]);
        assert!(matches!(err, Err(Error::Input(_))));
        let err = Policy::new(1, 2, vec![-0.1, 1.1]);
        assert!(matches!(err, Err(Error::Input(_))));
    }

    #[test]
    fn induced_single_action_is_that_action() {
        let mdp = two_state_mdp();
        let policy = Policy::new(2, 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let chain = induced_dynamics(&mdp, &policy).unwrap();
        assert_eq!(chain.p[(0, 0)], 0.9);
        assert_eq!(chain.p[(0, 1)], 0.1);
        assert_eq!(chain.p[(1, 0)], 0.2);
        assert_eq!(chain.r[0], 1.0);
        assert_eq!(chain.r[1], 0.0);
    }

    #[test]
    fn induced_uniform_over_identical_kernels_averages_rewards() {
        // Both actions share p(·|s,a) but rewards differ.
        let mdp = TabularMdp::new(
            2,
            2,
            vec![0.6, 0.4, 0.6, 0.4, 0.3, 0.7, 0.3, 0.7],
            vec![1.0, 0.0, 2.0, 4.0],
            vec![0.5, 0.5],
        )
        .unwrap();
        let uniform = Policy::new(2, 2, vec![0.5; 4]).unwrap();
        let chain = induced_dynamics(&mdp, &uniform).unwrap();
        assert!((chain.p[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((chain.p[(1, 1)] - 0.7).abs() < 1e-15);
        // Hand marginalization: r(s) = mean of the two rewards.
        assert!((chain.r[0] - 0.5).abs() < 1e-15);
        assert!((chain.r[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn induced_shape_mismatch() {
        let mdp = two_state_mdp();
        let policy = Policy::new(2, 3, vec![0.4, 0.3, 0.3, 0.2, 0.5, 0.3]).unwrap();
        assert!(matches!(induced_dynamics(&mdp, &policy), Err(Error::Shape(_))));
    }

    #[test]
    fn stationary_symmetric_chain() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let d = stationary_distribution(&p).unwrap();
        assert!((d[0] - 0.5).abs() < 1e-12);
        assert!((d[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stationary_hand_solved() {
        // dᵀP = dᵀ for this chain gives d = (2/3, 1/3).
        let p = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8]);
        let d = stationary_distribution(&p).unwrap();
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((d[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_rejects_identity() {
        let p = DMatrix::<f64>::identity(3, 3);
        assert!(matches!(stationary_distribution(&p), Err(Error::NonErgodic(_))));
    }

    #[test]
    fn stationary_rejects_absorbing() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.5]);
        assert!(matches!(stationary_distribution(&p), Err(Error::NonErgodic(_))));
    }

    #[test]
    fn exact_solve_constant_reward() {
        let chain = InducedChain {
            p: DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8]),
            r: DVector::from_element(2, 3.5),
        };
        let sol = exact_solve(&chain).unwrap();
        assert!((sol.gain - 3.5).abs() < 1e-12);
        assert!(sol.bias.abs().max() < 1e-10);
    }

    #[test]
    fn exact_solve_hand_solved() {
        // Poisson + centering by hand: gain = 2/3, bias = (10/9, −20/9).
        let chain = InducedChain {
            p: DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8]),
            r: DVector::from_row_slice(&[1.0, 0.0]),
        };
        let sol = exact_solve(&chain).unwrap();
        assert!((sol.gain - 2.0 / 3.0).abs() < 1e-12);
        assert!((sol.bias[0] - 10.0 / 9.0).abs() < 1e-10);
        assert!((sol.bias[1] + 20.0 / 9.0).abs() < 1e-10);
        assert!(sol.stationary.dot(&sol.bias).abs() < 1e-10);
    }

    #[test]
    fn exact_solve_reward_shift_moves_gain_only() {
        let p = DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.4, 0.6]);
        let r = DVector::from_row_slice(&[0.2, 1.3]);
        let base = exact_solve(&InducedChain { p: p.clone(), r: r.clone() }).unwrap();
        let shifted = exact_solve(&InducedChain {
            p,
            r: r.map(|x| x + 3.0),
        })
        .unwrap();
        assert!((shifted.gain - base.gain - 3.0).abs() < 1e-12);
        assert!((&shifted.bias - &base.bias).abs().max() < 1e-9);
    }

    #[test]
    fn n_step_kernel_base_case() {
        let chain = InducedChain {
            p: DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8]),
            r: DVector::from_row_slice(&[1.0, 0.0]),
        };
        let (p1, r1) = n_step_kernel(&chain, 1).unwrap();
        assert_eq!(p1, chain.p);
        assert_eq!(r1, chain.r);
        assert!(matches!(n_step_kernel(&chain, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn n_step_kernel_two_steps_by_hand() {
        let chain = InducedChain {
            p: DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]),
            r: DVector::from_row_slice(&[1.0, 0.0]),
        };
        let (p2, r2) = n_step_kernel(&chain, 2).unwrap();
        assert_eq!(p2, chain.p);
        assert!((r2[0] - 1.5).abs() < 1e-15);
        assert!((r2[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mdp_json_round_trip_is_lossless() {
        let mdp = two_state_mdp();
        let back = TabularMdp::from_json(&mdp.to_json()).unwrap();
        assert_eq!(mdp, back);
    }

    #[test]
    fn policy_json_round_trip_is_lossless() {
        let policy = Policy::new(2, 2, vec![0.1, 0.9, 1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let back = Policy::from_json(&policy.to_json()).unwrap();
        assert_eq!(policy, back);
    }
}
