//! Concrete continuing environments and policy constructors, plus a random
//! ergodic MDP generator for property tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Policy, TabularMdp};

/// Grid actions in fixed order; state index is `row * width + col` with
/// row 0 at the top. This layout is part of the reproducibility contract.
pub const ACTION_UP: usize = 0;
pub const ACTION_DOWN: usize = 1;
pub const ACTION_LEFT: usize = 2;
pub const ACTION_RIGHT: usize = 3;
pub const GRID_ACTIONS: usize = 4;

/// A continuing gridworld: deterministic orthogonal moves, border-blocked
/// moves self-loop, and reaching the goal teleports back to the start on
/// the next step (no termination).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridworldSpec {
    pub width: usize,
    pub height: usize,
    /// State index of the rewarding cell.
    pub goal: usize,
    /// State index the agent is reset to after visiting the goal.
    pub start_state: usize,
    pub goal_reward: f64,
}

impl GridworldSpec {
    /// Grid with the goal in the bottom-right corner and the start in the
    /// top-left corner.
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            goal: width * height - 1,
            start_state: 0,
            goal_reward: 1.0,
        }
    }

    pub fn num_states(&self) -> usize {
        self.width * self.height
    }

    fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::Domain("grid must be at least 2×2".into()));
        }
        let n = self.num_states();
        if self.goal >= n || self.start_state >= n {
            return Err(Error::Domain("goal/start state index out of range".into()));
        }
        if self.goal == self.start_state {
            return Err(Error::Domain("goal must differ from the start state".into()));
        }
        Ok(())
    }

    /// Deterministic move: where action `a` lands from state `s`, with
    /// border-blocked moves staying put. Ignores the goal-reset rule.
    fn neighbor(&self, state: usize, action: usize) -> usize {
        let (row, col) = (state / self.width, state % self.width);
        let (nr, nc) = match action {
            ACTION_UP => (row.saturating_sub(1), col),
            ACTION_DOWN => ((row + 1).min(self.height - 1), col),
            ACTION_LEFT => (row, col.saturating_sub(1)),
            ACTION_RIGHT => (row, (col + 1).min(self.width - 1)),
            _ => unreachable!("grid actions are 0..4"),
        };
        nr * self.width + nc
    }
}

impl Default for GridworldSpec {
    fn default() -> Self {
        Self::new(5, 5)
    }
}

/// Builds the tabular MDP of a [`GridworldSpec`].
///
/// Rewards are earned on landing: r(s,a) = goal_reward exactly when the
/// move from (s,a) lands on the goal cell. From the goal cell every action
/// leads to the start state with probability 1.
pub fn build_gridworld(spec: &GridworldSpec) -> Result<TabularMdp> {
    spec.validate()?;
    let n = spec.num_states();
    let mut transition = vec![0.0; n * GRID_ACTIONS * n];
    let mut reward = vec![0.0; n * GRID_ACTIONS];
    for s in 0..n {
        for a in 0..GRID_ACTIONS {
            let next = if s == spec.goal { spec.start_state } else { spec.neighbor(s, a) };
            transition[(s * GRID_ACTIONS + a) * n + next] = 1.0;
            if next == spec.goal {
                reward[s * GRID_ACTIONS + a] = spec.goal_reward;
            }
        }
    }
    let mut start = vec![0.0; n];
    start[spec.start_state] = 1.0;
    TabularMdp::new(n, GRID_ACTIONS, transition, reward, start)
}

/// π(a|s) = 1/|A| everywhere.
pub fn uniform_random_policy(mdp: &TabularMdp) -> Policy {
    let uniform = 1.0 / mdp.num_actions() as f64;
    Policy::new(
        mdp.num_states(),
        mdp.num_actions(),
        vec![uniform; mdp.num_states() * mdp.num_actions()],
    )
    .expect("uniform table is always row-stochastic")
}

/// ε-greedy around a per-state greedy action: the greedy action gets
/// 1 − ε + ε/|A|, every other action ε/|A|.
pub fn epsilon_greedy_policy(
    mdp: &TabularMdp,
    greedy_action: &[usize],
    epsilon: f64,
) -> Result<Policy> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("epsilon {epsilon} outside [0, 1]")));
    }
    if greedy_action.len() != mdp.num_states() {
        return Err(Error::Shape(format!(
            "greedy table covers {} states, mdp has {}",
            greedy_action.len(),
            mdp.num_states()
        )));
    }
    if let Some(&bad) = greedy_action.iter().find(|&&a| a >= mdp.num_actions()) {
        return Err(Error::Domain(format!("greedy action {bad} out of range")));
    }
    let num_actions = mdp.num_actions();
    let explore = epsilon / num_actions as f64;
    let mut probs = vec![explore; mdp.num_states() * num_actions];
    for (s, &g) in greedy_action.iter().enumerate() {
        probs[s * num_actions + g] = 1.0 - epsilon + explore;
    }
    Policy::new(mdp.num_states(), num_actions, probs)
}

/// All actions that reduce Manhattan distance to the goal from a cell; at
/// the goal cell (where dynamics ignore the action) every action ties.
fn manhattan_reducing_actions(spec: &GridworldSpec, state: usize) -> Vec<usize> {
    let (goal_row, goal_col) = (spec.goal / spec.width, spec.goal % spec.width);
    let (row, col) = (state / spec.width, state % spec.width);
    let mut reducing = Vec::with_capacity(2);
    if row > goal_row {
        reducing.push(ACTION_UP);
    }
    if row < goal_row {
        reducing.push(ACTION_DOWN);
    }
    if col > goal_col {
        reducing.push(ACTION_LEFT);
    }
    if col < goal_col {
        reducing.push(ACTION_RIGHT);
    }
    if reducing.is_empty() {
        reducing.extend(0..GRID_ACTIONS);
    }
    reducing
}

/// The gridworld target policy: ε-greedy over the set of goal-approaching
/// actions. The greedy mass 1 − ε is split uniformly over every action
/// that reduces Manhattan distance to the goal (each cell has one or two;
/// at the goal cell, where dynamics ignore the action, all four tie) and
/// every action keeps the ε/|A| exploration mass.
///
/// Splitting ties keeps the worst importance ratio against a uniform
/// behavior policy at (1−ε+ε/2)·|A|/2 instead of (1−ε+ε/4)·|A|, which is
/// what keeps multi-step off-policy products sane.
pub fn manhattan_epsilon_greedy_policy(spec: &GridworldSpec, epsilon: f64) -> Result<Policy> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("epsilon {epsilon} outside [0, 1]")));
    }
    spec.validate()?;
    let n = spec.num_states();
    let explore = epsilon / GRID_ACTIONS as f64;
    let mut probs = vec![explore; n * GRID_ACTIONS];
    for s in 0..n {
        let reducing = manhattan_reducing_actions(spec, s);
        let share = (1.0 - epsilon) / reducing.len() as f64;
        for a in reducing {
            probs[s * GRID_ACTIONS + a] += share;
        }
    }
    Policy::new(n, GRID_ACTIONS, probs)
}

/// A deterministic greedy base: at each cell the first action in order
/// (up, down, left, right) that reduces Manhattan distance to the goal; at
/// the goal cell itself (where dynamics ignore the action) the first
/// action.
pub fn manhattan_greedy_actions(spec: &GridworldSpec) -> Vec<usize> {
    let (goal_row, goal_col) = (spec.goal / spec.width, spec.goal % spec.width);
    (0..spec.num_states())
        .map(|s| {
            let (row, col) = (s / spec.width, s % spec.width);
            if row > goal_row {
                ACTION_UP
            } else if row < goal_row {
                ACTION_DOWN
            } else if col > goal_col {
                ACTION_LEFT
            } else if col < goal_col {
                ACTION_RIGHT
            } else {
                ACTION_UP
            }
        })
        .collect()
}

/// Samples a policy with full support: every π(a|s) ≥ floor, rows
/// normalized. Deterministic in the seed. Companion generator to
/// [`random_ergodic_mdp`] for off-policy property tests (full support
/// guarantees coverage in both directions).
pub fn random_policy(num_states: usize, num_actions: usize, seed: u64) -> Policy {
    let floor = 0.2 / num_actions as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let free_mass = 1.0 - num_actions as f64 * floor;
    let mut probs = Vec::with_capacity(num_states * num_actions);
    for _ in 0..num_states {
        let raw: Vec<f64> = (0..num_actions).map(|_| rng.random::<f64>() + 1e-9).collect();
        let total: f64 = raw.iter().sum();
        let mut row: Vec<f64> = raw.iter().map(|w| floor + free_mass * w / total).collect();
        let row_sum: f64 = row.iter().sum();
        for p in &mut row {
            *p /= row_sum;
        }
        probs.extend_from_slice(&row);
    }
    Policy::new(num_states, num_actions, probs).expect("generated rows are stochastic")
}

/// Default minimum transition probability produced by
/// [`random_ergodic_mdp`]; a strictly positive floor on every row makes the
/// chain irreducible and aperiodic under any policy with full support.
pub const DEFAULT_TRANSITION_FLOOR: f64 = 1e-3;

/// Samples an MDP whose transition rows are strictly positive (entries
/// ≥ the floor) and whose rewards are uniform in [0, 1]. Deterministic in
/// the seed.
pub fn random_ergodic_mdp(num_states: usize, num_actions: usize, seed: u64) -> TabularMdp {
    random_ergodic_mdp_with_floor(num_states, num_actions, seed, DEFAULT_TRANSITION_FLOOR)
}

/// As [`random_ergodic_mdp`] with an explicit floor. Panics if the floor
/// cannot be honored (`num_states * floor >= 1`).
pub fn random_ergodic_mdp_with_floor(
    num_states: usize,
    num_actions: usize,
    seed: u64,
    floor: f64,
) -> TabularMdp {
    assert!(num_states >= 2, "generator needs at least 2 states");
    assert!(num_actions >= 1, "generator needs at least 1 action");
    assert!(
        floor > 0.0 && (num_states as f64) * floor < 1.0,
        "floor {floor} is infeasible for {num_states} states"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let free_mass = 1.0 - num_states as f64 * floor;
    let mut transition = Vec::with_capacity(num_states * num_actions * num_states);
    for _ in 0..num_states * num_actions {
        let raw: Vec<f64> = (0..num_states).map(|_| rng.random::<f64>() + 1e-9).collect();
        let total: f64 = raw.iter().sum();
        // Mix toward the floor so every entry is ≥ floor and the row still
        // sums to 1 up to rounding; renormalize to kill the rounding.
        let mut row: Vec<f64> = raw.iter().map(|w| floor + free_mass * w / total).collect();
        let row_sum: f64 = row.iter().sum();
        for p in &mut row {
            *p /= row_sum;
        }
        transition.extend_from_slice(&row);
    }
    let reward: Vec<f64> = (0..num_states * num_actions).map(|_| rng.random::<f64>()).collect();
    let start = vec![1.0 / num_states as f64; num_states];
    TabularMdp::new(num_states, num_actions, transition, reward, start)
        .expect("generated tables satisfy the stochastic invariants")
}
