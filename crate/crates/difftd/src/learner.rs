//! n-step differential TD learning, on- and off-policy.
//!
//! Two interchangeable recursions are provided:
//!
//! * [`DifferentialTd`] keeps the full pair (v, J) and updates
//!   `δ = R_{t+1:t+n} − n·J + v(S_{t+n}) − v(S_t)`,
//!   `J ← J + (η/n)·α·ρ·δ`, `v(S_t) ← v(S_t) + α·ρ·δ`.
//! * [`CompactDifferentialTd`] eliminates J and keeps only v and the
//!   running sum Σ = Σ_s v(s), updating with `δ = R − η·Σ + …`.
//!
//! Under zero initialization the two produce the same value sequence; the
//! equivalence is exercised as a test oracle rather than shared code.
//!
//! No update is applied before the first full n-step segment has been
//! observed; after that there is one update per environment step, on
//! overlapping n-step windows.

use std::collections::VecDeque;

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{exact_solve, induced_dynamics, Policy, TabularMdp};
use crate::metrics::{rmsve_tvr, WeightedNorm};

/// Step-size sequence α_t indexed by the update counter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearningRateSchedule {
    /// α_t = c1 for all t.
    Constant { c1: f64 },
    /// α_t = c1 / (t + c2)^beta with beta in (0.5, 1]; such schedules are
    /// square-summable-style diminishing rates suitable for stochastic
    /// approximation.
    Polynomial { c1: f64, c2: f64, beta: f64 },
}

impl LearningRateSchedule {
    pub fn constant(c1: f64) -> Result<Self> {
        if c1 <= 0.0 || !c1.is_finite() {
            return Err(Error::Config(format!("constant rate c1 = {c1} must be positive")));
        }
        Ok(Self::Constant { c1 })
    }

    pub fn polynomial(c1: f64, c2: f64, beta: f64) -> Result<Self> {
        if c1 <= 0.0 || !c1.is_finite() {
            return Err(Error::Config(format!("polynomial rate c1 = {c1} must be positive")));
        }
        if c2 < 0.0 || !c2.is_finite() {
            return Err(Error::Config(format!("polynomial rate c2 = {c2} must be nonnegative")));
        }
        if beta.is_nan() || beta <= 0.5 || beta > 1.0 {
            return Err(Error::Config(format!("polynomial rate beta = {beta} outside (0.5, 1]")));
        }
        Ok(Self::Polynomial { c1, c2, beta })
    }

    /// Validates an already-constructed schedule (after deserialization).
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Constant { c1 } => Self::constant(c1).map(|_| ()),
            Self::Polynomial { c1, c2, beta } => Self::polynomial(c1, c2, beta).map(|_| ()),
        }
    }

    /// The step size at update index `t` (starting from 0).
    pub fn rate(&self, t: u64) -> f64 {
        match *self {
            Self::Constant { c1 } => c1,
            Self::Polynomial { c1, c2, beta } => c1 / (t as f64 + c2).powf(beta),
        }
    }
}

/// Convenience free function mirroring [`LearningRateSchedule::rate`].
pub fn learning_rate(schedule: &LearningRateSchedule, t: u64) -> f64 {
    schedule.rate(t)
}

/// Static configuration of one learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    /// Bootstrap horizon n ≥ 1.
    pub n: usize,
    /// Multiplicative step-size constant η > 0 for the average-reward
    /// estimate.
    pub eta: f64,
    pub schedule: LearningRateSchedule,
    pub num_states: usize,
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("bootstrap horizon n must be ≥ 1".into()));
        }
        if self.eta <= 0.0 || !self.eta.is_finite() {
            return Err(Error::Config(format!("eta = {} must be positive", self.eta)));
        }
        if self.num_states == 0 {
            return Err(Error::Config("num_states must be positive".into()));
        }
        self.schedule.validate()
    }
}

/// One sampled environment transition together with its importance ratio
/// ρ = π(a|s)/μ(a|s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy)]
struct WindowEntry {
    state: usize,
    reward: f64,
    rho: f64,
}

/// Fixed-capacity queue of the most recent transitions plus the latest
/// observed state; shared bookkeeping for both learner forms.
#[derive(Debug, Clone)]
struct NStepWindow {
    n: usize,
    entries: VecDeque<WindowEntry>,
    latest_state: Option<usize>,
}

/// A full n-step segment ready for one update.
struct Segment {
    start_state: usize,
    end_state: usize,
    reward_sum: f64,
    rho_product: f64,
}

impl NStepWindow {
    fn new(n: usize) -> Self {
        Self { n, entries: VecDeque::with_capacity(n), latest_state: None }
    }

    /// Validates and absorbs one transition; returns the full segment once
    /// n contiguous transitions are buffered. The oldest entry is retired
    /// after its segment is emitted, so consecutive segments overlap by
    /// n − 1 transitions.
    fn push(&mut self, tr: &Transition, num_states: usize) -> Result<Option<Segment>> {
        if tr.state >= num_states || tr.next_state >= num_states {
            return Err(Error::Shape(format!(
                "transition touches state {} / {}, but the value table has {num_states} states",
                tr.state, tr.next_state
            )));
        }
        if !tr.reward.is_finite() {
            return Err(Error::Input(format!("non-finite reward {}", tr.reward)));
        }
        if !tr.rho.is_finite() || tr.rho < 0.0 {
            return Err(Error::Input(format!("importance ratio {} must be finite and ≥ 0", tr.rho)));
        }
        if let Some(expected) = self.latest_state {
            if tr.state != expected {
                return Err(Error::Input(format!(
                    "discontinuous trajectory: expected a transition from state {expected}, got {}",
                    tr.state
                )));
            }
        }
        self.entries.push_back(WindowEntry { state: tr.state, reward: tr.reward, rho: tr.rho });
        self.latest_state = Some(tr.next_state);
        if self.entries.len() < self.n {
            return Ok(None);
        }
        // Chronological (front-to-back) accumulation keeps the summation
        // order fixed for reproducibility.
        let mut reward_sum = 0.0;
        let mut rho_product = 1.0;
        for entry in &self.entries {
            reward_sum += entry.reward;
            rho_product *= entry.rho;
        }
        let segment = Segment {
            start_state: self.entries.front().expect("window is full").state,
            end_state: tr.next_state,
            reward_sum,
            rho_product,
        };
        self.entries.pop_front();
        Ok(Some(segment))
    }
}

/// Outcome of feeding one transition to a learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Index of the single value-table entry that changed, when a full
    /// n-step segment was available.
    pub updated_state: Option<usize>,
}

/// The full (v, J) recursion.
#[derive(Debug, Clone)]
pub struct DifferentialTd {
    config: LearnerConfig,
    v: DVector<f64>,
    j: f64,
    env_steps: u64,
    updates: u64,
    window: NStepWindow,
}

impl DifferentialTd {
    /// Zero-initialized learner (v = 0, J = 0).
    pub fn new(config: LearnerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            v: DVector::zeros(config.num_states),
            j: 0.0,
            env_steps: 0,
            updates: 0,
            window: NStepWindow::new(config.n),
            config,
        })
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    /// Current average-reward estimate J.
    pub fn j(&self) -> f64 {
        self.j
    }

    /// Environment steps consumed so far.
    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    /// Updates applied so far (the stochastic-approximation clock).
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn step(&mut self, tr: &Transition) -> Result<StepOutcome> {
        let segment = self.window.push(tr, self.config.num_states)?;
        self.env_steps += 1;
        let Some(seg) = segment else {
            return Ok(StepOutcome { updated_state: None });
        };
        let n = self.config.n as f64;
        let alpha = self.config.schedule.rate(self.updates);
        let delta =
            seg.reward_sum - n * self.j + self.v[seg.end_state] - self.v[seg.start_state];
        let amount = alpha * seg.rho_product * delta;
        self.j += (self.config.eta / n) * amount;
        self.v[seg.start_state] += amount;
        self.updates += 1;
        Ok(StepOutcome { updated_state: Some(seg.start_state) })
    }
}

/// The J-eliminated recursion: only v and the running sum Σ = Σ_s v(s) are
/// kept; Σ is maintained incrementally because each update changes exactly
/// one entry of v.
#[derive(Debug, Clone)]
pub struct CompactDifferentialTd {
    config: LearnerConfig,
    v: DVector<f64>,
    sigma: f64,
    env_steps: u64,
    updates: u64,
    window: NStepWindow,
}

impl CompactDifferentialTd {
    /// Zero-initialized learner; the compact form assumes v and J start at
    /// zero.
    pub fn new(config: LearnerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            v: DVector::zeros(config.num_states),
            sigma: 0.0,
            env_steps: 0,
            updates: 0,
            window: NStepWindow::new(config.n),
            config,
        })
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    /// The maintained running sum Σ_s v(s).
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// The average-reward estimate reconstructed from Σ: J = (η/n)·Σ.
    pub fn reconstructed_j(&self) -> f64 {
        (self.config.eta / self.config.n as f64) * self.sigma
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn step(&mut self, tr: &Transition) -> Result<StepOutcome> {
        let segment = self.window.push(tr, self.config.num_states)?;
        self.env_steps += 1;
        let Some(seg) = segment else {
            return Ok(StepOutcome { updated_state: None });
        };
        let alpha = self.config.schedule.rate(self.updates);
        let delta = seg.reward_sum - self.config.eta * self.sigma + self.v[seg.end_state]
            - self.v[seg.start_state];
        let amount = alpha * seg.rho_product * delta;
        self.v[seg.start_state] += amount;
        self.sigma += amount;
        self.updates += 1;
        Ok(StepOutcome { updated_state: Some(seg.start_state) })
    }
}

/// One probe of a learning run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample {
    pub step: u64,
    pub rmsve_tvr: f64,
    pub j_estimate: f64,
}

/// Time-indexed metric samples for one seeded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub samples: Vec<ProbeSample>,
}

impl RunRecord {
    /// Writes the record as CSV rows `seed, step, rmsve_tvr, J_estimate`
    /// (with header).
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "seed,step,rmsve_tvr,J_estimate")?;
        for s in &self.samples {
            writeln!(out, "{},{},{},{}", self.seed, s.step, s.rmsve_tvr, s.j_estimate)?;
        }
        Ok(())
    }
}

/// Draws an index from a finite distribution given one uniform sample.
fn sample_index<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Rounding pushed the cumulative sum below 1; fall back to the last
    // index with positive mass.
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("a probability row has positive mass")
}

/// Simulates `steps` environment steps under the behavior policy, feeding
/// the full-form learner, and probes RMSVE(TVR) against the exact centered
/// bias of the target policy every `probe_every` steps.
///
/// Fails before sampling anything if the behavior policy does not cover the
/// target or the target chain is not solvable.
pub fn run_trajectory(
    mdp: &TabularMdp,
    behavior: &Policy,
    target: &Policy,
    config: &LearnerConfig,
    steps: u64,
    seed: u64,
    probe_every: u64,
) -> Result<RunRecord> {
    config.validate()?;
    if config.num_states != mdp.num_states() {
        return Err(Error::Config(format!(
            "learner is sized for {} states, mdp has {}",
            config.num_states,
            mdp.num_states()
        )));
    }
    if probe_every == 0 {
        return Err(Error::Config("probe cadence must be ≥ 1".into()));
    }
    if !behavior.covers(target) {
        return Err(Error::Config(
            "behavior policy does not cover the target policy (coverage assumption violated)".into(),
        ));
    }
    let target_chain = induced_dynamics(mdp, target)?;
    let solution = exact_solve(&target_chain)?;
    let norm = WeightedNorm::new(solution.stationary.clone())?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut learner = DifferentialTd::new(*config)?;
    let mut state = sample_index(&mut rng, mdp.start());
    let mut samples = Vec::with_capacity((steps / probe_every) as usize);
    for t in 1..=steps {
        let action = sample_index(&mut rng, behavior.row(state));
        let next_state = sample_index(&mut rng, mdp.transition_row(state, action));
        let tr = Transition {
            state,
            action,
            reward: mdp.reward(state, action),
            next_state,
            rho: target.prob(state, action) / behavior.prob(state, action),
        };
        learner.step(&tr)?;
        if t % probe_every == 0 {
            samples.push(ProbeSample {
                step: t,
                rmsve_tvr: rmsve_tvr(learner.v(), &solution.bias, &norm)?,
                j_estimate: learner.j(),
            });
        }
        state = next_state;
    }
    Ok(RunRecord { seed, samples })
}

/// Monte-Carlo estimate of the expected update direction at a frozen value
/// vector: mean over a long behavior-policy trajectory of the per-step
/// update `H(v, Y)`, with batch-means standard errors (batching makes the
/// error bars honest under Markov autocorrelation).
#[derive(Debug, Clone)]
pub struct OperatorEstimate {
    pub mean: DVector<f64>,
    pub stderr: DVector<f64>,
    pub samples: u64,
}

/// Averages the sampled operator H(v, Y_{t+1}) over `samples` overlapping
/// n-step windows of one seeded trajectory, splitting the sample stream
/// into `num_batches` contiguous batches for the standard-error estimate.
pub fn monte_carlo_operator(
    mdp: &TabularMdp,
    behavior: &Policy,
    target: &Policy,
    v: &DVector<f64>,
    eta: f64,
    n: usize,
    samples: u64,
    num_batches: usize,
    seed: u64,
) -> Result<OperatorEstimate> {
    if n == 0 {
        return Err(Error::Domain("operator horizon n must be ≥ 1".into()));
    }
    if num_batches < 2 {
        return Err(Error::Config("need at least 2 batches for a standard error".into()));
    }
    if v.len() != mdp.num_states() {
        return Err(Error::Shape("value vector length does not match the MDP".into()));
    }
    if !behavior.covers(target) {
        return Err(Error::Config("behavior policy does not cover the target policy".into()));
    }
    let num_states = mdp.num_states();
    let sum_v: f64 = v.sum();
    let batch_len = (samples as usize).div_ceil(num_batches);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = sample_index(&mut rng, mdp.start());
    let mut window: VecDeque<(usize, f64, f64)> = VecDeque::with_capacity(n);
    let mut batch_means: Vec<DVector<f64>> = Vec::with_capacity(num_batches);
    let mut batch_sum = DVector::zeros(num_states);
    let mut in_batch = 0usize;
    let mut collected = 0u64;
    while collected < samples {
        let action = sample_index(&mut rng, behavior.row(state));
        let next_state = sample_index(&mut rng, mdp.transition_row(state, action));
        let rho = target.prob(state, action) / behavior.prob(state, action);
        window.push_back((state, mdp.reward(state, action), rho));
        if window.len() == n {
            let mut reward_sum = 0.0;
            let mut rho_product = 1.0;
            for &(_, reward, r) in &window {
                reward_sum += reward;
                rho_product *= r;
            }
            let s0 = window.front().expect("window is full").0;
            batch_sum[s0] += rho_product * (reward_sum - eta * sum_v + v[next_state] - v[s0]);
            window.pop_front();
            collected += 1;
            in_batch += 1;
            if in_batch == batch_len || collected == samples {
                batch_means.push(&batch_sum / in_batch as f64);
                batch_sum.fill(0.0);
                in_batch = 0;
            }
        }
        state = next_state;
    }

    let b = batch_means.len() as f64;
    let mut mean = DVector::zeros(num_states);
    for bm in &batch_means {
        mean += bm;
    }
    mean /= b;
    let mut var = DVector::zeros(num_states);
    for bm in &batch_means {
        let dev = bm - &mean;
        var += dev.component_mul(&dev);
    }
    let stderr = (var / (b - 1.0) / b).map(f64::sqrt);
    Ok(OperatorEstimate { mean, stderr, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{random_ergodic_mdp, uniform_random_policy};

    fn config(n: usize, eta: f64, num_states: usize) -> LearnerConfig {
        LearnerConfig {
            n,
            eta,
            schedule: LearningRateSchedule::constant(0.1).unwrap(),
            num_states,
        }
    }

    #[test]
    fn schedule_values() {
        let c = LearningRateSchedule::constant(0.01).unwrap();
        assert_eq!(c.rate(0), 0.01);
        assert_eq!(c.rate(123_456), 0.01);
        let p = LearningRateSchedule::polynomial(1.0, 100.0, 0.6).unwrap();
        assert!((p.rate(0) - 100.0_f64.powf(-0.6)).abs() < 1e-12);
        assert!((p.rate(0) - 0.06309573444801933).abs() < 1e-12);
    }

    #[test]
    fn schedule_is_nonincreasing() {
        let p = LearningRateSchedule::polynomial(2.0, 3.0, 0.51).unwrap();
        let mut t = 0u64;
        while t < 1_000_000 {
            assert!(p.rate(t) >= p.rate(t + 1));
            t = t * 7 + 1;
        }
    }

    #[test]
    fn schedule_rejects_bad_beta() {
        assert!(LearningRateSchedule::polynomial(1.0, 1.0, 0.5).is_err());
        assert!(LearningRateSchedule::polynomial(1.0, 1.0, 1.01).is_err());
        assert!(LearningRateSchedule::constant(0.0).is_err());
    }

    #[test]
    fn one_step_update_by_hand() {
        // Zero init, on-policy, n = 1, η = 1, α = 0.1, reward 1:
        // δ = 1, v(s0) = 0.1, J = 0.1.
        let mut learner = DifferentialTd::new(config(1, 1.0, 2)).unwrap();
        let tr = Transition { state: 0, action: 0, reward: 1.0, next_state: 1, rho: 1.0 };
        let outcome = learner.step(&tr).unwrap();
        assert_eq!(outcome.updated_state, Some(0));
        assert!((learner.v()[0] - 0.1).abs() < 1e-15);
        assert_eq!(learner.v()[1], 0.0);
        assert!((learner.j() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn no_update_before_first_full_window() {
        let mut learner = DifferentialTd::new(config(2, 1.0, 3)).unwrap();
        let outcome = learner
            .step(&Transition { state: 0, action: 0, reward: 5.0, next_state: 1, rho: 1.0 })
            .unwrap();
        assert_eq!(outcome.updated_state, None);
        assert_eq!(learner.v().abs().max(), 0.0);
        assert_eq!(learner.j(), 0.0);
        assert_eq!(learner.env_steps(), 1);
        let outcome = learner
            .step(&Transition { state: 1, action: 0, reward: 1.0, next_state: 2, rho: 1.0 })
            .unwrap();
        assert_eq!(outcome.updated_state, Some(0));
    }

    #[test]
    fn zero_rho_freezes_values_but_advances_counters() {
        let mut learner = DifferentialTd::new(config(1, 1.0, 2)).unwrap();
        learner
            .step(&Transition { state: 0, action: 0, reward: 3.0, next_state: 1, rho: 0.0 })
            .unwrap();
        assert_eq!(learner.v().abs().max(), 0.0);
        assert_eq!(learner.j(), 0.0);
        assert_eq!(learner.updates(), 1);
    }

    #[test]
    fn rejects_malformed_transitions() {
        let mut learner = DifferentialTd::new(config(1, 1.0, 2)).unwrap();
        let bad_state = Transition { state: 5, action: 0, reward: 0.0, next_state: 0, rho: 1.0 };
        assert!(matches!(learner.step(&bad_state), Err(Error::Shape(_))));
        let bad_rho = Transition { state: 0, action: 0, reward: 0.0, next_state: 1, rho: f64::NAN };
        assert!(matches!(learner.step(&bad_rho), Err(Error::Input(_))));
        let bad_reward =
            Transition { state: 0, action: 0, reward: f64::INFINITY, next_state: 1, rho: 1.0 };
        assert!(matches!(learner.step(&bad_reward), Err(Error::Input(_))));
    }

    #[test]
    fn rejects_discontinuous_stream() {
        let mut learner = DifferentialTd::new(config(2, 1.0, 3)).unwrap();
        learner
            .step(&Transition { state: 0, action: 0, reward: 0.0, next_state: 1, rho: 1.0 })
            .unwrap();
        let skip = Transition { state: 2, action: 0, reward: 0.0, next_state: 0, rho: 1.0 };
        assert!(matches!(learner.step(&skip), Err(Error::Input(_))));
    }

    #[test]
    fn zero_rewards_keep_v_at_zero() {
        let mdp = random_ergodic_mdp(3, 2, 5);
        let policy = uniform_random_policy(&mdp);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut compact = CompactDifferentialTd::new(config(2, 0.5, 3)).unwrap();
        let mut state = 0usize;
        for _ in 0..500 {
            let action = sample_index(&mut rng, policy.row(state));
            let next_state = sample_index(&mut rng, mdp.transition_row(state, action));
            compact
                .step(&Transition { state, action, reward: 0.0, next_state, rho: 1.0 })
                .unwrap();
            state = next_state;
        }
        assert_eq!(compact.v().abs().max(), 0.0);
        assert_eq!(compact.sigma(), 0.0);
    }

    /// Runs both learner forms over the same transition stream.
    fn run_both(
        n: usize,
        eta: f64,
        steps: usize,
        seed: u64,
    ) -> (DifferentialTd, CompactDifferentialTd) {
        let mdp = random_ergodic_mdp(4, 2, seed);
        let policy = uniform_random_policy(&mdp);
        let cfg = config(n, eta, 4);
        let mut full = DifferentialTd::new(cfg).unwrap();
        let mut compact = CompactDifferentialTd::new(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD1F5);
        let mut state = sample_index(&mut rng, mdp.start());
        for _ in 0..steps {
            let action = sample_index(&mut rng, policy.row(state));
            let next_state = sample_index(&mut rng, mdp.transition_row(state, action));
            let tr = Transition {
                state,
                action,
                reward: mdp.reward(state, action),
                next_state,
                rho: 1.0,
            };
            full.step(&tr).unwrap();
            compact.step(&tr).unwrap();
            state = next_state;
        }
        (full, compact)
    }

    #[test]
    fn full_and_compact_agree_bitwise_for_pow2_ratios() {
        // With η and η/n both powers of two every scaling in the two
        // recursions is exact, so the value sequences match bit for bit.
        for &(n, eta) in &[(1usize, 1.0), (2, 1.0), (4, 2.0)] {
            let (full, compact) = run_both(n, eta, 10_000, 42);
            assert_eq!(full.v(), compact.v(), "divergence at n={n}, eta={eta}");
        }
    }

    #[test]
    fn j_elimination_identity() {
        // J = (η/n)·Σ_s v(s) under zero initialization, up to rounding.
        let (full, compact) = run_both(3, 0.7, 5_000, 7);
        let v_gap = (full.v() - compact.v()).abs().max();
        assert!(v_gap < 1e-10, "value gap {v_gap}");
        let sum_v: f64 = full.v().sum();
        let expected_j = (0.7 / 3.0) * sum_v;
        assert!((full.j() - expected_j).abs() < 1e-12, "J identity violated");
        assert!((full.j() - compact.reconstructed_j()).abs() < 1e-12);
    }

    #[test]
    fn each_update_touches_exactly_one_entry() {
        let mdp = random_ergodic_mdp(5, 2, 77);
        let policy = uniform_random_policy(&mdp);
        let mut learner = DifferentialTd::new(config(3, 0.8, 5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut state = 0usize;
        for _ in 0..200 {
            let action = sample_index(&mut rng, policy.row(state));
            let next_state = sample_index(&mut rng, mdp.transition_row(state, action));
            let before = learner.v().clone();
            let outcome = learner
                .step(&Transition {
                    state,
                    action,
                    reward: mdp.reward(state, action),
                    next_state,
                    rho: 1.0,
                })
                .unwrap();
            let changed: Vec<usize> = (0..5).filter(|&i| learner.v()[i] != before[i]).collect();
            match outcome.updated_state {
                Some(s) => assert!(changed.is_empty() || changed == vec![s]),
                None => assert!(changed.is_empty()),
            }
            state = next_state;
        }
    }

    #[test]
    fn run_trajectory_is_deterministic_and_on_policy_rho_is_one() {
        let mdp = random_ergodic_mdp(3, 2, 21);
        let policy = uniform_random_policy(&mdp);
        let cfg = LearnerConfig {
            n: 1,
            eta: 1.0,
            schedule: LearningRateSchedule::constant(0.05).unwrap(),
            num_states: 3,
        };
        let a = run_trajectory(&mdp, &policy, &policy, &cfg, 2_000, 9, 100).unwrap();
        let b = run_trajectory(&mdp, &policy, &policy, &cfg, 2_000, 9, 100).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples.len(), 20);
    }

    #[test]
    fn run_trajectory_rejects_coverage_violation() {
        let mdp = random_ergodic_mdp(3, 2, 2);
        let target = uniform_random_policy(&mdp);
        let behavior = Policy::new(3, 2, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let cfg = config(1, 1.0, 3);
        assert!(matches!(
            run_trajectory(&mdp, &behavior, &target, &cfg, 10, 0, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn run_record_csv_shape() {
        let record = RunRecord {
            seed: 3,
            samples: vec![ProbeSample { step: 100, rmsve_tvr: 0.5, j_estimate: 0.25 }],
        };
        let mut buf = Vec::new();
        record.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "seed,step,rmsve_tvr,J_estimate\n3,100,0.5,0.25\n");
    }
}
