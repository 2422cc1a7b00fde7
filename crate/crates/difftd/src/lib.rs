//! Tabular average-reward reinforcement-learning laboratory.
//!
//! The crate bundles five pieces that check each other:
//!
//! * [`mdp`] — exact tabular machinery: induced chains, stationary
//!   distributions, gain/bias solutions of Poisson's equation, n-step
//!   kernels, and a lossless JSON file format.
//! * [`mod@env`] — a continuing gridworld, policy constructors, and a random
//!   ergodic MDP generator for property tests.
//! * [`learner`] — on- and off-policy n-step differential TD in both the
//!   full (v, J) form and the J-eliminated compact form, plus seeded
//!   trajectory simulation.
//! * [`stability`] — the spectral analyzer: rank-one perturbation
//!   conditions, the η₀ bound, the doubly-stochastic Lyapunov certificate,
//!   and deterministic fixed points of the mean dynamics.
//! * [`metrics`] — RMSVE(TVR), the offset-minimized weighted value error.
//!
//! All types are plain data and every operation is a pure function or a
//! single-owner mutation, so independent instances can be processed from
//! concurrent workers without coordination.

pub mod env;
pub mod error;
pub mod learner;
pub mod mdp;
pub mod metrics;
pub mod stability;

pub use error::{Error, Result};
