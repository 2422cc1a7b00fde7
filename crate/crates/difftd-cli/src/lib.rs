//! Experiment harness for the difftd laboratory: configuration parsing,
//! seeded sweeps with deterministic aggregation, and plot emission. The
//! `difftd` binary in this crate exposes the whole thing on the command
//! line.

pub mod config;
pub mod experiment;
pub mod plot;
