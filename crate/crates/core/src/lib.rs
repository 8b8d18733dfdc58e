//! Measuring and predicting how fast evolutionary algorithms converge.
//!
//! The crate has two halves that cross-validate each other:
//!
//! * an **empirical** half — a small evolutionary-algorithm engine
//!   ([`ea_engine`]) producing seeded, reproducible best-fitness traces, and
//!   estimators ([`rate_estimators`]) that turn populations of traces into
//!   per-generation convergence-rate curves;
//! * an **analytic** half — absorbing Markov-chain machinery
//!   ([`chain_model`]) that computes the same quantities exactly for
//!   discrete searches: mean-fitness gap propagation, the asymptotic rate
//!   `1 - rho(Q)` from the spectral radius of the transient block, and
//!   expected hitting times from the fundamental matrix.
//!
//! [`onemax_chain`] builds the standard bit-counting benchmark in both a
//! lumped (n-state) and a full (2^n - 1 state) form, which is the workhorse
//! for checking the two halves against each other. [`objectives`] holds the
//! fitness functions shared by both.

pub mod chain_model;
pub mod ea_engine;
pub mod linalg;
pub mod objectives;
pub mod onemax_chain;
pub mod rate_estimators;
pub mod rng;

pub use chain_model::fmt_f64;
