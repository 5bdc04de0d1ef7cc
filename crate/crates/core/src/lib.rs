//! Proximal SR1 quasi-Newton solvers with cubic and gradient regularization.
//!
//! The crate provides three regularized SR1 methods for strongly convex
//! additive composite problems `F = f + g`, classical first- and second-order
//! baselines, the model subproblem solvers they rely on, objective oracles for
//! log-sum-exp and logistic regression, and a benchmark harness that runs
//! experiments, emits CSV trajectories, and audits the solvers' metric
//! invariants and convergence-rate envelopes.

pub mod harness;
pub mod matrix;
pub mod problems;
pub mod solver;
pub mod subproblem;

pub use matrix::{MetricState, SymMatrix};
pub use problems::{Dataset, ProxTerm, SmoothOracle};
pub use solver::{IterationRecord, SolverConfig, Termination, Trajectory};
