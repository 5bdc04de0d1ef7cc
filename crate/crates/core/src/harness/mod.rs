//! Experiment plumbing around the solvers: independent oracles for audits,
//! invariant and rate-envelope checkers, randomized property suites, CSV
//! emission, and the experiment-spec runner behind the CLI.

pub mod audit;
pub mod checks;
pub mod csv;
pub mod envelope;
pub mod expspec;
pub mod oracles;
pub mod runner;

/// Which of the three quasi-Newton variants produced a trajectory; audits and
/// envelope constants differ per variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricMethod {
    /// Cubic-regularized: additive correction, no restarts.
    Cubic,
    /// Gradient-regularized, multiplicative correction, trace-budget restarts.
    Grad,
    /// Gradient-regularized, additive correction, trace-budget restarts.
    GradReg,
}

impl MetricMethod {
    pub fn label(self) -> &'static str {
        match self {
            MetricMethod::Cubic => "cubic_sr1",
            MetricMethod::Grad => "grad_sr1",
            MetricMethod::GradReg => "grad_reg_sr1",
        }
    }
}
