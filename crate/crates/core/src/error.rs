//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by domain types and battery dynamics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    /// A battery update left the allowed energy window by more than the
    /// bounds tolerance. This signals a buggy controller, never a condition
    /// to clamp away.
    #[error("battery energy {energy_kwh} kWh outside [{min_kwh}, {max_kwh}] kWh")]
    BoundsViolation {
        energy_kwh: f64,
        min_kwh: f64,
        max_kwh: f64,
    },

    #[error("invalid battery parameters: {0}")]
    InvalidParams(String),

    #[error("invalid scenario series: {0}")]
    InvalidScenario(String),

    #[error("invalid dispatch action: {0}")]
    InvalidAction(String),
}

/// Errors raised by the LP/MILP solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    /// Pivoting stalled or the solution failed its residual check.
    /// Callers treat this as fatal.
    #[error("numerical failure in LP solve: {0}")]
    NumericalFailure(String),

    /// The MILP instance has no feasible point. Idle is always feasible for
    /// well-formed problems, so this indicates an internal error.
    #[error("MILP instance is infeasible")]
    Infeasible,
}

/// Errors raised while running a simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Solver(#[from] SolverError),

    /// A per-interval conservation or cap audit failed.
    #[error("audit failure at interval {t}: {detail}")]
    Audit { t: usize, detail: String },
}
