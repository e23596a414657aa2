//! Exact horizon optimization: an LP core with branch-and-bound on the
//! no-simultaneity dichotomy, plus an independent dynamic-programming oracle
//! used for cross-validation.

mod dp;
mod lp;
mod milp;

pub use dp::solve_dp_oracle;
pub use lp::{LinearProgram, LpSolution, LpStatus};
pub use milp::{
    solve_lp_relaxation, solve_milp, write_lp_format, MilpProblem, MilpSolution, MilpStatus,
};
