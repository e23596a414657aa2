//! Dispatch simulation engine and controller suite for hybrid PV/battery/load
//! systems.
//!
//! The crate provides:
//! - battery state dynamics, grid import/export splitting and cost accounting
//!   ([`model`]),
//! - three scheduling policies: rule-based self-consumption maximization
//!   ([`scm`]), receding-horizon MPC over an exact MILP ([`mpc`], [`solver`])
//!   and a lightweight stochastic price-responsive controller ([`stochastic`]),
//! - a deterministic time-stepping simulation engine with optional external
//!   grid-service signal overrides and cost/runtime reporting ([`sim`]),
//! - a seedable synthetic scenario generator ([`scenario`]).
//!
//! All randomness flows through seedable ChaCha streams ([`rng`]), so every
//! simulation is reproducible bit-for-bit from its seed.

pub mod error;
pub mod model;
pub mod mpc;
pub mod parallel;
pub mod rng;
pub mod scenario;
pub mod scm;
pub mod sim;
pub mod solver;
pub mod stochastic;

pub use error::{ModelError, SimError, SolverError};
pub use model::{
    interval_cost, split_grid, step_battery, BatteryParams, BatteryState, CostLedger,
    DispatchAction, ScenarioSeries,
};
pub use mpc::{mpc_decide, MpcConfig};
pub use scenario::{generate_synthetic, SyntheticSpec};
pub use scm::{scm_decide, ScmConfig};
pub use sim::{
    run_comparison, run_seed_batch, run_simulation, Comparison, ComparisonRow, Controller,
    ControllerSpec, ExternalSignalConfig, IdleController, MpcController, ScmController,
    SimulationReport, StochasticController, TrajectoryRow,
};
pub use solver::{
    solve_dp_oracle, solve_milp, LinearProgram, LpSolution, LpStatus, MilpProblem, MilpSolution,
    MilpStatus,
};
pub use stochastic::{
    modify_buy_prices, normalize_prices, srr_charge, srr_discharge, stochastic_decide,
    NormalizedPrices, SrrConfig,
};
