//! Deterministic time-stepping simulation engine.
//!
//! Each interval the engine either forwards the decision to the controller
//! or, with the configured probability, overrides it with an external
//! grid-service signal (a maximal feasible charge or discharge request).
//! Battery state, per-interval cost and controller decision time are
//! recorded; conservation and cap audits run on every interval and fail the
//! run rather than clamp.
//!
//! Determinism: the signal draws and the stochastic controller's draws come
//! from separate ChaCha streams of the same master seed (see [`crate::rng`]),
//! so replaying a `(scenario, controller config, signal config, seed)` tuple
//! reproduces the trajectory bit-for-bit, and changing the signal
//! probability never perturbs the controller's own draws. The two signal
//! draws happen every interval whether or not they fire, which nests the
//! override patterns of increasing probabilities for common-random-number
//! sweeps.

use std::time::Instant;

use crate::error::SimError;
use crate::model::{
    interval_cost, BatteryParams, BatteryState, CostLedger, DispatchAction, ScenarioSeries,
};
use crate::mpc::{mpc_decide, MpcConfig};
use crate::parallel::map_batch;
use crate::rng::{controller_rng, signal_rng, uniform_unit, StreamRng};
use crate::scm::{scm_decide, ScmConfig};
use crate::stochastic::{
    charge_power_cap, discharge_power_cap, stochastic_decide, NormalizedPrices, SrrConfig,
};

/// External grid-service signal model: per-interval probability of an
/// override and the chance it requests charging rather than discharging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalSignalConfig {
    pub probability: f64,
    pub direction_split: f64,
}

impl Default for ExternalSignalConfig {
    fn default() -> Self {
        Self {
            probability: 0.0,
            direction_split: 0.5,
        }
    }
}

impl ExternalSignalConfig {
    pub fn new(probability: f64, direction_split: f64) -> Result<Self, crate::error::ModelError> {
        for (name, v) in [("probability", probability), ("direction_split", direction_split)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(crate::error::ModelError::InvalidParams(format!(
                    "{name} must be in [0, 1], got {v}"
                )));
            }
        }
        Ok(Self {
            probability,
            direction_split,
        })
    }
}

/// A decision policy driven by the simulation engine.
pub trait Controller: Send {
    /// Short identifier used in reports ("scm", "mpc", ...).
    fn name(&self) -> &'static str;

    /// Decision for interval `t` given the realized battery state.
    fn decide(
        &mut self,
        t: usize,
        scenario: &ScenarioSeries,
        state: &BatteryState,
        params: &BatteryParams,
    ) -> Result<DispatchAction, SimError>;
}

/// Battery-less baseline: the grid covers everything.
pub struct IdleController;

impl Controller for IdleController {
    fn name(&self) -> &'static str {
        "idle"
    }

    fn decide(
        &mut self,
        t: usize,
        scenario: &ScenarioSeries,
        _state: &BatteryState,
        _params: &BatteryParams,
    ) -> Result<DispatchAction, SimError> {
        Ok(DispatchAction::idle(scenario.load_kw[t], scenario.pv_kw[t]))
    }
}

/// Rule-based self-consumption maximization.
pub struct ScmController {
    pub cfg: ScmConfig,
}

impl Controller for ScmController {
    fn name(&self) -> &'static str {
        "scm"
    }

    fn decide(
        &mut self,
        t: usize,
        scenario: &ScenarioSeries,
        state: &BatteryState,
        params: &BatteryParams,
    ) -> Result<DispatchAction, SimError> {
        Ok(scm_decide(
            scenario.load_kw[t],
            scenario.pv_kw[t],
            state,
            params,
            &self.cfg,
            scenario.dt_hours,
        ))
    }
}

/// Receding-horizon MPC.
pub struct MpcController {
    pub cfg: MpcConfig,
}

impl Controller for MpcController {
    fn name(&self) -> &'static str {
        "mpc"
    }

    fn decide(
        &mut self,
        t: usize,
        scenario: &ScenarioSeries,
        state: &BatteryState,
        params: &BatteryParams,
    ) -> Result<DispatchAction, SimError> {
        Ok(mpc_decide(t, scenario, state, params, &self.cfg)?)
    }
}

/// The stochastic price-responsive controller. Prices are normalized once at
/// construction; decision draws come from the controller stream of the seed.
pub struct StochasticController {
    cfg: SrrConfig,
    norm: NormalizedPrices,
    rng: StreamRng,
}

impl StochasticController {
    pub fn new(scenario: &ScenarioSeries, cfg: SrrConfig, seed: u64) -> Self {
        Self {
            cfg,
            norm: NormalizedPrices::from_series(
                &scenario.price_buy,
                &scenario.price_sell,
                &scenario.load_kw,
                &scenario.pv_kw,
            ),
            rng: controller_rng(seed),
        }
    }
}

impl Controller for StochasticController {
    fn name(&self) -> &'static str {
        "stochastic"
    }

    fn decide(
        &mut self,
        t: usize,
        scenario: &ScenarioSeries,
        state: &BatteryState,
        params: &BatteryParams,
    ) -> Result<DispatchAction, SimError> {
        Ok(stochastic_decide(
            t,
            &self.norm,
            scenario.load_kw[t],
            scenario.pv_kw[t],
            state,
            params,
            &self.cfg,
            scenario.dt_hours,
            &mut self.rng,
        ))
    }
}

/// Buildable controller description, used by comparison runs and the CLI.
#[derive(Debug, Clone, PartialEq)]
pub enum ControllerSpec {
    Idle,
    Scm(ScmConfig),
    Mpc(MpcConfig),
    Stochastic(SrrConfig),
}

impl ControllerSpec {
    /// Instantiates the controller for one simulation run.
    pub fn build(&self, scenario: &ScenarioSeries, seed: u64) -> Box<dyn Controller> {
        match self {
            Self::Idle => Box::new(IdleController),
            Self::Scm(cfg) => Box::new(ScmController { cfg: *cfg }),
            Self::Mpc(cfg) => Box::new(MpcController { cfg: *cfg }),
            Self::Stochastic(cfg) => Box::new(StochasticController::new(scenario, *cfg, seed)),
        }
    }

    /// Short method id for report rows.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Idle => "idle",
            Self::Scm(_) => "scm",
            Self::Mpc(_) => "mpc",
            Self::Stochastic(_) => "stochastic",
        }
    }

    /// Method id with its tuning parameters, for human-readable tables.
    pub fn describe(&self) -> String {
        match self {
            Self::Idle => "idle".to_string(),
            Self::Scm(c) => format!("scm(deadband={})", c.deadband_kw),
            Self::Mpc(c) => format!("mpc(horizon={})", c.horizon),
            Self::Stochastic(c) => {
                format!("stochastic(k_ch={}, k_dc={})", c.k_charge, c.k_discharge)
            }
        }
    }
}

/// One recorded interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub interval: usize,
    pub action: DispatchAction,
    /// Stored energy at the end of the interval.
    pub energy_kwh: f64,
    pub interval_cost: f64,
    pub overridden: bool,
}

/// Full record of one simulation run.
#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub method: String,
    pub seed: u64,
    pub initial_energy_kwh: f64,
    pub trajectory: Vec<TrajectoryRow>,
    pub total_cost: f64,
    /// Wall-clock time spent inside controller decisions only.
    pub controller_runtime_seconds: f64,
    pub intervals_overridden: usize,
}

/// Runs one simulation over the whole scenario.
///
/// `seed` feeds the signal stream; the controller carries its own stream.
/// Decision timing wraps only the controller call, excluding signal handling
/// and bookkeeping.
pub fn run_simulation(
    scenario: &ScenarioSeries,
    controller: &mut dyn Controller,
    params: &BatteryParams,
    signals: &ExternalSignalConfig,
    seed: u64,
) -> Result<SimulationReport, SimError> {
    let mut sig_rng = signal_rng(seed);
    let mut state = params.initial_state();
    let mut ledger = CostLedger::new();
    let mut trajectory = Vec::with_capacity(scenario.len());
    let mut runtime = 0.0f64;
    let mut overridden_count = 0usize;
    let dt = scenario.dt_hours;

    for t in 0..scenario.len() {
        let load = scenario.load_kw[t];
        let pv = scenario.pv_kw[t];

        // Both draws are consumed every interval, so override patterns nest
        // across increasing probabilities under a common seed.
        let u_fire = uniform_unit(&mut sig_rng);
        let u_dir = uniform_unit(&mut sig_rng);

        let (action, overridden) = if u_fire < signals.probability {
            let a = if u_dir < signals.direction_split {
                DispatchAction::charge(charge_power_cap(load, pv, &state, params, dt), load, pv)
            } else {
                DispatchAction::discharge(
                    discharge_power_cap(load, pv, &state, params, dt),
                    load,
                    pv,
                )
            };
            (a, true)
        } else {
            let started = Instant::now();
            let a = controller.decide(t, scenario, &state, params)?;
            runtime += started.elapsed().as_secs_f64();
            (a, false)
        };

        audit(t, &action, load, pv, params)?;
        if overridden {
            overridden_count += 1;
        }
        let cost = interval_cost(&action, scenario.price_buy[t], scenario.price_sell[t], dt);
        state = crate::model::step_battery(state, &action, params, dt)?;
        ledger.push(cost);
        trajectory.push(TrajectoryRow {
            interval: t,
            action,
            energy_kwh: state.energy_kwh,
            interval_cost: cost,
            overridden,
        });
    }

    Ok(SimulationReport {
        method: controller.name().to_string(),
        seed,
        initial_energy_kwh: params.initial_energy_kwh(),
        trajectory,
        total_cost: ledger.total_cost,
        controller_runtime_seconds: runtime,
        intervals_overridden: overridden_count,
    })
}

/// Conservation and cap checks for one interval.
fn audit(
    t: usize,
    action: &DispatchAction,
    load: f64,
    pv: f64,
    params: &BatteryParams,
) -> Result<(), SimError> {
    action
        .validate(load, pv)
        .map_err(|e| SimError::Audit {
            t,
            detail: e.to_string(),
        })?;
    if action.charge_kw > params.charge_rate_kw + 1e-9 {
        return Err(SimError::Audit {
            t,
            detail: format!("charge {} kW above rate cap", action.charge_kw),
        });
    }
    if action.discharge_kw > params.discharge_rate_kw + 1e-9 {
        return Err(SimError::Audit {
            t,
            detail: format!("discharge {} kW above rate cap", action.discharge_kw),
        });
    }
    Ok(())
}

/// Runs one controller spec over many seeds, optionally in parallel. Result
/// order matches the seed order regardless of scheduling.
pub fn run_seed_batch(
    scenario: &ScenarioSeries,
    spec: &ControllerSpec,
    params: &BatteryParams,
    signals: &ExternalSignalConfig,
    seeds: &[u64],
    parallel: bool,
) -> Result<Vec<SimulationReport>, SimError> {
    let jobs: Vec<u64> = seeds.to_vec();
    let results = map_batch(jobs, parallel, |seed| {
        let mut controller = spec.build(scenario, seed);
        run_simulation(scenario, controller.as_mut(), params, signals, seed)
    });
    results.into_iter().collect()
}

/// Aggregate of one method over the comparison seeds.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub method: String,
    pub describe: String,
    pub mean_cost: f64,
    pub per_seed_costs: Vec<f64>,
    pub mean_runtime_seconds: f64,
    pub per_seed_runtime_seconds: Vec<f64>,
    pub mean_intervals_overridden: f64,
}

/// Pairwise relative cost difference `100 * (a - b) / b`.
#[derive(Debug, Clone)]
pub struct PctDifference {
    pub method_a: String,
    pub method_b: String,
    pub pct: f64,
}

/// Comparison table across methods.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub pct_differences: Vec<PctDifference>,
    /// Trajectories of every run, row-major by (spec, seed).
    pub reports: Vec<Vec<SimulationReport>>,
}

/// Percentage difference used in the comparison tables.
pub fn pct_difference(cost_a: f64, cost_b: f64) -> f64 {
    100.0 * (cost_a - cost_b) / cost_b
}

/// Runs every controller spec over every seed and aggregates. Deterministic
/// controllers still run once per seed because the signal stream differs by
/// seed; the stochastic method is averaged over the seeds.
pub fn run_comparison(
    scenario: &ScenarioSeries,
    specs: &[ControllerSpec],
    params: &BatteryParams,
    signals: &ExternalSignalConfig,
    seeds: &[u64],
) -> Result<Comparison, SimError> {
    assert!(!seeds.is_empty(), "need at least one seed");
    let mut rows = Vec::with_capacity(specs.len());
    let mut reports = Vec::with_capacity(specs.len());
    for spec in specs {
        let batch = run_seed_batch(scenario, spec, params, signals, seeds, true)?;
        let costs: Vec<f64> = batch.iter().map(|r| r.total_cost).collect();
        let runtimes: Vec<f64> = batch.iter().map(|r| r.controller_runtime_seconds).collect();
        let overridden: f64 = batch
            .iter()
            .map(|r| r.intervals_overridden as f64)
            .sum::<f64>()
            / batch.len() as f64;
        rows.push(ComparisonRow {
            method: spec.label().to_string(),
            describe: spec.describe(),
            mean_cost: mean(&costs),
            per_seed_costs: costs,
            mean_runtime_seconds: mean(&runtimes),
            per_seed_runtime_seconds: runtimes,
            mean_intervals_overridden: overridden,
        });
        reports.push(batch);
    }

    let mut pct_differences = Vec::new();
    for a in &rows {
        for b in &rows {
            if a.method != b.method && b.mean_cost != 0.0 {
                pct_differences.push(PctDifference {
                    method_a: a.method.clone(),
                    method_b: b.method.clone(),
                    pct: pct_difference(a.mean_cost, b.mean_cost),
                });
            }
        }
    }

    Ok(Comparison {
        rows,
        pct_differences,
        reports,
    })
}

/// Left-to-right arithmetic mean, matching the ledger's summation order.
pub fn mean(values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for v in values {
        acc += v;
    }
    acc / values.len() as f64
}
