//! Horizon MILP: electricity-cost minimization over grid exchange and
//! battery powers with no-simultaneity of charging and discharging.
//!
//! Per interval the decision variables are grid buy `B`, grid sell `S`,
//! charge `CH`, discharge `DC` and stored energy `E`, coupled by
//! - power balance `B - S + DC - CH = load - pv`,
//! - storage dynamics `E_t = E_{t-1} - dt * (DC/eff_dc - eff_ch * CH)`,
//! - rate caps and the energy window,
//! - `CH_t * DC_t = 0` (the integer part).
//!
//! The binary indicators of the textbook formulation are projected out: with
//! indicators relaxed to [0, 1], the constraint block `DC <= R_dc * X`,
//! `CH <= R_ch * Y`, `X + Y <= 1` is equivalent to the single row
//! `CH / R_ch + DC / R_dc <= 1`, and fixing an indicator corresponds to
//! zeroing the opposite power's upper bound. Branch-and-bound therefore
//! branches on the per-interval dichotomy {no charge, no discharge}, which
//! explores exactly the same tree with a smaller LP per node. The debug dump
//! ([`write_lp_format`]) still emits the explicit binary formulation.

use std::io::{self, Write};

use crate::error::{ModelError, SolverError};
use crate::model::{split_grid, BatteryParams, ScenarioSeries, BOUNDS_TOLERANCE_KWH};
use crate::solver::lp::{LinearProgram, LpSolution, LpStatus};

/// Complementarity threshold: a node solution counts as integral when the
/// smaller of (CH, DC) stays below this power, in kW. Kept near float noise
/// so that zeroing it out never moves the objective measurably.
const COMPLEMENTARITY_TOL_KW: f64 = 1e-8;
/// Nodes whose LP bound cannot beat the incumbent by more than this margin
/// are pruned.
const PRUNE_TOL: f64 = 1e-9;

/// One horizon optimization instance.
#[derive(Debug, Clone)]
pub struct MilpProblem {
    pub dt_hours: f64,
    pub initial_energy_kwh: f64,
    pub params: BatteryParams,
    pub load_kw: Vec<f64>,
    pub pv_kw: Vec<f64>,
    pub price_buy: Vec<f64>,
    pub price_sell: Vec<f64>,
}

impl MilpProblem {
    pub fn new(
        dt_hours: f64,
        initial_energy_kwh: f64,
        params: BatteryParams,
        load_kw: Vec<f64>,
        pv_kw: Vec<f64>,
        price_buy: Vec<f64>,
        price_sell: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let err = |msg: String| Err(ModelError::InvalidScenario(msg));
        let t = load_kw.len();
        if t == 0 {
            return err("horizon must contain at least one interval".to_string());
        }
        if pv_kw.len() != t || price_buy.len() != t || price_sell.len() != t {
            return err("window arrays must share one length".to_string());
        }
        if !(dt_hours > 0.0) {
            return err(format!("dt_hours must be > 0, got {dt_hours}"));
        }
        if initial_energy_kwh < params.e_min_kwh() - BOUNDS_TOLERANCE_KWH
            || initial_energy_kwh > params.e_max_kwh() + BOUNDS_TOLERANCE_KWH
        {
            return err(format!(
                "initial energy {initial_energy_kwh} kWh outside [{}, {}]",
                params.e_min_kwh(),
                params.e_max_kwh()
            ));
        }
        Ok(Self {
            dt_hours,
            initial_energy_kwh: initial_energy_kwh
                .clamp(params.e_min_kwh(), params.e_max_kwh()),
            params,
            load_kw,
            pv_kw,
            price_buy,
            price_sell,
        })
    }

    /// Window `[start, start + len)` of a scenario as one instance.
    pub fn from_scenario_window(
        scenario: &ScenarioSeries,
        start: usize,
        len: usize,
        initial_energy_kwh: f64,
        params: BatteryParams,
    ) -> Result<Self, ModelError> {
        let end = start + len;
        assert!(end <= scenario.len(), "window escapes the scenario");
        Self::new(
            scenario.dt_hours,
            initial_energy_kwh,
            params,
            scenario.load_kw[start..end].to_vec(),
            scenario.pv_kw[start..end].to_vec(),
            scenario.price_buy[start..end].to_vec(),
            scenario.price_sell[start..end].to_vec(),
        )
    }

    /// Number of intervals in the horizon.
    pub fn horizon(&self) -> usize {
        self.load_kw.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
}

/// Optimal horizon schedule.
#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub objective: f64,
    pub charge_kw: Vec<f64>,
    pub discharge_kw: Vec<f64>,
    pub grid_buy_kw: Vec<f64>,
    pub grid_sell_kw: Vec<f64>,
    /// Stored energy at the end of each interval.
    pub energy_kwh: Vec<f64>,
}

// Variable layout per interval: B, S, CH, DC, E.
const VARS_PER_T: usize = 5;
const B: usize = 0;
const S: usize = 1;
const CH: usize = 2;
const DC: usize = 3;
const E: usize = 4;

fn var(t: usize, which: usize) -> usize {
    t * VARS_PER_T + which
}

/// Continuous relaxation of the instance, indicators projected out.
fn build_lp(p: &MilpProblem) -> LinearProgram {
    let t_len = p.horizon();
    let mut lp = LinearProgram::new(t_len * VARS_PER_T);
    let params = &p.params;
    let dt = p.dt_hours;

    for t in 0..t_len {
        lp.set_objective(var(t, B), p.price_buy[t] * dt);
        lp.set_objective(var(t, S), -p.price_sell[t] * dt);
        lp.set_var_bounds(var(t, B), 0.0, f64::INFINITY);
        lp.set_var_bounds(var(t, S), 0.0, f64::INFINITY);
        lp.set_var_bounds(var(t, CH), 0.0, params.charge_rate_kw);
        lp.set_var_bounds(var(t, DC), 0.0, params.discharge_rate_kw);
        lp.set_var_bounds(var(t, E), params.e_min_kwh(), params.e_max_kwh());

        // Power balance: B - S + DC - CH = load - pv.
        let rhs = p.load_kw[t] - p.pv_kw[t];
        lp.add_row(
            &[
                (var(t, B), 1.0),
                (var(t, S), -1.0),
                (var(t, DC), 1.0),
                (var(t, CH), -1.0),
            ],
            rhs,
            rhs,
        );

        // Projected no-simultaneity coupling: CH/R_ch + DC/R_dc <= 1.
        lp.add_row(
            &[
                (var(t, CH), 1.0 / params.charge_rate_kw),
                (var(t, DC), 1.0 / params.discharge_rate_kw),
            ],
            f64::NEG_INFINITY,
            1.0,
        );

        // Dynamics: E_t - E_{t-1} + dt/eff_dc * DC - dt*eff_ch * CH = 0,
        // with E_{-1} the given initial energy.
        let mut coeffs = vec![
            (var(t, E), 1.0),
            (var(t, DC), dt / params.eff_discharge),
            (var(t, CH), -dt * params.eff_charge),
        ];
        let rhs = if t == 0 {
            p.initial_energy_kwh
        } else {
            coeffs.push((var(t - 1, E), -1.0));
            0.0
        };
        lp.add_row(&coeffs, rhs, rhs);
    }
    lp
}

/// Solves the pure LP relaxation (binaries relaxed onto [0, 1]).
pub fn solve_lp_relaxation(p: &MilpProblem) -> Result<LpSolution, SolverError> {
    build_lp(p).solve()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Free,
    NoCharge,
    NoDischarge,
}

/// Complementarity violation of interval `t`, scaled to the rate caps. This
/// is the fractionality of the implied binary pair: zero exactly when one of
/// the powers vanishes.
fn violation(x: &[f64], t: usize, params: &BatteryParams) -> f64 {
    (x[var(t, CH)] / params.charge_rate_kw).min(x[var(t, DC)] / params.discharge_rate_kw)
}

/// Exact branch-and-bound solve.
///
/// Fast path: when the root relaxation already satisfies `CH * DC = 0`
/// everywhere it is accepted as optimal. Otherwise the search branches on
/// the most fractional interval (depth-first, best-bound pruning), fixing
/// either the charge or the discharge power of that interval to zero.
pub fn solve_milp(p: &MilpProblem) -> Result<MilpSolution, SolverError> {
    let t_len = p.horizon();
    let base = build_lp(p);

    let mut incumbent: Option<(f64, LpSolution)> = None;
    let mut stack: Vec<Vec<Mode>> = vec![vec![Mode::Free; t_len]];

    while let Some(modes) = stack.pop() {
        let mut lp = base.clone();
        for (t, mode) in modes.iter().enumerate() {
            match mode {
                Mode::Free => {}
                Mode::NoCharge => lp.set_var_bounds(var(t, CH), 0.0, 0.0),
                Mode::NoDischarge => lp.set_var_bounds(var(t, DC), 0.0, 0.0),
            }
        }
        let sol = lp.solve()?;
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Err(SolverError::NumericalFailure(
                    "relaxation unbounded; prices must be finite".to_string(),
                ))
            }
            LpStatus::Optimal => {}
        }
        if let Some((best, _)) = &incumbent {
            if sol.objective >= best - PRUNE_TOL {
                continue;
            }
        }

        let (worst_t, worst) = (0..t_len)
            .map(|t| (t, violation(&sol.x, t, &p.params)))
            .fold((0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });

        if worst <= COMPLEMENTARITY_TOL_KW / p.params.charge_rate_kw.min(p.params.discharge_rate_kw)
        {
            if incumbent
                .as_ref()
                .map_or(true, |(best, _)| sol.objective < *best)
            {
                incumbent = Some((sol.objective, sol));
            }
            continue;
        }

        // Children: explore the branch that keeps the dominant power first
        // (pushed last onto the DFS stack).
        let mut keep_charge = modes.clone();
        keep_charge[worst_t] = Mode::NoDischarge;
        let mut keep_discharge = modes;
        keep_discharge[worst_t] = Mode::NoCharge;
        if sol.x[var(worst_t, CH)] >= sol.x[var(worst_t, DC)] {
            stack.push(keep_discharge);
            stack.push(keep_charge);
        } else {
            stack.push(keep_charge);
            stack.push(keep_discharge);
        }
    }

    let (_, sol) = incumbent.ok_or(SolverError::Infeasible)?;
    Ok(finish_solution(p, &sol))
}

/// Converts an accepted LP solution into a clean schedule: float-noise
/// complementarity residue is zeroed, the grid split and the energy
/// trajectory are recomputed from the battery powers, and the objective is
/// re-accumulated left-to-right from the cleaned schedule.
fn finish_solution(p: &MilpProblem, sol: &LpSolution) -> MilpSolution {
    let t_len = p.horizon();
    let params = &p.params;
    let mut charge = Vec::with_capacity(t_len);
    let mut discharge = Vec::with_capacity(t_len);
    let mut buy = Vec::with_capacity(t_len);
    let mut sell = Vec::with_capacity(t_len);
    let mut energy = Vec::with_capacity(t_len);
    let mut objective = 0.0;
    let mut e = p.initial_energy_kwh;

    for t in 0..t_len {
        let mut ch = sol.x[var(t, CH)];
        let mut dc = sol.x[var(t, DC)];
        if ch > 0.0 && dc > 0.0 {
            debug_assert!(ch.min(dc) <= 10.0 * COMPLEMENTARITY_TOL_KW);
            if ch <= dc {
                ch = 0.0;
            } else {
                dc = 0.0;
            }
        }
        let (b, s) = split_grid(p.load_kw[t], p.pv_kw[t], ch, dc);
        e -= p.dt_hours * (dc / params.eff_discharge - params.eff_charge * ch);
        e = e.clamp(params.e_min_kwh(), params.e_max_kwh());
        objective += (p.price_buy[t] * b - p.price_sell[t] * s) * p.dt_hours;
        charge.push(ch);
        discharge.push(dc);
        buy.push(b);
        sell.push(s);
        energy.push(e);
    }

    MilpSolution {
        status: MilpStatus::Optimal,
        objective,
        charge_kw: charge,
        discharge_kw: discharge,
        grid_buy_kw: buy,
        grid_sell_kw: sell,
        energy_kwh: energy,
    }
}

/// Writes the instance in plain-text LP format (CPLEX dialect) using the
/// explicit binary formulation, for external cross-checking.
pub fn write_lp_format(p: &MilpProblem, w: &mut impl Write) -> io::Result<()> {
    let t_len = p.horizon();
    let params = &p.params;
    writeln!(w, "\\ battery dispatch horizon MILP, T = {t_len}")?;
    writeln!(w, "Minimize")?;
    write!(w, " cost:")?;
    for t in 0..t_len {
        write!(
            w,
            " + {} B{t} - {} S{t}",
            p.price_buy[t] * p.dt_hours,
            p.price_sell[t] * p.dt_hours
        )?;
    }
    writeln!(w)?;
    writeln!(w, "Subject To")?;
    for t in 0..t_len {
        writeln!(
            w,
            " balance{t}: B{t} - S{t} + DC{t} - CH{t} = {}",
            p.load_kw[t] - p.pv_kw[t]
        )?;
        writeln!(w, " rate_dc{t}: DC{t} - {} X{t} <= 0", params.discharge_rate_kw)?;
        writeln!(w, " rate_ch{t}: CH{t} - {} Y{t} <= 0", params.charge_rate_kw)?;
        writeln!(w, " excl{t}: X{t} + Y{t} <= 1")?;
        let prev = if t == 0 {
            format!("{}", p.initial_energy_kwh)
        } else {
            format!("E{}", t - 1)
        };
        if t == 0 {
            writeln!(
                w,
                " dyn{t}: E{t} + {} DC{t} - {} CH{t} = {prev}",
                p.dt_hours / params.eff_discharge,
                p.dt_hours * params.eff_charge
            )?;
        } else {
            writeln!(
                w,
                " dyn{t}: E{t} - {prev} + {} DC{t} - {} CH{t} = 0",
                p.dt_hours / params.eff_discharge,
                p.dt_hours * params.eff_charge
            )?;
        }
    }
    writeln!(w, "Bounds")?;
    for t in 0..t_len {
        writeln!(w, " 0 <= CH{t} <= {}", params.charge_rate_kw)?;
        writeln!(w, " 0 <= DC{t} <= {}", params.discharge_rate_kw)?;
        writeln!(w, " {} <= E{t} <= {}", params.e_min_kwh(), params.e_max_kwh())?;
    }
    writeln!(w, "Binary")?;
    write!(w, " ")?;
    for t in 0..t_len {
        write!(w, "X{t} Y{t} ")?;
    }
    writeln!(w)?;
    writeln!(w, "End")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_fixtures::reference_battery;

    fn problem(
        load: &[f64],
        pv: &[f64],
        buy: &[f64],
        sell: &[f64],
        e0: f64,
    ) -> MilpProblem {
        MilpProblem::new(
            1.0,
            e0,
            reference_battery(),
            load.to_vec(),
            pv.to_vec(),
            buy.to_vec(),
            sell.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn two_interval_arbitrage() {
        // Charge flat out in the cheap hour, sell everything in the dear one.
        let p = problem(
            &[0.0, 0.0],
            &[0.0, 0.0],
            &[0.1, 1.0],
            &[0.05, 0.9],
            1.35,
        );
        let sol = solve_milp(&p).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert!((sol.objective + 5.411).abs() < 1e-9, "objective {}", sol.objective);
        assert!((sol.charge_kw[0] - 7.0).abs() < 1e-9);
        assert!((sol.discharge_kw[1] - 6.79).abs() < 1e-9);
    }

    #[test]
    fn zero_prices_mean_zero_objective() {
        let p = problem(&[3.0, 1.0], &[0.5, 2.0], &[0.0, 0.0], &[0.0, 0.0], 4.05);
        let sol = solve_milp(&p).unwrap();
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn single_interval_discharges_to_cover_load() {
        let p = problem(&[5.0], &[0.0], &[0.5], &[0.1], 4.05);
        let sol = solve_milp(&p).unwrap();
        assert!((sol.discharge_kw[0] - 2.7).abs() < 1e-9);
        assert!((sol.grid_buy_kw[0] - 2.3).abs() < 1e-9);
        assert!((sol.objective - 1.15).abs() < 1e-9);
    }

    #[test]
    fn solution_respects_all_constraints() {
        let p = problem(
            &[2.0, 8.0, 1.0, 4.0],
            &[0.0, 3.0, 6.0, 0.5],
            &[0.3, 0.7, 0.25, 0.9],
            &[0.1, 0.5, 0.05, 0.7],
            4.05,
        );
        let sol = solve_milp(&p).unwrap();
        let params = reference_battery();
        let mut e = 4.05;
        let mut recomputed = 0.0;
        for t in 0..p.horizon() {
            let ch = sol.charge_kw[t];
            let dc = sol.discharge_kw[t];
            assert!(ch >= 0.0 && ch <= params.charge_rate_kw + 1e-9);
            assert!(dc >= 0.0 && dc <= params.discharge_rate_kw + 1e-9);
            assert_eq!(ch * dc, 0.0, "simultaneous action at {t}");
            let balance = sol.grid_buy_kw[t] - sol.grid_sell_kw[t] + p.pv_kw[t] + dc
                - ch
                - p.load_kw[t];
            assert!(balance.abs() < 1e-9, "balance residual {balance} at {t}");
            e -= p.dt_hours * (dc / params.eff_discharge - params.eff_charge * ch);
            assert!(
                (e - sol.energy_kwh[t]).abs() < 1e-9,
                "energy recursion broken at {t}"
            );
            assert!(e >= params.e_min_kwh() - 1e-9 && e <= params.e_max_kwh() + 1e-9);
            recomputed +=
                (p.price_buy[t] * sol.grid_buy_kw[t] - p.price_sell[t] * sol.grid_sell_kw[t])
                    * p.dt_hours;
        }
        assert!((recomputed - sol.objective).abs() < 1e-9);
    }

    #[test]
    fn relaxation_never_exceeds_milp() {
        let p = problem(
            &[2.0, 8.0, 1.0],
            &[0.0, 3.0, 6.0],
            &[0.3, 0.7, 0.25],
            &[0.1, 0.5, 0.05],
            4.05,
        );
        let relax = solve_lp_relaxation(&p).unwrap();
        let milp = solve_milp(&p).unwrap();
        assert!(relax.objective <= milp.objective + 1e-9);
    }

    #[test]
    fn negative_prices_force_branching() {
        // Negative buy prices pay for consumption. With the battery already
        // full the only way to consume is to burn energy through simultaneous
        // charge + discharge, which the relaxation exploits and the MILP must
        // refuse.
        let p = MilpProblem::new(
            1.0,
            12.15,
            reference_battery(),
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![-0.5, -0.5],
            vec![-0.6, -0.6],
        )
        .unwrap();
        let relax = solve_lp_relaxation(&p).unwrap();
        let milp = solve_milp(&p).unwrap();
        assert!(
            relax.objective < milp.objective - 1e-6,
            "relaxation {} vs milp {}",
            relax.objective,
            milp.objective
        );
        // Idle is optimal for the true MILP here.
        assert!(milp.objective.abs() < 1e-9);
        for t in 0..2 {
            assert_eq!(milp.charge_kw[t] * milp.discharge_kw[t], 0.0);
        }
    }

    #[test]
    fn reproducible_objective() {
        let p = problem(
            &[2.0, 8.0, 1.0, 4.0, 0.0],
            &[0.0, 3.0, 6.0, 0.5, 1.0],
            &[0.3, 0.7, 0.25, 0.9, 0.4],
            &[0.1, 0.5, 0.05, 0.7, 0.2],
            2.0,
        );
        let a = solve_milp(&p).unwrap().objective;
        let b = solve_milp(&p).unwrap().objective;
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn lp_dump_mentions_binaries() {
        let p = problem(&[1.0], &[0.0], &[0.3], &[0.1], 4.05);
        let mut buf = Vec::new();
        write_lp_format(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("Binary"));
        assert!(text.contains("X0 Y0"));
        assert!(text.contains("excl0: X0 + Y0 <= 1"));
    }
}
