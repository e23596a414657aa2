//! Dynamic-programming oracle over a discretized state-of-charge lattice.
//!
//! Independent of the LP/branch-and-bound path: the stored energy is snapped
//! onto an evenly spaced lattice between the energy bounds, per-interval
//! actions are exactly the lattice-to-lattice transitions allowed by the
//! rate caps, and a backward value iteration finds the cheapest trajectory.
//! Because the action set is a restriction of the continuous problem, the
//! oracle value converges to the exact optimum from above as the grid
//! shrinks. Used to cross-validate [`solve_milp`](super::solve_milp).

use crate::model::split_grid;
use crate::solver::milp::{MilpProblem, MilpSolution, MilpStatus};

/// Battery powers realizing a signed lattice transition of `delta` steps.
fn action_for_delta(p: &MilpProblem, h: f64, delta: isize) -> (f64, f64) {
    let params = &p.params;
    if delta > 0 {
        let ch = (delta as f64 * h / (params.eff_charge * p.dt_hours))
            .min(params.charge_rate_kw);
        (ch, 0.0)
    } else if delta < 0 {
        let dc = ((-delta) as f64 * h * params.eff_discharge / p.dt_hours)
            .min(params.discharge_rate_kw);
        (0.0, dc)
    } else {
        (0.0, 0.0)
    }
}

/// Optimal schedule restricted to a SoC lattice of spacing `soc_grid_kwh`.
///
/// The initial energy is snapped to the nearest lattice point; callers that
/// want an exact comparison should pass an on-lattice initial energy.
pub fn solve_dp_oracle(problem: &MilpProblem, soc_grid_kwh: f64) -> MilpSolution {
    assert!(soc_grid_kwh > 0.0, "lattice spacing must be positive");
    let p = problem;
    let params = &p.params;
    let horizon = p.horizon();
    let (e_min, e_max) = (params.e_min_kwh(), params.e_max_kwh());
    let span = e_max - e_min;
    let n_steps = ((span / soc_grid_kwh).round() as usize).max(1);
    let h = span / n_steps as f64;
    let n_states = n_steps + 1;

    // Largest lattice move each direction allowed by the rate caps. The tiny
    // slack keeps exactly-representable caps (e.g. 679 steps of 0.01 kWh)
    // from rounding down.
    let d_ch = ((params.eff_charge * params.charge_rate_kw * p.dt_hours / h) * (1.0 + 1e-12)
        + 1e-9)
        .floor() as usize;
    let d_dc = ((params.discharge_rate_kw * p.dt_hours / (params.eff_discharge * h))
        * (1.0 + 1e-12)
        + 1e-9)
        .floor() as usize;
    let d_ch = d_ch.min(n_steps);
    let d_dc = d_dc.min(n_steps);
    let width = d_dc + d_ch + 1;

    // Per-interval transition costs indexed by delta + d_dc.
    let mut cost: Vec<f64> = Vec::with_capacity(horizon * width);
    for t in 0..horizon {
        for k in 0..width {
            let delta = k as isize - d_dc as isize;
            let (ch, dc) = action_for_delta(p, h, delta);
            let (buy, sell) = split_grid(p.load_kw[t], p.pv_kw[t], ch, dc);
            cost.push((p.price_buy[t] * buy - p.price_sell[t] * sell) * p.dt_hours);
        }
    }

    // Backward value iteration; terminal values are zero (no terminal SoC
    // constraint, matching the exact formulation).
    let mut value = vec![0.0f64; (horizon + 1) * n_states];
    for t in (0..horizon).rev() {
        let (head, tail) = value.split_at_mut((t + 1) * n_states);
        let row = &mut head[t * n_states..];
        let next = &tail[..n_states];
        let cost_t = &cost[t * width..(t + 1) * width];
        for i in 0..n_states {
            let j_lo = i.saturating_sub(d_dc);
            let j_hi = (i + d_ch).min(n_steps);
            let base = d_dc + j_lo - i;
            let costs = &cost_t[base..base + (j_hi - j_lo) + 1];
            let nexts = &next[j_lo..=j_hi];
            let mut best = f64::INFINITY;
            for (c, v) in costs.iter().zip(nexts) {
                let s = c + v;
                if s < best {
                    best = s;
                }
            }
            row[i] = best;
        }
    }

    // Forward pass reconstructs one optimal trajectory (first minimum wins,
    // so the result is deterministic).
    let i0 = (((p.initial_energy_kwh - e_min) / h).round() as usize).min(n_steps);
    let mut state = i0;
    let mut charge = Vec::with_capacity(horizon);
    let mut discharge = Vec::with_capacity(horizon);
    let mut grid_buy = Vec::with_capacity(horizon);
    let mut grid_sell = Vec::with_capacity(horizon);
    let mut energy = Vec::with_capacity(horizon);
    let mut objective = 0.0;
    for t in 0..horizon {
        let next = &value[(t + 1) * n_states..(t + 2) * n_states];
        let cost_t = &cost[t * width..(t + 1) * width];
        let j_lo = state.saturating_sub(d_dc);
        let j_hi = (state + d_ch).min(n_steps);
        let mut best = f64::INFINITY;
        let mut best_j = state;
        for j in j_lo..=j_hi {
            let s = cost_t[d_dc + j - state] + next[j];
            if s < best {
                best = s;
                best_j = j;
            }
        }
        let delta = best_j as isize - state as isize;
        let (ch, dc) = action_for_delta(p, h, delta);
        let (buy, sell) = split_grid(p.load_kw[t], p.pv_kw[t], ch, dc);
        objective += (p.price_buy[t] * buy - p.price_sell[t] * sell) * p.dt_hours;
        charge.push(ch);
        discharge.push(dc);
        grid_buy.push(buy);
        grid_sell.push(sell);
        energy.push(e_min + best_j as f64 * h);
        state = best_j;
    }

    MilpSolution {
        status: MilpStatus::Optimal,
        objective,
        charge_kw: charge,
        discharge_kw: discharge,
        grid_buy_kw: grid_buy,
        grid_sell_kw: grid_sell,
        energy_kwh: energy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_fixtures::reference_battery;

    fn problem(load: &[f64], pv: &[f64], buy: &[f64], sell: &[f64], e0: f64) -> MilpProblem {
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
    fn arbitrage_instance_matches_exact_optimum() {
        // The optimal schedule lands exactly on the 0.01 kWh lattice, so the
        // oracle reproduces the known optimum.
        let p = problem(&[0.0, 0.0], &[0.0, 0.0], &[0.1, 1.0], &[0.05, 0.9], 1.35);
        let sol = solve_dp_oracle(&p, 0.01);
        assert!(
            (sol.objective + 5.411).abs() < 0.02,
            "objective {}",
            sol.objective
        );
    }

    #[test]
    fn zero_prices_cost_nothing() {
        let p = problem(&[2.0, 1.0], &[0.0, 3.0], &[0.0, 0.0], &[0.0, 0.0], 4.05);
        let sol = solve_dp_oracle(&p, 0.05);
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn single_interval_matches_brute_enumeration() {
        let p = problem(&[5.0], &[0.0], &[0.5], &[0.1], 4.05);
        let grid = 0.01;
        let sol = solve_dp_oracle(&p, grid);

        // Independent enumeration of every lattice transition.
        let params = reference_battery();
        let span = params.e_max_kwh() - params.e_min_kwh();
        let n = (span / grid).round() as usize;
        let h = span / n as f64;
        let i0 = ((4.05 - params.e_min_kwh()) / h).round() as isize;
        let mut best = f64::INFINITY;
        for j in 0..=(n as isize) {
            let delta = j - i0;
            let (ch, dc) = action_for_delta(&p, h, delta);
            if ch > params.charge_rate_kw || dc > params.discharge_rate_kw {
                continue;
            }
            // Skip transitions the rate caps cannot realize.
            let de = p.dt_hours * (params.eff_charge * ch - dc / params.eff_discharge);
            if (de - delta as f64 * h).abs() > 1e-9 {
                continue;
            }
            let (buy, sell) = split_grid(5.0, 0.0, ch, dc);
            best = best.min(0.5 * buy - 0.1 * sell);
        }
        assert!(
            (sol.objective - best).abs() < 1e-12,
            "dp {} vs enumeration {best}",
            sol.objective
        );
        // Discharging 2.7 kW to the energy floor is optimal.
        assert!((sol.discharge_kw[0] - 2.7).abs() < 1e-9);
    }

    #[test]
    fn trajectory_stays_on_lattice_and_consistent() {
        let p = problem(
            &[2.0, 8.0, 1.0, 4.0],
            &[0.0, 3.0, 6.0, 0.5],
            &[0.3, 0.7, 0.25, 0.9],
            &[0.1, 0.5, 0.05, 0.7],
            4.05,
        );
        let sol = solve_dp_oracle(&p, 0.05);
        let params = reference_battery();
        let mut e = 4.05;
        for t in 0..p.horizon() {
            e -= p.dt_hours
                * (sol.discharge_kw[t] / params.eff_discharge
                    - params.eff_charge * sol.charge_kw[t]);
            assert!((e - sol.energy_kwh[t]).abs() < 1e-9);
            assert!(e >= params.e_min_kwh() - 1e-9 && e <= params.e_max_kwh() + 1e-9);
            assert_eq!(sol.charge_kw[t] * sol.discharge_kw[t], 0.0);
        }
    }
}
