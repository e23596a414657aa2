//! Receding-horizon MPC wrapper around the horizon MILP.
//!
//! Each interval the remaining scenario is windowed to the configured
//! horizon, the exact MILP is solved from the realized battery state, and
//! only the first interval's action is applied. Near the end of the data the
//! window shrinks instead of padding with invented prices.

use crate::error::SolverError;
use crate::model::{BatteryParams, BatteryState, DispatchAction, ScenarioSeries};
use crate::solver::{solve_milp, MilpProblem};

/// MPC configuration: the optimization horizon in intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MpcConfig {
    pub horizon: usize,
}

impl MpcConfig {
    pub fn new(horizon: usize) -> Result<Self, crate::error::ModelError> {
        if horizon == 0 {
            return Err(crate::error::ModelError::InvalidParams(
                "MPC horizon must be at least 1".to_string(),
            ));
        }
        Ok(Self { horizon })
    }
}

/// Decides the action for interval `t_now` by optimizing the window
/// `[t_now, min(t_now + horizon, scenario end))` and applying its first
/// interval.
pub fn mpc_decide(
    t_now: usize,
    scenario: &ScenarioSeries,
    state: &BatteryState,
    params: &BatteryParams,
    cfg: &MpcConfig,
) -> Result<DispatchAction, SolverError> {
    assert!(t_now < scenario.len(), "t_now escapes the scenario");
    let len = cfg.horizon.min(scenario.len() - t_now);
    let problem =
        MilpProblem::from_scenario_window(scenario, t_now, len, state.energy_kwh, *params)
            .map_err(|e| SolverError::NumericalFailure(format!("window build failed: {e}")))?;
    let sol = solve_milp(&problem)?;
    Ok(DispatchAction::from_battery(
        sol.charge_kw[0],
        sol.discharge_kw[0],
        scenario.load_kw[t_now],
        scenario.pv_kw[t_now],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_fixtures::reference_battery;

    fn scenario(load: Vec<f64>, pv: Vec<f64>, buy: Vec<f64>, sell: Vec<f64>) -> ScenarioSeries {
        ScenarioSeries::new(1.0, load, pv, buy, sell).unwrap()
    }

    #[test]
    fn horizon_one_is_single_interval_greedy() {
        let s = scenario(vec![5.0], vec![0.0], vec![0.5], vec![0.1]);
        let p = reference_battery();
        let a = mpc_decide(0, &s, &BatteryState::new(4.05), &p, &MpcConfig::new(1).unwrap())
            .unwrap();
        assert!((a.discharge_kw - 2.7).abs() < 1e-9);
        assert!((a.grid_buy_kw - 2.3).abs() < 1e-9);
    }

    #[test]
    fn flat_prices_without_load_mean_idle() {
        // Any cycle loses round-trip efficiency when sell <= buy, so idling
        // is optimal at every step.
        let n = 12;
        let s = scenario(vec![0.0; n], vec![0.0; n], vec![0.4; n], vec![0.2; n]);
        let p = reference_battery();
        let mut state = BatteryState::new(4.05);
        let cfg = MpcConfig::new(6).unwrap();
        for t in 0..n {
            let a = mpc_decide(t, &s, &state, &p, &cfg).unwrap();
            assert_eq!(a.charge_kw, 0.0, "charged at {t}");
            assert_eq!(a.discharge_kw, 0.0, "discharged at {t}");
            state = crate::model::step_battery(state, &a, &p, 1.0).unwrap();
        }
    }

    #[test]
    fn window_shrinks_at_the_tail() {
        // Deciding the final interval with a huge horizon must still work:
        // the window clips to length 1.
        let s = scenario(
            vec![1.0, 2.0, 3.0],
            vec![0.0; 3],
            vec![0.3, 0.4, 0.5],
            vec![0.1, 0.2, 0.3],
        );
        let p = reference_battery();
        let cfg = MpcConfig::new(24).unwrap();
        let a = mpc_decide(2, &s, &BatteryState::new(4.05), &p, &cfg).unwrap();
        // Last interval, price 0.5: discharge what the rate and energy allow.
        assert!((a.discharge_kw - 2.7).abs() < 1e-9);
    }

    #[test]
    fn uses_upcoming_price_information() {
        // Cheap now, expensive later: the controller pre-charges even with
        // zero load, which a myopic horizon-1 policy would never do.
        let s = scenario(
            vec![0.0, 5.0],
            vec![0.0, 0.0],
            vec![0.1, 1.0],
            vec![0.05, 0.8],
        );
        let p = reference_battery();
        let far = mpc_decide(
            0,
            &s,
            &BatteryState::new(1.35),
            &p,
            &MpcConfig::new(2).unwrap(),
        )
        .unwrap();
        assert!(far.charge_kw > 6.9, "expected a pre-charge, got {far:?}");
        let myopic = mpc_decide(
            0,
            &s,
            &BatteryState::new(1.35),
            &p,
            &MpcConfig::new(1).unwrap(),
        )
        .unwrap();
        assert_eq!(myopic.charge_kw, 0.0);
    }
}
