//! Rule-based self-consumption maximization.
//!
//! Charge on PV surplus, discharge on PV deficit, both subject to rate and
//! energy-window limits. A symmetric deadband on |pv - load| suppresses
//! actuation for small mismatches. The battery never charges from the grid
//! and never exports: every action is capped by the mismatch itself.

use crate::error::ModelError;
use crate::model::{BatteryParams, BatteryState, DispatchAction};

/// SCM policy configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScmConfig {
    /// Power threshold in kW below which no battery action is taken.
    pub deadband_kw: f64,
}

impl ScmConfig {
    pub fn new(deadband_kw: f64) -> Result<Self, ModelError> {
        if !(deadband_kw >= 0.0) || !deadband_kw.is_finite() {
            return Err(ModelError::InvalidParams(format!(
                "deadband_kw must be finite and >= 0, got {deadband_kw}"
            )));
        }
        Ok(Self { deadband_kw })
    }
}

/// One SCM decision for the current interval.
pub fn scm_decide(
    load_kw: f64,
    pv_kw: f64,
    state: &BatteryState,
    params: &BatteryParams,
    cfg: &ScmConfig,
    dt_hours: f64,
) -> DispatchAction {
    let surplus = pv_kw - load_kw;
    if surplus > cfg.deadband_kw {
        let headroom_kw = (params.e_max_kwh() - state.energy_kwh) / (params.eff_charge * dt_hours);
        let charge = params
            .charge_rate_kw
            .min(headroom_kw.max(0.0))
            .min(surplus);
        DispatchAction::charge(charge, load_kw, pv_kw)
    } else if -surplus > cfg.deadband_kw {
        let available_kw =
            params.eff_discharge * (state.energy_kwh - params.e_min_kwh()) / dt_hours;
        let discharge = params
            .discharge_rate_kw
            .min(available_kw.max(0.0))
            .min(-surplus);
        DispatchAction::discharge(discharge, load_kw, pv_kw)
    } else {
        DispatchAction::idle(load_kw, pv_kw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_fixtures::reference_battery;
    use proptest::prelude::*;

    fn cfg(deadband: f64) -> ScmConfig {
        ScmConfig::new(deadband).unwrap()
    }

    #[test]
    fn charges_surplus_up_to_mismatch() {
        let p = reference_battery();
        let a = scm_decide(2.0, 5.0, &BatteryState::new(4.05), &p, &cfg(0.1), 1.0);
        assert!((a.charge_kw - 3.0).abs() < 1e-12);
        assert_eq!(a.discharge_kw, 0.0);
        assert_eq!(a.grid_buy_kw, 0.0);
        assert_eq!(a.grid_sell_kw, 0.0);
    }

    #[test]
    fn surplus_inside_deadband_is_ignored() {
        let p = reference_battery();
        let a = scm_decide(2.0, 2.05, &BatteryState::new(4.05), &p, &cfg(0.1), 1.0);
        assert_eq!(a.charge_kw, 0.0);
        assert_eq!(a.discharge_kw, 0.0);
    }

    #[test]
    fn discharge_capped_by_remaining_energy() {
        let p = reference_battery();
        let a = scm_decide(10.0, 0.0, &BatteryState::new(1.5), &p, &cfg(0.0), 1.0);
        assert!((a.discharge_kw - 0.15).abs() < 1e-12);
        assert!((a.grid_buy_kw - 9.85).abs() < 1e-12);
    }

    #[test]
    fn charge_capped_by_headroom() {
        let p = reference_battery();
        // Nearly full: headroom (12.15 - 12.0) / 0.97 beats neither rate nor surplus.
        let a = scm_decide(0.0, 10.0, &BatteryState::new(12.0), &p, &cfg(0.0), 1.0);
        assert!((a.charge_kw - 0.15 / 0.97).abs() < 1e-12);
    }

    proptest! {
        /// Never charges from the grid, never exports from the battery, and
        /// with zero deadband charge power grows with the surplus.
        #[test]
        fn self_consumption_semantics(
            load in 0.0f64..15.0,
            pv in 0.0f64..15.0,
            energy in 1.35f64..12.15,
            deadband in 0.0f64..1.0,
        ) {
            let p = reference_battery();
            let a = scm_decide(load, pv, &BatteryState::new(energy), &p, &cfg(deadband), 1.0);
            prop_assert!(a.charge_kw <= (pv - load).max(0.0) + 1e-12);
            prop_assert!(a.discharge_kw <= (load - pv).max(0.0) + 1e-12);
            prop_assert!(a.charge_kw <= p.charge_rate_kw + 1e-12);
            prop_assert!(a.discharge_kw <= p.discharge_rate_kw + 1e-12);
        }

        #[test]
        fn charge_monotone_in_surplus(
            energy in 1.35f64..12.15,
            s1 in 0.0f64..10.0,
            s2 in 0.0f64..10.0,
        ) {
            let p = reference_battery();
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            let state = BatteryState::new(energy);
            let a_lo = scm_decide(0.0, lo, &state, &p, &cfg(0.0), 1.0);
            let a_hi = scm_decide(0.0, hi, &state, &p, &cfg(0.0), 1.0);
            prop_assert!(a_hi.charge_kw >= a_lo.charge_kw - 1e-12);
        }

        /// A deadband above every mismatch keeps the battery idle.
        #[test]
        fn huge_deadband_means_idle(
            load in 0.0f64..5.0,
            pv in 0.0f64..5.0,
        ) {
            let p = reference_battery();
            let a = scm_decide(load, pv, &BatteryState::new(4.0), &p, &cfg(10.0), 1.0);
            prop_assert_eq!(a.charge_kw, 0.0);
            prop_assert_eq!(a.discharge_kw, 0.0);
        }
    }
}
