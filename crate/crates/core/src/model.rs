//! Domain types and battery dynamics.
//!
//! Sign conventions, fixed once here and used everywhere:
//! - `charge_kw` and `discharge_kw` are both non-negative and never
//!   simultaneously positive.
//! - grid power balance: `grid_buy - grid_sell + pv + discharge - charge = load`,
//!   with `grid_buy, grid_sell >= 0` and at most one of them positive.
//! - stored energy update: `E' = E - dt * (discharge / eff_discharge - eff_charge * charge)`.

use crate::error::ModelError;

/// Slack allowed on the stored-energy window before a battery update is
/// rejected as a [`ModelError::BoundsViolation`]. Absorbs floating-point
/// noise from rate-cap arithmetic without masking real violations.
pub const BOUNDS_TOLERANCE_KWH: f64 = 1e-6;

/// Nameplate battery characteristics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryParams {
    /// Nominal capacity in kWh.
    pub nominal_capacity_kwh: f64,
    /// Maximum charging power in kW.
    pub charge_rate_kw: f64,
    /// Maximum discharging power in kW.
    pub discharge_rate_kw: f64,
    /// Charging efficiency, in (0, 1].
    pub eff_charge: f64,
    /// Discharging efficiency, in (0, 1].
    pub eff_discharge: f64,
    /// Upper state-of-charge bound, fraction of nominal capacity.
    pub soc_max: f64,
    /// Lower state-of-charge bound, fraction of nominal capacity.
    pub soc_min: f64,
    /// Initial state of charge, in [soc_min, soc_max].
    pub soc_init: f64,
}

impl BatteryParams {
    /// Validates the parameter invariants and returns the parameter set.
    pub fn new(
        nominal_capacity_kwh: f64,
        charge_rate_kw: f64,
        discharge_rate_kw: f64,
        eff_charge: f64,
        eff_discharge: f64,
        soc_max: f64,
        soc_min: f64,
        soc_init: f64,
    ) -> Result<Self, ModelError> {
        let params = Self {
            nominal_capacity_kwh,
            charge_rate_kw,
            discharge_rate_kw,
            eff_charge,
            eff_discharge,
            soc_max,
            soc_min,
            soc_init,
        };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let err = |msg: String| Err(ModelError::InvalidParams(msg));
        if !(self.nominal_capacity_kwh > 0.0) {
            return err(format!(
                "nominal_capacity_kwh must be > 0, got {}",
                self.nominal_capacity_kwh
            ));
        }
        if !(self.charge_rate_kw > 0.0) {
            return err(format!("charge_rate_kw must be > 0, got {}", self.charge_rate_kw));
        }
        if !(self.discharge_rate_kw > 0.0) {
            return err(format!(
                "discharge_rate_kw must be > 0, got {}",
                self.discharge_rate_kw
            ));
        }
        if !(self.eff_charge > 0.0 && self.eff_charge <= 1.0) {
            return err(format!("eff_charge must be in (0, 1], got {}", self.eff_charge));
        }
        if !(self.eff_discharge > 0.0 && self.eff_discharge <= 1.0) {
            return err(format!(
                "eff_discharge must be in (0, 1], got {}",
                self.eff_discharge
            ));
        }
        if !(self.soc_min >= 0.0 && self.soc_min < self.soc_max && self.soc_max <= 1.0) {
            return err(format!(
                "need 0 <= soc_min < soc_max <= 1, got soc_min={}, soc_max={}",
                self.soc_min, self.soc_max
            ));
        }
        if !(self.soc_init >= self.soc_min && self.soc_init <= self.soc_max) {
            return err(format!(
                "soc_init must be in [{}, {}], got {}",
                self.soc_min, self.soc_max, self.soc_init
            ));
        }
        Ok(())
    }

    /// Upper stored-energy bound in kWh.
    pub fn e_max_kwh(&self) -> f64 {
        self.nominal_capacity_kwh * self.soc_max
    }

    /// Lower stored-energy bound in kWh.
    pub fn e_min_kwh(&self) -> f64 {
        self.nominal_capacity_kwh * self.soc_min
    }

    /// Initial stored energy in kWh.
    pub fn initial_energy_kwh(&self) -> f64 {
        self.nominal_capacity_kwh * self.soc_init
    }

    /// Initial battery state.
    pub fn initial_state(&self) -> BatteryState {
        BatteryState {
            energy_kwh: self.initial_energy_kwh(),
        }
    }
}

/// Stored energy of the battery at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    pub energy_kwh: f64,
}

impl BatteryState {
    pub fn new(energy_kwh: f64) -> Self {
        Self { energy_kwh }
    }

    /// State of charge as a fraction of nominal capacity.
    pub fn soc(&self, params: &BatteryParams) -> f64 {
        self.energy_kwh / params.nominal_capacity_kwh
    }
}

/// Aligned time series describing one simulation horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSeries {
    /// Interval length in hours.
    pub dt_hours: f64,
    pub load_kw: Vec<f64>,
    pub pv_kw: Vec<f64>,
    /// Buy price in currency/kWh (spot plus fixed tariff adder).
    pub price_buy: Vec<f64>,
    /// Sell price in currency/kWh (spot).
    pub price_sell: Vec<f64>,
}

impl ScenarioSeries {
    /// Validates the series invariants: equal non-zero lengths, positive
    /// interval, non-negative load and PV, and sell price never above buy.
    pub fn new(
        dt_hours: f64,
        load_kw: Vec<f64>,
        pv_kw: Vec<f64>,
        price_buy: Vec<f64>,
        price_sell: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let err = |msg: String| Err(ModelError::InvalidScenario(msg));
        if !(dt_hours > 0.0) {
            return err(format!("dt_hours must be > 0, got {dt_hours}"));
        }
        let n = load_kw.len();
        if n == 0 {
            return err("series must contain at least one interval".to_string());
        }
        if pv_kw.len() != n || price_buy.len() != n || price_sell.len() != n {
            return err(format!(
                "array lengths differ: load {}, pv {}, buy {}, sell {}",
                n,
                pv_kw.len(),
                price_buy.len(),
                price_sell.len()
            ));
        }
        for t in 0..n {
            if !load_kw[t].is_finite() || load_kw[t] < 0.0 {
                return err(format!("load_kw[{t}] = {} must be finite and >= 0", load_kw[t]));
            }
            if !pv_kw[t].is_finite() || pv_kw[t] < 0.0 {
                return err(format!("pv_kw[{t}] = {} must be finite and >= 0", pv_kw[t]));
            }
            if !price_buy[t].is_finite() || !price_sell[t].is_finite() {
                return err(format!("prices at interval {t} must be finite"));
            }
            if price_sell[t] > price_buy[t] {
                return err(format!(
                    "price_sell[{t}] = {} exceeds price_buy[{t}] = {}",
                    price_sell[t], price_buy[t]
                ));
            }
        }
        Ok(Self {
            dt_hours,
            load_kw,
            pv_kw,
            price_buy,
            price_sell,
        })
    }

    /// Number of intervals in the series.
    pub fn len(&self) -> usize {
        self.load_kw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load_kw.is_empty()
    }
}

/// One interval's controller output.
///
/// Invariants: all fields non-negative, `charge_kw * discharge_kw == 0`,
/// `grid_buy_kw * grid_sell_kw == 0`, and the power balance holds against the
/// interval's load and PV.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DispatchAction {
    pub charge_kw: f64,
    pub discharge_kw: f64,
    pub grid_buy_kw: f64,
    pub grid_sell_kw: f64,
}

impl DispatchAction {
    /// No battery action; the grid covers the net load.
    pub fn idle(load_kw: f64, pv_kw: f64) -> Self {
        Self::from_battery(0.0, 0.0, load_kw, pv_kw)
    }

    /// Charge at `charge_kw`, grid split derived from the power balance.
    pub fn charge(charge_kw: f64, load_kw: f64, pv_kw: f64) -> Self {
        Self::from_battery(charge_kw, 0.0, load_kw, pv_kw)
    }

    /// Discharge at `discharge_kw`, grid split derived from the power balance.
    pub fn discharge(discharge_kw: f64, load_kw: f64, pv_kw: f64) -> Self {
        Self::from_battery(0.0, discharge_kw, load_kw, pv_kw)
    }

    /// Builds an action from battery powers, deriving the grid split.
    pub fn from_battery(charge_kw: f64, discharge_kw: f64, load_kw: f64, pv_kw: f64) -> Self {
        debug_assert!(charge_kw >= 0.0 && discharge_kw >= 0.0);
        debug_assert!(charge_kw == 0.0 || discharge_kw == 0.0);
        let (grid_buy_kw, grid_sell_kw) = split_grid(load_kw, pv_kw, charge_kw, discharge_kw);
        Self {
            charge_kw,
            discharge_kw,
            grid_buy_kw,
            grid_sell_kw,
        }
    }

    /// Checks the action invariants against the interval's load and PV.
    pub fn validate(&self, load_kw: f64, pv_kw: f64) -> Result<(), ModelError> {
        let err = |msg: String| Err(ModelError::InvalidAction(msg));
        if self.charge_kw < 0.0
            || self.discharge_kw < 0.0
            || self.grid_buy_kw < 0.0
            || self.grid_sell_kw < 0.0
        {
            return err(format!("negative component in {self:?}"));
        }
        if self.charge_kw * self.discharge_kw != 0.0 {
            return err(format!(
                "simultaneous charge {} kW and discharge {} kW",
                self.charge_kw, self.discharge_kw
            ));
        }
        if self.grid_buy_kw * self.grid_sell_kw != 0.0 {
            return err(format!(
                "simultaneous grid buy {} kW and sell {} kW",
                self.grid_buy_kw, self.grid_sell_kw
            ));
        }
        let residual = self.grid_buy_kw - self.grid_sell_kw + pv_kw + self.discharge_kw
            - self.charge_kw
            - load_kw;
        if residual.abs() > 1e-9 {
            return err(format!("power balance residual {residual} kW"));
        }
        Ok(())
    }
}

/// Per-interval electricity cost with a fixed left-to-right summation order,
/// so the total is reproducible bit-for-bit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostLedger {
    pub per_interval_cost: Vec<f64>,
    pub total_cost: f64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, cost: f64) {
        self.per_interval_cost.push(cost);
        self.total_cost += cost;
    }
}

/// Advances the stored energy by one interval.
///
/// `E' = E - dt * (discharge / eff_discharge - eff_charge * charge)`.
/// Results within [`BOUNDS_TOLERANCE_KWH`] of the energy window are snapped
/// onto it; anything further out is a [`ModelError::BoundsViolation`].
pub fn step_battery(
    state: BatteryState,
    action: &DispatchAction,
    params: &BatteryParams,
    dt_hours: f64,
) -> Result<BatteryState, ModelError> {
    let delta =
        dt_hours * (action.discharge_kw / params.eff_discharge - params.eff_charge * action.charge_kw);
    let mut energy = state.energy_kwh - delta;
    let (e_min, e_max) = (params.e_min_kwh(), params.e_max_kwh());
    if energy < e_min - BOUNDS_TOLERANCE_KWH || energy > e_max + BOUNDS_TOLERANCE_KWH {
        return Err(ModelError::BoundsViolation {
            energy_kwh: energy,
            min_kwh: e_min,
            max_kwh: e_max,
        });
    }
    energy = energy.clamp(e_min, e_max);
    Ok(BatteryState { energy_kwh: energy })
}

/// Splits the net power demand into grid import and export.
///
/// `net = load - pv - discharge + charge`; positive net is bought from the
/// grid, negative net is sold, never both.
pub fn split_grid(load_kw: f64, pv_kw: f64, charge_kw: f64, discharge_kw: f64) -> (f64, f64) {
    let net = load_kw - pv_kw - discharge_kw + charge_kw;
    if net >= 0.0 {
        (net, 0.0)
    } else {
        (0.0, -net)
    }
}

/// Electricity cost of one interval: `(buy_price * B - sell_price * S) * dt`.
/// Negative values are net revenue.
pub fn interval_cost(action: &DispatchAction, price_buy: f64, price_sell: f64, dt_hours: f64) -> f64 {
    (price_buy * action.grid_buy_kw - price_sell * action.grid_sell_kw) * dt_hours
}

#[cfg(test)]
pub(crate) mod test_fixtures {
    use super::BatteryParams;

    /// 13.5 kWh battery, 7 kW both ways, eff 0.97/1.0, SoC window 0.1..0.9,
    /// initial SoC 0.3. Used throughout the test suite.
    pub fn reference_battery() -> BatteryParams {
        BatteryParams::new(13.5, 7.0, 7.0, 0.97, 1.0, 0.9, 0.1, 0.3).unwrap()
    }
}
