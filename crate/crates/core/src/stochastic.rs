//! Lightweight stochastic price-responsive controller.
//!
//! The pipeline per scenario: buy prices are first modified so that every
//! PV-surplus interval carries the series minimum (giving those hours top
//! charging priority), then both price series are min-max normalized to
//! [0, 1]. Per interval the controller evaluates a stochastic request rate
//! (SRR) for charging on the modified buy price and, if that request does
//! not fire, one for discharging on the sell price. Power amounts come from
//! the same rate/energy caps the other controllers use.

use crate::error::ModelError;
use crate::model::{BatteryParams, BatteryState, DispatchAction};
use crate::rng::uniform_unit;
use rand_core::RngCore;

/// Design parameters of the SRR functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrrConfig {
    pub k_charge: f64,
    pub k_discharge: f64,
    /// Small positive regularizer keeping the SRR exponents finite.
    pub epsilon: f64,
}

impl Default for SrrConfig {
    fn default() -> Self {
        Self {
            k_charge: 0.3,
            k_discharge: 0.3,
            epsilon: 1e-6,
        }
    }
}

impl SrrConfig {
    pub fn new(k_charge: f64, k_discharge: f64, epsilon: f64) -> Result<Self, ModelError> {
        let err = |msg: String| Err(ModelError::InvalidParams(msg));
        if !(k_charge > 0.0) || !k_charge.is_finite() {
            return err(format!("k_charge must be > 0, got {k_charge}"));
        }
        if !(k_discharge > 0.0) || !k_discharge.is_finite() {
            return err(format!("k_discharge must be > 0, got {k_discharge}"));
        }
        if !(epsilon > 0.0 && epsilon <= 1e-3) {
            return err(format!("epsilon must be in (0, 1e-3], got {epsilon}"));
        }
        Ok(Self {
            k_charge,
            k_discharge,
            epsilon,
        })
    }
}

/// Normalized price inputs for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPrices {
    pub buy_norm: Vec<f64>,
    pub sell_norm: Vec<f64>,
    /// Buy prices after the PV-surplus modification, normalized.
    pub buy_modified_norm: Vec<f64>,
}

impl NormalizedPrices {
    /// Builds all three normalized series for a scenario.
    pub fn from_series(
        price_buy: &[f64],
        price_sell: &[f64],
        load_kw: &[f64],
        pv_kw: &[f64],
    ) -> Self {
        let modified = modify_buy_prices(price_buy, load_kw, pv_kw);
        Self {
            buy_norm: normalize_prices(price_buy),
            sell_norm: normalize_prices(price_sell),
            buy_modified_norm: normalize_prices(&modified),
        }
    }
}

/// Min-max normalization onto [0, 1]. A constant series maps to 0.5
/// everywhere, expressing indifference rather than saturation.
pub fn normalize_prices(prices: &[f64]) -> Vec<f64> {
    assert!(!prices.is_empty(), "cannot normalize an empty price series");
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &p in prices {
        min = min.min(p);
        max = max.max(p);
    }
    if max == min {
        return vec![0.5; prices.len()];
    }
    let span = max - min;
    prices.iter().map(|&p| (p - min) / span).collect()
}

/// Assigns the series-minimum buy price to every interval with PV surplus
/// (`pv > load`), so charging there fires with top priority.
pub fn modify_buy_prices(price_buy: &[f64], load_kw: &[f64], pv_kw: &[f64]) -> Vec<f64> {
    assert_eq!(price_buy.len(), load_kw.len());
    assert_eq!(price_buy.len(), pv_kw.len());
    let min = price_buy.iter().copied().fold(f64::INFINITY, f64::min);
    price_buy
        .iter()
        .zip(load_kw.iter().zip(pv_kw))
        .map(|(&p, (&load, &pv))| if pv > load { min } else { p })
        .collect()
}

/// Charging request probability: `1 - exp(-k_ch * (1 - rho) / (rho + eps))`.
/// Decreasing in the normalized price; 1 at the minimum price, 0 at the
/// maximum.
pub fn srr_charge(rho_bn: f64, cfg: &SrrConfig) -> f64 {
    debug_assert!((0.0..=1.0).contains(&rho_bn));
    1.0 - (-cfg.k_charge * (1.0 - rho_bn) / (rho_bn + cfg.epsilon)).exp()
}

/// Discharging request probability: `1 - exp(-k_dc * rho / (1 - rho + eps))`.
/// Increasing in the normalized price; 0 at the minimum price, 1 at the
/// maximum.
pub fn srr_discharge(rho_sn: f64, cfg: &SrrConfig) -> f64 {
    debug_assert!((0.0..=1.0).contains(&rho_sn));
    1.0 - (-cfg.k_discharge * rho_sn / (1.0 - rho_sn + cfg.epsilon)).exp()
}

/// Charging power cap: rate limit, energy headroom, and during PV surplus
/// also the surplus itself (no grid charging while PV covers the load).
pub fn charge_power_cap(
    load_kw: f64,
    pv_kw: f64,
    state: &BatteryState,
    params: &BatteryParams,
    dt_hours: f64,
) -> f64 {
    let headroom_kw = (params.e_max_kwh() - state.energy_kwh) / (params.eff_charge * dt_hours);
    let mut p = params.charge_rate_kw.min(headroom_kw.max(0.0));
    if pv_kw > load_kw {
        p = p.min(pv_kw - load_kw);
    }
    p
}

/// Discharging power cap: rate limit, remaining energy, and during PV
/// deficit also the deficit itself (no exports while the load needs power).
pub fn discharge_power_cap(
    load_kw: f64,
    pv_kw: f64,
    state: &BatteryState,
    params: &BatteryParams,
    dt_hours: f64,
) -> f64 {
    let available_kw = params.eff_discharge * (state.energy_kwh - params.e_min_kwh()) / dt_hours;
    let mut p = params.discharge_rate_kw.min(available_kw.max(0.0));
    if load_kw > pv_kw {
        p = p.min(load_kw - pv_kw);
    }
    p
}

/// One stochastic decision: try the charge request first, then the discharge
/// request, otherwise idle. The two tests consume independent draws.
#[allow(clippy::too_many_arguments)]
pub fn stochastic_decide(
    t: usize,
    norm: &NormalizedPrices,
    load_kw: f64,
    pv_kw: f64,
    state: &BatteryState,
    params: &BatteryParams,
    cfg: &SrrConfig,
    dt_hours: f64,
    rng: &mut impl RngCore,
) -> DispatchAction {
    let r1 = uniform_unit(rng);
    if r1 < srr_charge(norm.buy_modified_norm[t], cfg) {
        let p = charge_power_cap(load_kw, pv_kw, state, params, dt_hours);
        return DispatchAction::charge(p, load_kw, pv_kw);
    }
    let r2 = uniform_unit(rng);
    if r2 < srr_discharge(norm.sell_norm[t], cfg) {
        let p = discharge_power_cap(load_kw, pv_kw, state, params, dt_hours);
        return DispatchAction::discharge(p, load_kw, pv_kw);
    }
    DispatchAction::idle(load_kw, pv_kw)
}
