use serde::{Deserialize, Serialize};

use super::black_scholes::bs_call_price;
use crate::error::{Error, Result};

pub const CONTRACT_MULTIPLIER: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum Strike {
    /// Strike equal to the first price of each path.
    AtTheMoney,
    Fixed(f64),
}

/// Short European call hedged daily. Volatility and rate are per day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub strike: Strike,
    pub maturity_days: usize,
    pub contract_multiplier: f64,
    pub pricing_vol: f64,
    pub rate: f64,
}

impl OptionSpec {
    pub fn at_the_money(maturity_days: usize, pricing_vol: f64) -> Self {
        Self {
            strike: Strike::AtTheMoney,
            maturity_days,
            contract_multiplier: CONTRACT_MULTIPLIER,
            pricing_vol,
            rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.maturity_days == 0 {
            return Err(Error::domain("maturity_days", "must be at least 1"));
        }
        if let Strike::Fixed(k) = self.strike {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::domain("strike", format!("{k} must be positive")));
            }
        }
        if self.contract_multiplier != CONTRACT_MULTIPLIER {
            return Err(Error::domain("contract_multiplier", "one contract is 100 shares"));
        }
        if !(self.pricing_vol >= 0.0 && self.pricing_vol.is_finite()) {
            return Err(Error::domain("pricing_vol", "must be finite and >= 0"));
        }
        if !self.rate.is_finite() {
            return Err(Error::domain("rate", "must be finite"));
        }
        Ok(())
    }

    pub fn strike_for(&self, path: &[f64]) -> f64 {
        match self.strike {
            Strike::AtTheMoney => path[0],
            Strike::Fixed(k) => k,
        }
    }

    /// Contract value (per 100 shares) with `ttm_days` remaining.
    pub fn contract_value(&self, spot: f64, strike: f64, ttm_days: usize) -> Result<f64> {
        Ok(self.contract_multiplier * bs_call_price(spot, strike, self.rate, self.pricing_vol, ttm_days as f64)?)
    }
}

/// Proportional transaction cost on traded value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostLevel(pub f64);

impl CostLevel {
    pub fn new(pi: f64) -> Result<Self> {
        if pi >= 0.0 && pi.is_finite() {
            Ok(Self(pi))
        } else {
            Err(Error::domain("pi", format!("{pi} must be >= 0")))
        }
    }
}

/// Holding carried into the current day, the day's price, and days left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgingEpisodeState {
    pub holding: f64,
    pub price: f64,
    pub ttm_days: usize,
    pub step_index: usize,
}

impl HedgingEpisodeState {
    pub fn reset(path: &[f64], option: &OptionSpec) -> Self {
        Self {
            holding: 0.0,
            price: path[0],
            ttm_days: option.maturity_days,
            step_index: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next: HedgingEpisodeState,
    pub reward: f64,
    /// The requested action lay outside `[0, 100]` and was clamped.
    pub clamped: bool,
}

/// One-period accounting P&L of the short-call-plus-hedge book:
/// `-(V' - V) + H (S' - S) - pi |S' (H' - H)|`.
#[allow(clippy::too_many_arguments)]
pub fn accounting_pnl(
    value: f64,
    next_value: f64,
    holding: f64,
    next_holding: f64,
    price: f64,
    next_price: f64,
    pi: f64,
) -> f64 {
    -(next_value - value) + holding * (next_price - price) - pi * (next_price * (next_holding - holding)).abs()
}

pub fn clamp_action(action: f64) -> Result<(f64, bool)> {
    if action.is_nan() {
        return Err(Error::domain("action", "NaN"));
    }
    let clamped = action.clamp(0.0, CONTRACT_MULTIPLIER);
    Ok((clamped, clamped != action))
}

/// Advances from day `t` to `t + 1`: the book carries `state.holding` over
/// the period, then rebalances to `action` at the new price.
pub fn env_step(
    state: &HedgingEpisodeState,
    action: f64,
    path: &[f64],
    option: &OptionSpec,
    cost: CostLevel,
) -> Result<StepOutcome> {
    let n = option.maturity_days;
    let t = state.step_index;
    if t >= n {
        return Err(Error::EpisodeFinished { step: t, maturity: n });
    }
    if path.len() < n + 1 {
        return Err(Error::InsufficientData {
            what: "path prices for the option maturity",
            needed: n + 1,
            got: path.len(),
        });
    }
    let (action, clamped) = clamp_action(action)?;
    let strike = option.strike_for(path);
    let (s0, s1) = (path[t], path[t + 1]);
    let v0 = option.contract_value(s0, strike, n - t)?;
    let v1 = option.contract_value(s1, strike, n - t - 1)?;
    let reward = accounting_pnl(v0, v1, state.holding, action, s0, s1, cost.0);
    Ok(StepOutcome {
        next: HedgingEpisodeState {
            holding: action,
            price: s1,
            ttm_days: n - t - 1,
            step_index: t + 1,
        },
        reward,
        clamped,
    })
}

/// Cost of establishing the first position from zero at the opening price.
pub fn opening_trade(
    state: &HedgingEpisodeState,
    action: f64,
    cost: CostLevel,
) -> Result<(HedgingEpisodeState, f64, bool)> {
    let (action, clamped) = clamp_action(action)?;
    let reward = -cost.0 * (state.price * (action - state.holding)).abs();
    Ok((
        HedgingEpisodeState {
            holding: action,
            ..*state
        },
        reward,
        clamped,
    ))
}
