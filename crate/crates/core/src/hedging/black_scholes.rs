//! European call value and delta. Rate, volatility and time to maturity
//! must share one time unit (the environment uses days).

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

fn check(spot: f64, strike: f64, vol: f64, ttm: f64) -> Result<()> {
    if !(spot > 0.0 && spot.is_finite()) {
        return Err(Error::domain("spot", format!("{spot} must be positive")));
    }
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(Error::domain("strike", format!("{strike} must be positive")));
    }
    if !(vol >= 0.0 && vol.is_finite()) {
        return Err(Error::domain("vol", format!("{vol} must be >= 0")));
    }
    if !(ttm >= 0.0 && ttm.is_finite()) {
        return Err(Error::domain("ttm", format!("{ttm} must be >= 0")));
    }
    Ok(())
}

fn d1_d2(spot: f64, strike: f64, rate: f64, vol: f64, ttm: f64) -> (f64, f64) {
    let sd = vol * ttm.sqrt();
    let d1 = ((spot / strike).ln() + (rate + 0.5 * vol * vol) * ttm) / sd;
    (d1, d1 - sd)
}

pub fn bs_call_price(spot: f64, strike: f64, rate: f64, vol: f64, ttm: f64) -> Result<f64> {
    check(spot, strike, vol, ttm)?;
    if ttm == 0.0 {
        return Ok((spot - strike).max(0.0));
    }
    let discounted = strike * (-rate * ttm).exp();
    if vol == 0.0 {
        return Ok((spot - discounted).max(0.0));
    }
    let (d1, d2) = d1_d2(spot, strike, rate, vol, ttm);
    Ok((spot * norm_cdf(d1) - discounted * norm_cdf(d2)).max(0.0))
}

/// `N(d1)`; at expiry (or zero vol) a step in forward moneyness, 0.5 at the money.
pub fn bs_call_delta(spot: f64, strike: f64, rate: f64, vol: f64, ttm: f64) -> Result<f64> {
    check(spot, strike, vol, ttm)?;
    if ttm == 0.0 || vol == 0.0 {
        let forward_strike = strike * (-rate * ttm).exp();
        return Ok(if spot > forward_strike {
            1.0
        } else if spot < forward_strike {
            0.0
        } else {
            0.5
        });
    }
    Ok(norm_cdf(d1_d2(spot, strike, rate, vol, ttm).0))
}
