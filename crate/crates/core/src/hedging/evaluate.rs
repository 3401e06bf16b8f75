use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::env::{env_step, opening_trade, CostLevel, HedgingEpisodeState, OptionSpec};
use super::policy::HedgingPolicy;
use crate::error::{Error, Result};
use crate::simulator::ScenarioSet;

/// Built-in cost grid: 0.01%, 0.1%, 0.2%, 0.4%, 0.6%, 1.0%.
pub const DEFAULT_COST_LEVELS: [f64; 6] = [0.0001, 0.001, 0.002, 0.004, 0.006, 0.01];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOutcome {
    pub pnl: f64,
    /// Contract premium at inception.
    pub premium: f64,
    pub clamped_actions: usize,
}

/// Runs one hedging episode over the first `N + 1` prices of `path`.
///
/// At each day the policy sees the holding carried in, the current price and
/// the remaining maturity, and sets the holding for the next period. The
/// position is liquidated at maturity.
pub fn run_episode(
    policy: &dyn HedgingPolicy,
    path: &[f64],
    option: &OptionSpec,
    cost: CostLevel,
) -> Result<EpisodeOutcome> {
    let n = option.maturity_days;
    if path.len() < n + 1 {
        return Err(Error::InsufficientData {
            what: "path prices for the option maturity",
            needed: n + 1,
            got: path.len(),
        });
    }
    let strike = option.strike_for(path);
    let premium = option.contract_value(path[0], strike, n)?;
    let mut clamped_actions = 0;

    let start = HedgingEpisodeState::reset(path, option);
    let first = policy.action(&start, option, strike)?;
    let (mut state, mut pnl, clamped) = opening_trade(&start, first, cost)?;
    clamped_actions += clamped as usize;

    for t in 0..n {
        let action = if t + 1 == n {
            0.0
        } else {
            let observed = HedgingEpisodeState {
                holding: state.holding,
                price: path[t + 1],
                ttm_days: n - t - 1,
                step_index: t + 1,
            };
            policy.action(&observed, option, strike)?
        };
        let out = env_step(&state, action, path, option, cost)?;
        clamped_actions += out.clamped as usize;
        pnl += out.reward;
        state = out.next;
    }
    Ok(EpisodeOutcome {
        pnl,
        premium,
        clamped_actions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub cost: f64,
    pub mean_pnl: f64,
    pub std_pnl: f64,
    /// Mean of the worst `1 - es_confidence` fraction of episode P&L.
    pub expected_shortfall: f64,
    /// Expected shortfall as a percentage of the mean contract premium.
    pub expected_shortfall_pct: f64,
    pub mean_premium: f64,
    pub clamped_actions: usize,
    /// Per-episode P&L in scenario order.
    pub pnl: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub policy: String,
    pub n_episodes: usize,
    pub maturity_days: usize,
    pub es_confidence: f64,
    pub levels: Vec<CostReport>,
}

pub fn evaluate_policy(
    policy: &dyn HedgingPolicy,
    scenarios: &ScenarioSet,
    option: &OptionSpec,
    costs: &[f64],
    es_confidence: f64,
) -> Result<EvaluationReport> {
    option.validate()?;
    if !(es_confidence > 0.0 && es_confidence < 1.0) {
        return Err(Error::domain("es_confidence", format!("{es_confidence} not in (0, 1)")));
    }
    if scenarios.path_len() != option.maturity_days + 1 {
        return Err(Error::Format(format!(
            "scenario length {} does not match maturity {} + 1",
            scenarios.path_len(),
            option.maturity_days
        )));
    }
    if scenarios.n_paths() == 0 {
        return Err(Error::InsufficientData {
            what: "scenarios",
            needed: 1,
            got: 0,
        });
    }
    let rows: Vec<&[f64]> = scenarios.paths().collect();
    let mut levels = Vec::with_capacity(costs.len());
    for &pi in costs {
        let cost = CostLevel::new(pi)?;
        // Indexed collect keeps scenario order independent of scheduling.
        let outcomes: Vec<EpisodeOutcome> = rows
            .par_iter()
            .map(|row| run_episode(policy, row, option, cost))
            .collect::<Result<_>>()?;
        levels.push(summarize(pi, &outcomes, es_confidence));
    }
    Ok(EvaluationReport {
        policy: policy.name().to_string(),
        n_episodes: rows.len(),
        maturity_days: option.maturity_days,
        es_confidence,
        levels,
    })
}

fn summarize(cost: f64, outcomes: &[EpisodeOutcome], es_confidence: f64) -> CostReport {
    let n = outcomes.len() as f64;
    let pnl: Vec<f64> = outcomes.iter().map(|o| o.pnl).collect();
    let mean_pnl = pnl.iter().sum::<f64>() / n;
    let std_pnl = if outcomes.len() > 1 {
        (pnl.iter().map(|x| (x - mean_pnl).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let expected_shortfall = expected_shortfall(&pnl, es_confidence);
    let mean_premium = outcomes.iter().map(|o| o.premium).sum::<f64>() / n;
    let expected_shortfall_pct = if mean_premium > 0.0 {
        100.0 * expected_shortfall / mean_premium
    } else {
        0.0
    };
    CostReport {
        cost,
        mean_pnl,
        std_pnl,
        expected_shortfall,
        expected_shortfall_pct,
        mean_premium,
        clamped_actions: outcomes.iter().map(|o| o.clamped_actions).sum(),
        pnl,
    }
}

/// Mean of the lowest `ceil((1 - confidence) * n)` values.
pub fn expected_shortfall(pnl: &[f64], confidence: f64) -> f64 {
    if pnl.is_empty() {
        return 0.0;
    }
    let mut sorted = pnl.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) * sorted.len() as f64;
    let k = ((tail - 1e-9).ceil() as usize).clamp(1, sorted.len());
    sorted[..k].iter().sum::<f64>() / k as f64
}

/// Rolling windows of `window + 1` historical prices, each rebased to
/// `initial_price` with its returns preserved.
pub fn build_test_scenarios(prices: &[f64], window: usize, initial_price: f64) -> Result<ScenarioSet> {
    if window == 0 {
        return Err(Error::domain("window", "must be at least 1"));
    }
    if !(initial_price > 0.0 && initial_price.is_finite()) {
        return Err(Error::domain("initial_price", "must be positive"));
    }
    if prices.len() < window + 1 {
        return Err(Error::InsufficientData {
            what: "prices for one rolling window",
            needed: window + 1,
            got: prices.len(),
        });
    }
    if let Some(i) = prices.iter().position(|p| !(*p > 0.0 && p.is_finite())) {
        return Err(Error::domain("prices", format!("price at index {i} must be positive")));
    }
    let count = prices.len() - window;
    let mut flat = Vec::with_capacity(count * (window + 1));
    for start in 0..count {
        let mut level = initial_price;
        flat.push(level);
        for w in prices[start..=start + window].windows(2) {
            level *= w[1] / w[0];
            flat.push(level);
        }
    }
    ScenarioSet::from_flat(flat, count, window + 1, 0, "historical")
}
