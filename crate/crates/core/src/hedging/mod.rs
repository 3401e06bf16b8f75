//! Short-call hedging environment with proportional transaction costs.

pub mod black_scholes;
pub mod env;
pub mod evaluate;
pub mod policy;

pub use black_scholes::{bs_call_delta, bs_call_price};
pub use env::{
    accounting_pnl, env_step, opening_trade, CostLevel, HedgingEpisodeState, OptionSpec, StepOutcome, Strike,
    CONTRACT_MULTIPLIER,
};
pub use evaluate::{
    build_test_scenarios, evaluate_policy, expected_shortfall, run_episode, CostReport, EpisodeOutcome,
    EvaluationReport, DEFAULT_COST_LEVELS,
};
pub use policy::{
    delta_hedge_policy, policy_forward, Activation, BatchNorm, DeltaHedge, DenseLayer, HedgingPolicy,
    InputNormalization, NeuralPolicy, NeverHedge, PolicyWeights,
};
