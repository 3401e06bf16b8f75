//! Hedging policies: Black-Scholes delta, a no-hedge reference, and
//! inference for exported multilayer-perceptron weights.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::black_scholes::bs_call_delta;
use super::env::{HedgingEpisodeState, OptionSpec, CONTRACT_MULTIPLIER};
use crate::error::{Error, Result};

pub const WEIGHTS_SCHEMA_VERSION: u32 = 1;

/// Maps an observed state to a target holding in shares.
pub trait HedgingPolicy: Sync {
    fn name(&self) -> &str;

    /// `strike` is the resolved strike of the episode.
    fn action(&self, state: &HedgingEpisodeState, option: &OptionSpec, strike: f64) -> Result<f64>;
}

/// Holds `100 * delta` at the observed price and remaining maturity.
#[derive(Debug, Clone, Copy, Default)]
pub struct DeltaHedge;

impl HedgingPolicy for DeltaHedge {
    fn name(&self) -> &str {
        "delta"
    }

    fn action(&self, state: &HedgingEpisodeState, option: &OptionSpec, strike: f64) -> Result<f64> {
        delta_hedge_policy(state, option, strike)
    }
}

pub fn delta_hedge_policy(state: &HedgingEpisodeState, option: &OptionSpec, strike: f64) -> Result<f64> {
    let delta = bs_call_delta(
        state.price,
        strike,
        option.rate,
        option.pricing_vol,
        state.ttm_days as f64,
    )?;
    Ok(option.contract_multiplier * delta)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NeverHedge;

impl HedgingPolicy for NeverHedge {
    fn name(&self) -> &str {
        "never"
    }

    fn action(&self, _: &HedgingEpisodeState, _: &OptionSpec, _: f64) -> Result<f64> {
        Ok(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    None,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::None => x,
        }
    }
}

/// Inference-time batch normalization: `(x - mean) / sqrt(var + eps) * scale + shift`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub batch_norm: Option<BatchNorm>,
    pub activation: Activation,
}

/// Divisors applied to `(holding, price, ttm)` before the first layer.
/// A missing price divisor means "divide by the strike".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputNormalization {
    pub holding_divisor: f64,
    pub price_divisor: Option<f64>,
    pub ttm_divisor: f64,
}

/// Portable actor network exchanged with the trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyWeights {
    pub schema_version: u32,
    pub input: InputNormalization,
    pub layers: Vec<DenseLayer>,
    /// Multiplies the final sigmoid to give a holding in shares.
    pub output_scale: f64,
}

impl PolicyWeights {
    /// Zero-initialised network with the given hidden sizes, batch norm on
    /// every hidden layer and identity running statistics.
    pub fn zeros(hidden: &[usize], maturity_days: usize) -> Self {
        let mut dims = vec![3];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let last = i + 2 == dims.len();
                DenseLayer {
                    in_dim: w[0],
                    out_dim: w[1],
                    weights: vec![0.0; w[0] * w[1]],
                    bias: vec![0.0; w[1]],
                    batch_norm: (!last).then(|| BatchNorm {
                        running_mean: vec![0.0; w[1]],
                        running_var: vec![1.0; w[1]],
                        scale: vec![1.0; w[1]],
                        shift: vec![0.0; w[1]],
                        eps: 1e-5,
                    }),
                    activation: if last { Activation::Sigmoid } else { Activation::Relu },
                }
            })
            .collect();
        Self {
            schema_version: WEIGHTS_SCHEMA_VERSION,
            input: InputNormalization {
                holding_divisor: CONTRACT_MULTIPLIER,
                price_divisor: None,
                ttm_divisor: maturity_days as f64,
            },
            layers,
            output_scale: CONTRACT_MULTIPLIER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::WeightsFormat(msg));
        if self.schema_version != WEIGHTS_SCHEMA_VERSION {
            return fail(format!(
                "schema version {} (expected {WEIGHTS_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let n = &self.input;
        let divisors = [n.holding_divisor, n.ttm_divisor, n.price_divisor.unwrap_or(1.0)];
        if divisors.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return fail("input divisors must be positive".into());
        }
        if self.output_scale != CONTRACT_MULTIPLIER {
            return fail(format!("output scale {} (expected 100)", self.output_scale));
        }
        let Some(last) = self.layers.last() else {
            return fail("no layers".into());
        };
        let mut width = 3;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.in_dim != width {
                return fail(format!(
                    "layer {i} expects {} inputs, previous width is {width}",
                    layer.in_dim
                ));
            }
            if layer.weights.len() != layer.in_dim * layer.out_dim {
                return fail(format!(
                    "layer {i} has {} weights for a {}x{} matrix",
                    layer.weights.len(),
                    layer.out_dim,
                    layer.in_dim
                ));
            }
            if layer.bias.len() != layer.out_dim {
                return fail(format!("layer {i} bias has length {}", layer.bias.len()));
            }
            if layer.weights.iter().chain(&layer.bias).any(|x| !x.is_finite()) {
                return fail(format!("layer {i} has non-finite parameters"));
            }
            if let Some(bn) = &layer.batch_norm {
                let d = layer.out_dim;
                if [&bn.running_mean, &bn.running_var, &bn.scale, &bn.shift]
                    .iter()
                    .any(|v| v.len() != d)
                {
                    return fail(format!("layer {i} batch-norm vectors must have length {d}"));
                }
                if bn.running_var.iter().any(|v| !(v + bn.eps > 0.0)) {
                    return fail(format!("layer {i} batch-norm variance must be positive"));
                }
                if [&bn.running_mean, &bn.scale, &bn.shift]
                    .iter()
                    .any(|v| v.iter().any(|x| !x.is_finite()))
                {
                    return fail(format!("layer {i} batch-norm has non-finite values"));
                }
            }
            width = layer.out_dim;
        }
        if width != 1 {
            return fail(format!("network outputs {width} values, expected 1"));
        }
        if last.activation != Activation::Sigmoid {
            return fail("final activation must be sigmoid".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        crate::data_io::check_json_floats(text).map_err(|e| Error::WeightsFormat(e.to_string()))?;
        let w: Self = serde_json::from_str(text).map_err(|e| Error::WeightsFormat(e.to_string()))?;
        w.validate()?;
        Ok(w)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Deterministic inference pass; the result is a holding in `[0, 100]`.
pub fn policy_forward(weights: &PolicyWeights, state: &HedgingEpisodeState, strike: f64) -> Result<f64> {
    weights.validate()?;
    Ok(forward_unchecked(weights, state, strike))
}

fn forward_unchecked(weights: &PolicyWeights, state: &HedgingEpisodeState, strike: f64) -> f64 {
    let norm = &weights.input;
    let mut x = vec![
        state.holding / norm.holding_divisor,
        state.price / norm.price_divisor.unwrap_or(strike),
        state.ttm_days as f64 / norm.ttm_divisor,
    ];
    for layer in &weights.layers {
        let mut y: Vec<f64> = layer
            .weights
            .chunks_exact(layer.in_dim)
            .zip(&layer.bias)
            .map(|(row, b)| row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect();
        if let Some(bn) = &layer.batch_norm {
            for (j, v) in y.iter_mut().enumerate() {
                *v = (*v - bn.running_mean[j]) / (bn.running_var[j] + bn.eps).sqrt() * bn.scale[j] + bn.shift[j];
            }
        }
        y.iter_mut().for_each(|v| *v = layer.activation.apply(*v));
        x = y;
    }
    (x[0] * weights.output_scale).clamp(0.0, weights.output_scale)
}

/// A validated network used as a policy.
#[derive(Debug, Clone)]
pub struct NeuralPolicy {
    weights: PolicyWeights,
}

impl NeuralPolicy {
    pub fn new(weights: PolicyWeights) -> Result<Self> {
        weights.validate()?;
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &PolicyWeights {
        &self.weights
    }
}

impl HedgingPolicy for NeuralPolicy {
    fn name(&self) -> &str {
        "neural"
    }

    fn action(&self, state: &HedgingEpisodeState, _: &OptionSpec, strike: f64) -> Result<f64> {
        Ok(forward_unchecked(&self.weights, state, strike))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(price: f64, ttm: usize) -> HedgingEpisodeState {
        HedgingEpisodeState {
            holding: 30.0,
            price,
            ttm_days: ttm,
            step_index: 30 - ttm,
        }
    }

    #[test]
    fn zero_network_outputs_half() {
        let w = PolicyWeights::zeros(&[32, 64, 32], 30);
        for s in [state(100.0, 30), state(80.0, 3), state(130.0, 0)] {
            assert_eq!(policy_forward(&w, &s, 100.0).unwrap(), 50.0);
        }
    }

    #[test]
    fn saturated_bias_gives_full_hedge() {
        let mut w = PolicyWeights::zeros(&[32, 64, 32], 30);
        w.layers.last_mut().unwrap().bias[0] = 30.0;
        let out = policy_forward(&w, &state(100.0, 10), 100.0).unwrap();
        assert!(out > 100.0 - 1e-9 && out <= 100.0);
    }

    #[test]
    fn broken_dimension_chain_is_rejected() {
        let mut w = PolicyWeights::zeros(&[32, 64, 32], 30);
        w.layers[1].in_dim = 31;
        assert!(matches!(
            policy_forward(&w, &state(100.0, 5), 100.0),
            Err(Error::WeightsFormat(_))
        ));

        let mut w = PolicyWeights::zeros(&[4], 30);
        w.layers[0].bias.pop();
        assert!(w.validate().is_err());

        let mut w = PolicyWeights::zeros(&[4], 30);
        w.layers[1].activation = Activation::None;
        assert!(w.validate().is_err());

        let mut w = PolicyWeights::zeros(&[4], 30);
        w.layers[0].batch_norm.as_mut().unwrap().scale.push(1.0);
        assert!(w.validate().is_err());
    }

    #[test]
    fn delta_policy_extremes() {
        let opt = OptionSpec::at_the_money(30, 0.01);
        assert!((delta_hedge_policy(&state(200.0, 1), &opt, 100.0).unwrap() - 100.0).abs() < 1e-9);
        assert!(delta_hedge_policy(&state(50.0, 1), &opt, 100.0).unwrap() < 1e-9);
        let atm = delta_hedge_policy(&state(100.0, 30), &opt, 100.0).unwrap();
        assert!((atm - 50.0).abs() < 100.0 * 0.01 * 30f64.sqrt());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut w = PolicyWeights::zeros(&[3, 2], 30);
        w.layers[0].weights = vec![0.1, -0.2, 1.0 / 3.0, 2e-17, 5.5, -7.25, 0.3, 0.6, 0.9];
        let back = PolicyWeights::from_json(&w.to_json().unwrap()).unwrap();
        assert_eq!(back, w);
    }
}
