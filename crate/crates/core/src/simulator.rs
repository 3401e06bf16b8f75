//! Daily price-path generators: the Chiarella-Heston agent-based model and
//! the three baselines it nests (GBM, Heston, extended Chiarella).
//!
//! All four share one noise layout (see [`crate::rng`]), so a generator
//! evaluated at a reduction point reproduces the smaller model exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{check_rho, NoiseStream};

/// Log of the default starting price level (100).
pub const DEFAULT_LOG_PRICE: f64 = 4.605_170_185_988_092;

/// The eleven Chiarella-Heston parameters. All rates are per day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Fundamental-trader demand per unit of log mispricing.
    pub kappa: f64,
    /// Momentum-trader demand scale.
    pub beta: f64,
    /// Momentum saturation.
    pub gamma: f64,
    /// Volatility-trader demand scale.
    pub omega: f64,
    /// Fundamental log drift.
    pub g: f64,
    pub sigma_f: f64,
    /// Momentum decay rate.
    pub alpha: f64,
    /// Variance mean-reversion rate.
    pub phi: f64,
    /// Long-run variance.
    pub theta: f64,
    /// Vol-of-vol.
    pub sigma: f64,
    pub rho: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa", self.kappa),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("omega", self.omega),
            ("g", self.g),
            ("sigma_f", self.sigma_f),
            ("alpha", self.alpha),
            ("phi", self.phi),
            ("theta", self.theta),
            ("sigma", self.sigma),
            ("rho", self.rho),
        ] {
            if !v.is_finite() {
                return Err(Error::domain(name, "must be finite"));
            }
        }
        check_momentum(self.gamma, self.alpha)?;
        check_nonneg("sigma_f", self.sigma_f)?;
        check_nonneg("phi", self.phi)?;
        check_nonneg("theta", self.theta)?;
        check_nonneg("sigma", self.sigma)?;
        check_rho(self.rho)
    }
}

/// Starting point of the state `(p, f, m, Σ)`; `p0`, `f0` are log levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub p0: f64,
    pub f0: f64,
    pub m0: f64,
    pub var0: f64,
}

impl InitialState {
    /// Price and fundamental at 100, flat momentum, variance at its long-run level.
    pub fn at_rest(theta: f64) -> Self {
        Self {
            p0: DEFAULT_LOG_PRICE,
            f0: DEFAULT_LOG_PRICE,
            m0: 0.0,
            var0: theta,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.p0.is_finite() && self.f0.is_finite() && self.m0.is_finite()) {
            return Err(Error::domain("init", "p0, f0, m0 must be finite"));
        }
        check_nonneg("var0", self.var0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub mu: f64,
    pub sigma: f64,
    pub p0: f64,
}

/// Heston with a log-price drift `mu`: `Δx = mu + sqrt(Σ) ε_S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub mu: f64,
    pub var0: f64,
    pub phi: f64,
    pub theta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub p0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendedChiarellaParams {
    pub kappa: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Constant noise-trader scale.
    pub sigma_n: f64,
    pub g: f64,
    pub sigma_f: f64,
    pub alpha: f64,
    pub init: InitialState,
}

/// A fully specified generator; also the parameter snapshot carried by a
/// [`ScenarioSet`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelSpec {
    Gbm(GbmParams),
    Heston(HestonParams),
    ExtendedChiarella(ExtendedChiarellaParams),
    ChiarellaHeston { params: ModelParams, init: InitialState },
}

impl ModelSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            ModelSpec::Gbm(_) => "gbm",
            ModelSpec::Heston(_) => "heston",
            ModelSpec::ExtendedChiarella(_) => "extended-chiarella",
            ModelSpec::ChiarellaHeston { .. } => "chiarella-heston",
        }
    }

    pub fn simulate(&self, n_steps: usize, n_paths: usize, seed: u64) -> Result<ScenarioSet> {
        match *self {
            ModelSpec::Gbm(p) => simulate_gbm(p.mu, p.sigma, p.p0, n_steps, n_paths, seed),
            ModelSpec::Heston(h) => simulate_heston(&h, n_steps, n_paths, seed),
            ModelSpec::ExtendedChiarella(e) => simulate_extended_chiarella(&e, n_steps, n_paths, seed),
            ModelSpec::ChiarellaHeston { params, init } => {
                simulate_chiarella_heston(&params, &init, n_steps, n_paths, seed)
            }
        }
    }

    /// Simulates `burn_in + n_steps` steps and keeps the last `n_steps + 1` prices.
    pub fn simulate_after_burn_in(
        &self,
        n_steps: usize,
        n_paths: usize,
        seed: u64,
        burn_in: usize,
    ) -> Result<ScenarioSet> {
        let mut set = self.simulate(n_steps + burn_in, n_paths, seed)?;
        set.drop_leading(burn_in);
        Ok(set)
    }
}

/// `M` price paths (levels, not logs) of identical length `N + 1`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    n_paths: usize,
    path_len: usize,
    prices: Vec<f64>,
    pub seed: u64,
    pub model_tag: String,
    /// Generator parameters; not stored in the binary scenario format.
    pub params: Option<ModelSpec>,
}

impl ScenarioSet {
    pub fn from_rows(rows: Vec<Vec<f64>>, seed: u64, model_tag: impl Into<String>) -> Result<Self> {
        let path_len = rows.first().map(Vec::len).unwrap_or(0);
        let mut prices = Vec::with_capacity(rows.len() * path_len);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != path_len {
                return Err(Error::Format(format!(
                    "path {i} has length {}, expected {path_len}",
                    row.len()
                )));
            }
            prices.extend_from_slice(row);
        }
        Self::from_flat(prices, rows.len(), path_len, seed, model_tag)
    }

    pub fn from_flat(
        prices: Vec<f64>,
        n_paths: usize,
        path_len: usize,
        seed: u64,
        model_tag: impl Into<String>,
    ) -> Result<Self> {
        if prices.len() != n_paths * path_len {
            return Err(Error::Format(format!(
                "{} prices cannot form {n_paths} x {path_len}",
                prices.len()
            )));
        }
        if let Some(i) = prices.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Format(format!(
                "price at path {}, index {} is {} (must be positive and finite)",
                i / path_len.max(1),
                i % path_len.max(1),
                prices[i]
            )));
        }
        Ok(Self {
            n_paths,
            path_len,
            prices,
            seed,
            model_tag: model_tag.into(),
            params: None,
        })
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    /// `N + 1`.
    pub fn path_len(&self) -> usize {
        self.path_len
    }

    pub fn n_steps(&self) -> usize {
        self.path_len.saturating_sub(1)
    }

    pub fn path(&self, i: usize) -> &[f64] {
        &self.prices[i * self.path_len..(i + 1) * self.path_len]
    }

    pub fn paths(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact panics on zero; an empty set has no rows anyway.
        self.prices.chunks_exact(self.path_len.max(1))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.prices
    }

    fn drop_leading(&mut self, k: usize) {
        if k == 0 {
            return;
        }
        let keep = self.path_len - k;
        let mut out = Vec::with_capacity(self.n_paths * keep);
        for row in self.prices.chunks_exact(self.path_len) {
            out.extend_from_slice(&row[k..]);
        }
        self.prices = out;
        self.path_len = keep;
    }
}

/// Per-path log-price recursion shared by every generator.
trait LogDynamics: Sync {
    fn start(&self) -> f64;
    /// Advances internal state by one day and returns the new log price.
    fn step(&self, state: &mut PathState, noise: &crate::rng::StepNoise) -> f64;
    fn init_state(&self) -> PathState;
}

#[derive(Debug, Clone, Copy)]
struct PathState {
    p: f64,
    f: f64,
    m: f64,
    var: f64,
}

/// Agent dynamics with either a stochastic (Heston) or a constant noise scale.
struct Chiarella {
    kappa: f64,
    beta: f64,
    gamma: f64,
    g: f64,
    sigma_f: f64,
    alpha: f64,
    vol: VolatilityTrader,
    init: InitialState,
}

enum VolatilityTrader {
    Stochastic {
        omega: f64,
        phi: f64,
        theta: f64,
        sigma: f64,
        rho: f64,
    },
    Constant {
        sigma_n: f64,
    },
}

impl LogDynamics for Chiarella {
    fn start(&self) -> f64 {
        self.init.p0
    }

    fn init_state(&self) -> PathState {
        PathState {
            p: self.init.p0,
            f: self.init.f0,
            m: self.init.m0,
            var: self.init.var0,
        }
    }

    #[inline]
    fn step(&self, s: &mut PathState, noise: &crate::rng::StepNoise) -> f64 {
        let (noise_scale, eps_s) = match self.vol {
            VolatilityTrader::Stochastic {
                omega,
                phi,
                theta,
                sigma,
                rho,
            } => {
                let (eps_s, eps_v) = noise.correlated(rho);
                let root = s.var.max(0.0).sqrt();
                let scale = omega * root;
                // Full truncation: the clamped variance feeds both square roots.
                s.var = (s.var + phi * (theta - s.var) + sigma * root * eps_v).max(0.0);
                (scale, eps_s)
            }
            VolatilityTrader::Constant { sigma_n } => (sigma_n, noise.z_s),
        };
        let dp = self.kappa * (s.f - s.p) + self.beta * (self.gamma * s.m).tanh() + noise_scale * eps_s;
        s.m = (1.0 - self.alpha) * s.m + self.alpha * dp;
        s.f = s.f + self.g + self.sigma_f * noise.z_f;
        s.p += dp;
        s.p
    }
}

struct LogHeston {
    mu: f64,
    phi: f64,
    theta: f64,
    sigma: f64,
    rho: f64,
    x0: f64,
    var0: f64,
}

impl LogDynamics for LogHeston {
    fn start(&self) -> f64 {
        self.x0
    }

    fn init_state(&self) -> PathState {
        PathState {
            p: self.x0,
            f: 0.0,
            m: 0.0,
            var: self.var0,
        }
    }

    #[inline]
    fn step(&self, s: &mut PathState, noise: &crate::rng::StepNoise) -> f64 {
        let (eps_s, eps_v) = noise.correlated(self.rho);
        let root = s.var.max(0.0).sqrt();
        s.var = (s.var + self.phi * (self.theta - s.var) + self.sigma * root * eps_v).max(0.0);
        s.p += self.mu + root * eps_s;
        s.p
    }
}

struct LogGbm {
    drift: f64,
    sigma: f64,
    x0: f64,
}

impl LogDynamics for LogGbm {
    fn start(&self) -> f64 {
        self.x0
    }

    fn init_state(&self) -> PathState {
        PathState {
            p: self.x0,
            f: 0.0,
            m: 0.0,
            var: 0.0,
        }
    }

    #[inline]
    fn step(&self, s: &mut PathState, noise: &crate::rng::StepNoise) -> f64 {
        s.p += self.drift + self.sigma * noise.z_s;
        s.p
    }
}

fn run_paths<D: LogDynamics>(
    dynamics: &D,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    tag: &str,
) -> Result<ScenarioSet> {
    if n_steps == 0 {
        return Err(Error::domain("n_steps", "must be at least 1"));
    }
    if n_paths == 0 {
        return Err(Error::domain("n_paths", "must be at least 1"));
    }
    let path_len = n_steps + 1;
    let rows: Vec<Result<Vec<f64>>> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut noise = NoiseStream::new(seed, path);
            let mut state = dynamics.init_state();
            let mut row = Vec::with_capacity(path_len);
            row.push(level(dynamics.start(), path, 0)?);
            for step in 1..=n_steps {
                let p = dynamics.step(&mut state, &noise.next_step());
                if !state.var.is_finite() || !state.f.is_finite() || !state.m.is_finite() {
                    return Err(Error::Simulation {
                        path,
                        step,
                        what: "state variable",
                    });
                }
                row.push(level(p, path, step)?);
            }
            Ok(row)
        })
        .collect();

    let mut prices = Vec::with_capacity(n_paths * path_len);
    for row in rows {
        prices.extend(row?);
    }
    Ok(ScenarioSet {
        n_paths,
        path_len,
        prices,
        seed,
        model_tag: tag.to_string(),
        params: None,
    })
}

#[inline]
fn level(log_price: f64, path: usize, step: usize) -> Result<f64> {
    let price = log_price.exp();
    if price.is_finite() && price > 0.0 {
        Ok(price)
    } else {
        Err(Error::Simulation {
            path,
            step,
            what: "price",
        })
    }
}

pub fn simulate_chiarella_heston(
    params: &ModelParams,
    init: &InitialState,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<ScenarioSet> {
    params.validate()?;
    init.validate()?;
    let dynamics = Chiarella {
        kappa: params.kappa,
        beta: params.beta,
        gamma: params.gamma,
        g: params.g,
        sigma_f: params.sigma_f,
        alpha: params.alpha,
        vol: VolatilityTrader::Stochastic {
            omega: params.omega,
            phi: params.phi,
            theta: params.theta,
            sigma: params.sigma,
            rho: params.rho,
        },
        init: *init,
    };
    let mut set = run_paths(&dynamics, n_steps, n_paths, seed, "chiarella-heston")?;
    set.params = Some(ModelSpec::ChiarellaHeston {
        params: *params,
        init: *init,
    });
    Ok(set)
}

pub fn simulate_extended_chiarella(
    p: &ExtendedChiarellaParams,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<ScenarioSet> {
    for (name, v) in [
        ("kappa", p.kappa),
        ("beta", p.beta),
        ("gamma", p.gamma),
        ("sigma_n", p.sigma_n),
        ("g", p.g),
        ("sigma_f", p.sigma_f),
        ("alpha", p.alpha),
    ] {
        if !v.is_finite() {
            return Err(Error::domain(name, "must be finite"));
        }
    }
    check_momentum(p.gamma, p.alpha)?;
    check_nonneg("sigma_n", p.sigma_n)?;
    check_nonneg("sigma_f", p.sigma_f)?;
    p.init.validate()?;
    let dynamics = Chiarella {
        kappa: p.kappa,
        beta: p.beta,
        gamma: p.gamma,
        g: p.g,
        sigma_f: p.sigma_f,
        alpha: p.alpha,
        vol: VolatilityTrader::Constant { sigma_n: p.sigma_n },
        init: p.init,
    };
    let mut set = run_paths(&dynamics, n_steps, n_paths, seed, "extended-chiarella")?;
    set.params = Some(ModelSpec::ExtendedChiarella(*p));
    Ok(set)
}

pub fn simulate_heston(h: &HestonParams, n_steps: usize, n_paths: usize, seed: u64) -> Result<ScenarioSet> {
    if !h.mu.is_finite() {
        return Err(Error::domain("mu", "must be finite"));
    }
    check_nonneg("var0", h.var0)?;
    check_nonneg("phi", h.phi)?;
    check_nonneg("theta", h.theta)?;
    check_nonneg("sigma", h.sigma)?;
    check_rho(h.rho)?;
    check_price(h.p0)?;
    let dynamics = LogHeston {
        mu: h.mu,
        phi: h.phi,
        theta: h.theta,
        sigma: h.sigma,
        rho: h.rho,
        x0: h.p0.ln(),
        var0: h.var0,
    };
    let mut set = run_paths(&dynamics, n_steps, n_paths, seed, "heston")?;
    set.params = Some(ModelSpec::Heston(*h));
    Ok(set)
}

pub fn simulate_gbm(mu: f64, sigma: f64, p0: f64, n_steps: usize, n_paths: usize, seed: u64) -> Result<ScenarioSet> {
    if !mu.is_finite() {
        return Err(Error::domain("mu", "must be finite"));
    }
    check_nonneg("sigma", sigma)?;
    check_price(p0)?;
    let dynamics = LogGbm {
        drift: mu - 0.5 * sigma * sigma,
        sigma,
        x0: p0.ln(),
    };
    let mut set = run_paths(&dynamics, n_steps, n_paths, seed, "gbm")?;
    set.params = Some(ModelSpec::Gbm(GbmParams { mu, sigma, p0 }));
    Ok(set)
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, format!("{v} must be finite and >= 0")))
    }
}

fn check_price(p0: f64) -> Result<()> {
    if p0 > 0.0 && p0.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("p0", format!("{p0} must be positive")))
    }
}

// alpha = 0 is admitted: it is the Heston reduction point (frozen momentum).
fn check_momentum(gamma: f64, alpha: f64) -> Result<()> {
    if gamma <= 0.0 {
        return Err(Error::domain("gamma", format!("{gamma} must be > 0")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain("alpha", format!("{alpha} not in [0, 1]")));
    }
    Ok(())
}
