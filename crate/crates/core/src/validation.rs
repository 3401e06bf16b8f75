//! Model validation: GSL-divergence between symbolized return series and
//! the Welch two-sample test used to compare two sets of scores.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{ModelSpec, ScenarioSet};
use crate::stylized_facts::log_returns;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GslDivConfig {
    /// Alphabet size; bin edges are reference-return quantiles.
    pub n_symbols: usize,
    pub word_lengths: Vec<usize>,
    /// One weight per word length, summing to one.
    pub word_weights: Vec<f64>,
}

impl Default for GslDivConfig {
    fn default() -> Self {
        Self::uniform(5, 6)
    }
}

impl GslDivConfig {
    /// Word lengths `1..=max_len`, equally weighted.
    pub fn uniform(n_symbols: usize, max_len: usize) -> Self {
        Self {
            n_symbols,
            word_lengths: (1..=max_len).collect(),
            word_weights: vec![1.0 / max_len as f64; max_len],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_symbols < 2 {
            return Err(Error::domain("n_symbols", "alphabet needs at least 2 symbols"));
        }
        if self.word_lengths.is_empty() || self.word_lengths.contains(&0) {
            return Err(Error::domain("word_lengths", "must be nonempty with every length >= 1"));
        }
        if self.word_weights.len() != self.word_lengths.len() {
            return Err(Error::domain("word_weights", "one weight per word length"));
        }
        if self.word_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::domain("word_weights", "weights must be >= 0"));
        }
        let sum: f64 = self.word_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::domain("word_weights", format!("weights sum to {sum}, not 1")));
        }
        // Words are packed base-b into a u64.
        let max_len = *self.word_lengths.iter().max().expect("nonempty");
        if (self.n_symbols as f64).powi(max_len as i32) >= u64::MAX as f64 {
            return Err(Error::domain("word_lengths", "alphabet^length overflows the word code"));
        }
        Ok(())
    }
}

/// Quantile bin edges of the reference returns and the symbol mapping.
#[derive(Debug, Clone)]
pub struct Symbolizer {
    edges: Vec<f64>,
}

impl Symbolizer {
    pub fn from_reference(returns: &[f64], n_symbols: usize) -> Result<Self> {
        if returns.is_empty() {
            return Err(Error::InsufficientData {
                what: "reference returns",
                needed: 1,
                got: 0,
            });
        }
        let mut sorted = returns.to_vec();
        sorted.sort_by(f64::total_cmp);
        let edges = (1..n_symbols)
            .map(|k| quantile_sorted(&sorted, k as f64 / n_symbols as f64))
            .collect();
        Ok(Self { edges })
    }

    pub fn symbol(&self, r: f64) -> u64 {
        self.edges.partition_point(|&e| e < r) as u64
    }

    pub fn symbolize(&self, returns: &[f64]) -> Vec<u64> {
        returns.iter().map(|&r| self.symbol(r)).collect()
    }
}

/// Linear-interpolation sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn word_counts(symbols: &[u64], len: usize, base: u64) -> BTreeMap<u64, u64> {
    let mut counts = BTreeMap::new();
    for w in symbols.windows(len) {
        let code = w.iter().fold(0u64, |acc, &s| acc * base + s);
        *counts.entry(code).or_insert(0) += 1;
    }
    counts
}

fn entropy_bits(probs: impl Iterator<Item = f64>) -> f64 {
    -probs.filter(|&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>()
}

/// Subtracted L-divergence for one word length, in bits.
///
/// `2 H(m) - H(f_obs) - H(f_sim)` with `m` the even mixture; zero exactly
/// when both word distributions coincide.
fn divergence_at(obs: &[u64], sim: &[u64], len: usize, base: u64) -> f64 {
    let co = word_counts(obs, len, base);
    let cs = word_counts(sim, len, base);
    let no = (obs.len() + 1 - len) as f64;
    let ns = (sim.len() + 1 - len) as f64;

    let mut joint: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for (&w, &c) in &co {
        joint.entry(w).or_default().0 = c;
    }
    for (&w, &c) in &cs {
        joint.entry(w).or_default().1 = c;
    }
    let h_mix = entropy_bits(joint.values().map(|&(a, b)| (a as f64 / no + b as f64 / ns) / 2.0));
    let h_obs = entropy_bits(joint.values().map(|&(a, _)| a as f64 / no));
    let h_sim = entropy_bits(joint.values().map(|&(_, b)| b as f64 / ns));
    (2.0 * h_mix - h_obs - h_sim).max(0.0)
}

/// GSL-div between a reference (observed) and a simulated price series.
pub fn gsl_div(observed: &[f64], simulated: &[f64], config: &GslDivConfig) -> Result<f64> {
    config.validate()?;
    let r_obs = log_returns(observed)?;
    let symbolizer = Symbolizer::from_reference(&r_obs, config.n_symbols)?;
    gsl_div_symbolized(&symbolizer, &r_obs, simulated, config)
}

fn gsl_div_symbolized(symbolizer: &Symbolizer, r_obs: &[f64], simulated: &[f64], config: &GslDivConfig) -> Result<f64> {
    let r_sim = log_returns(simulated)?;
    let longest = *config.word_lengths.iter().max().expect("validated");
    let shortest = r_obs.len().min(r_sim.len());
    if shortest < longest {
        return Err(Error::InsufficientData {
            what: "returns to form the longest word",
            needed: longest,
            got: shortest,
        });
    }
    let s_obs = symbolizer.symbolize(r_obs);
    if s_obs.iter().all(|&s| s == s_obs[0]) {
        return Err(Error::Degenerate(
            "reference discretization puts all mass in one symbol".into(),
        ));
    }
    let s_sim = symbolizer.symbolize(&r_sim);
    let base = config.n_symbols as u64;
    Ok(config
        .word_lengths
        .iter()
        .zip(&config.word_weights)
        .map(|(&len, &w)| w * divergence_at(&s_obs, &s_sim, len, base))
        .sum())
}

/// One GSL-div score per scenario of `model`, each against `reference`.
///
/// Scenarios have the same number of days as the reference.
pub fn gsl_div_sample(
    model: &ModelSpec,
    reference: &[f64],
    n_scenarios: usize,
    seed: u64,
    config: &GslDivConfig,
) -> Result<Vec<f64>> {
    if n_scenarios == 0 {
        return Err(Error::domain("n_scenarios", "must be at least 1"));
    }
    if reference.len() < 2 {
        return Err(Error::InsufficientData {
            what: "reference prices",
            needed: 2,
            got: reference.len(),
        });
    }
    let scenarios = model.simulate(reference.len() - 1, n_scenarios, seed)?;
    gsl_div_scenarios(&scenarios, reference, config)
}

/// Scores every path of an existing scenario set against `reference`.
pub fn gsl_div_scenarios(scenarios: &ScenarioSet, reference: &[f64], config: &GslDivConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let r_obs = log_returns(reference)?;
    let symbolizer = Symbolizer::from_reference(&r_obs, config.n_symbols)?;
    let rows: Vec<&[f64]> = scenarios.paths().collect();
    rows.into_par_iter()
        .map(|row| gsl_div_symbolized(&symbolizer, &r_obs, row, config))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Welch's unequal-variance two-sample t-test.
pub fn welch_t_test(xs: &[f64], ys: &[f64]) -> Result<WelchResult> {
    for (what, s) in [("first sample", xs), ("second sample", ys)] {
        if s.len() < 2 {
            return Err(Error::InsufficientData {
                what,
                needed: 2,
                got: s.len(),
            });
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("sample", format!("{what} contains non-finite values")));
        }
    }
    let (mx, vx) = mean_var(xs);
    let (my, vy) = mean_var(ys);
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let (sx, sy) = (vx / nx, vy / ny);
    let se2 = sx + sy;
    if !(se2 > 0.0) {
        return Err(Error::Degenerate("both samples have zero variance".into()));
    }
    let t = (mx - my) / se2.sqrt();
    let df = se2 * se2 / (sx * sx / (nx - 1.0) + sy * sy / (ny - 1.0));
    Ok(WelchResult {
        t,
        df,
        p: student_t_two_sided(t, df),
    })
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(x, 0.5 * df, 0.5).clamp(0.0, 1.0)
}

/// Lanczos approximation (g = 7, nine coefficients) of `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    #[allow(clippy::excessive_precision)]
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `I_x(a, b)` by the modified Lentz continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The fraction converges fastest below the mean of the distribution.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Side-by-side GSL-div comparison of two models against one reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub mean_a: f64,
    pub mean_b: f64,
    pub t: f64,
    pub p: f64,
    pub samples_a: Vec<f64>,
    pub samples_b: Vec<f64>,
}

pub fn compare_samples(samples_a: Vec<f64>, samples_b: Vec<f64>) -> Result<ValidationReport> {
    let test = welch_t_test(&samples_a, &samples_b)?;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Ok(ValidationReport {
        mean_a: mean(&samples_a),
        mean_b: mean(&samples_b),
        t: test.t,
        p: test.p,
        samples_a,
        samples_b,
    })
}
