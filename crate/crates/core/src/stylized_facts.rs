//! Stylized-fact statistics of daily returns and the weighted distance
//! between simulated and reference facts used as the calibration loss.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::ScenarioSet;

/// Reported tail index when every tail observation equals the threshold.
pub const HILL_CAP: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactsConfig {
    pub tail_fraction: f64,
    pub max_lag: usize,
}

impl Default for FactsConfig {
    fn default() -> Self {
        Self {
            tail_fraction: 0.05,
            max_lag: 20,
        }
    }
}

/// Hill index, volatility, return ACF and squared-return ACF of a series
/// (or their average over a scenario set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StylizedFactsTarget {
    pub hill: f64,
    pub vol: f64,
    pub acf_returns: Vec<f64>,
    pub acf_sq_returns: Vec<f64>,
    pub max_lag: usize,
    pub tail_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceWeights {
    pub w_hill: f64,
    pub w_vol: f64,
    pub w_acf: f64,
    pub w_acf_sq: f64,
}

impl Default for DistanceWeights {
    fn default() -> Self {
        Self {
            w_hill: 1.0,
            w_vol: 1.0,
            w_acf: 1.0,
            w_acf_sq: 1.0,
        }
    }
}

impl DistanceWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.w_hill, self.w_vol, self.w_acf, self.w_acf_sq];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::domain("weights", "each weight must be finite and >= 0"));
        }
        if w.iter().all(|&x| x == 0.0) {
            return Err(Error::domain("weights", "at least one weight must be positive"));
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            w_hill: c * self.w_hill,
            w_vol: c * self.w_vol,
            w_acf: c * self.w_acf,
            w_acf_sq: c * self.w_acf_sq,
        }
    }
}

/// Unweighted component discrepancies and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBreakdown {
    pub hill: f64,
    pub vol: f64,
    pub acf_returns: f64,
    pub acf_sq_returns: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailIndex {
    pub index: f64,
    /// Set when the estimate hit [`HILL_CAP`].
    pub capped: bool,
}

/// `r_t = ln(P_{t+1} / P_t)`.
pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::InsufficientData {
            what: "prices for returns",
            needed: 2,
            got: prices.len(),
        });
    }
    if let Some(i) = prices.iter().position(|p| !(*p > 0.0 && p.is_finite())) {
        return Err(Error::domain(
            "prices",
            format!("price at index {i} is {} (must be positive)", prices[i]),
        ));
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Hill estimate of the tail index of `|returns|` from the
/// `floor(tail_fraction * n)` largest observations.
pub fn hill_estimator(returns: &[f64], tail_fraction: f64) -> Result<TailIndex> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(Error::domain("tail_fraction", format!("{tail_fraction} not in (0, 1)")));
    }
    let n = returns.len();
    let k = (tail_fraction * n as f64).floor() as usize;
    if k < 10 || k >= n {
        return Err(Error::InsufficientData {
            what: "tail observations for the Hill estimator",
            needed: 10,
            got: k,
        });
    }
    let mut abs: Vec<f64> = returns.iter().map(|r| r.abs()).collect();
    // Only the top k + 1 order statistics matter.
    abs.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    let threshold = abs[k];
    if !(threshold > 0.0) {
        return Err(Error::domain("returns", "tail threshold is zero"));
    }
    let xi = abs[..k].iter().map(|x| (x / threshold).ln()).sum::<f64>() / k as f64;
    let index = 1.0 / xi;
    if index.is_finite() && index <= HILL_CAP {
        Ok(TailIndex { index, capped: false })
    } else {
        Ok(TailIndex {
            index: HILL_CAP,
            capped: true,
        })
    }
}

/// Sample autocorrelations at lags `1..=max_lag`.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n <= max_lag + 1 {
        return Err(Error::InsufficientData {
            what: "observations for autocorrelation",
            needed: max_lag + 2,
            got: n,
        });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let denom: f64 = centered.iter().map(|x| x * x).sum();
    if !(denom > n as f64 * rounding_floor(series).powi(2)) {
        return Err(Error::Degenerate("series has zero variance".into()));
    }
    Ok((1..=max_lag)
        .map(|lag| {
            let num: f64 = centered[..n - lag]
                .iter()
                .zip(&centered[lag..])
                .map(|(a, b)| a * b)
                .sum();
            (num / denom).clamp(-1.0, 1.0)
        })
        .collect())
}

/// Sample standard deviation with the `n - 1` denominator.
pub fn realized_volatility(returns: &[f64]) -> Result<f64> {
    let n = returns.len();
    if n < 2 {
        return Err(Error::InsufficientData {
            what: "returns for volatility",
            needed: 2,
            got: n,
        });
    }
    let mean = returns.iter().sum::<f64>() / n as f64;
    let ss: f64 = returns.iter().map(|r| (r - mean) * (r - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    // Spread at the level of rounding noise is a constant series.
    Ok(if sd <= rounding_floor(returns) { 0.0 } else { sd })
}

/// Dispersion indistinguishable from floating-point rounding of `xs`.
fn rounding_floor(xs: &[f64]) -> f64 {
    1e-12 * xs.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Facts of a single price series.
pub fn series_facts(prices: &[f64], cfg: &FactsConfig) -> Result<StylizedFactsTarget> {
    let returns = log_returns(prices)?;
    let squared: Vec<f64> = returns.iter().map(|r| r * r).collect();
    Ok(StylizedFactsTarget {
        hill: hill_estimator(&returns, cfg.tail_fraction)?.index,
        vol: realized_volatility(&returns)?,
        acf_returns: acf(&returns, cfg.max_lag)?,
        acf_sq_returns: acf(&squared, cfg.max_lag)?,
        max_lag: cfg.max_lag,
        tail_fraction: cfg.tail_fraction,
    })
}

/// Reference facts from a historical series of at least 500 prices.
pub fn reference_stats(prices: &[f64], tail_fraction: f64, max_lag: usize) -> Result<StylizedFactsTarget> {
    if prices.len() < 500 {
        return Err(Error::InsufficientData {
            what: "historical observations",
            needed: 500,
            got: prices.len(),
        });
    }
    series_facts(prices, &FactsConfig { tail_fraction, max_lag })
}

/// Per-path facts averaged across all paths of a scenario set.
pub fn scenario_facts(scenarios: &ScenarioSet, cfg: &FactsConfig) -> Result<StylizedFactsTarget> {
    let m = scenarios.n_paths();
    if m == 0 {
        return Err(Error::InsufficientData {
            what: "scenario paths",
            needed: 1,
            got: 0,
        });
    }
    let per_path: Vec<Result<StylizedFactsTarget>> = scenarios
        .paths()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|row| series_facts(row, cfg))
        .collect();

    let lags = cfg.max_lag;
    let mut acc = StylizedFactsTarget {
        hill: 0.0,
        vol: 0.0,
        acf_returns: vec![0.0; lags],
        acf_sq_returns: vec![0.0; lags],
        max_lag: lags,
        tail_fraction: cfg.tail_fraction,
    };
    for facts in per_path {
        let f = facts?;
        acc.hill += f.hill;
        acc.vol += f.vol;
        for (a, x) in acc.acf_returns.iter_mut().zip(&f.acf_returns) {
            *a += x;
        }
        for (a, x) in acc.acf_sq_returns.iter_mut().zip(&f.acf_sq_returns) {
            *a += x;
        }
    }
    let inv = 1.0 / m as f64;
    acc.hill *= inv;
    acc.vol *= inv;
    acc.acf_returns.iter_mut().for_each(|a| *a *= inv);
    acc.acf_sq_returns.iter_mut().for_each(|a| *a *= inv);
    Ok(acc)
}

/// Weighted discrepancy between simulated and reference facts.
///
/// Scale statistics (Hill index, volatility) use relative error; the ACF
/// curves use the mean absolute difference over lags.
pub fn facts_distance(
    simulated: &StylizedFactsTarget,
    target: &StylizedFactsTarget,
    weights: &DistanceWeights,
) -> Result<DistanceBreakdown> {
    weights.validate()?;
    if simulated.acf_returns.len() != target.acf_returns.len()
        || simulated.acf_sq_returns.len() != target.acf_sq_returns.len()
    {
        return Err(Error::Format(format!(
            "lag mismatch: simulated {} vs target {}",
            simulated.max_lag, target.max_lag
        )));
    }
    if !(target.hill > 0.0) {
        return Err(Error::Degenerate("target Hill index must be positive".into()));
    }
    if !(target.vol > 0.0) {
        return Err(Error::Degenerate("target volatility must be positive".into()));
    }
    let hill = (simulated.hill - target.hill).abs() / target.hill;
    let vol = (simulated.vol - target.vol).abs() / target.vol;
    let acf_returns = mean_abs_diff(&simulated.acf_returns, &target.acf_returns);
    let acf_sq_returns = mean_abs_diff(&simulated.acf_sq_returns, &target.acf_sq_returns);
    let total =
        weights.w_hill * hill + weights.w_vol * vol + weights.w_acf * acf_returns + weights.w_acf_sq * acf_sq_returns;
    Ok(DistanceBreakdown {
        hill,
        vol,
        acf_returns,
        acf_sq_returns,
        total,
    })
}

pub fn stylized_facts_distance(
    scenarios: &ScenarioSet,
    target: &StylizedFactsTarget,
    weights: &DistanceWeights,
    cfg: &FactsConfig,
) -> Result<DistanceBreakdown> {
    weights.validate()?;
    let simulated = scenario_facts(scenarios, cfg)?;
    facts_distance(&simulated, target, weights)
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::NoiseStream;
    use crate::simulator::simulate_gbm;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut s = NoiseStream::new(seed, 0);
        (0..n).map(|_| s.next_step().z_s).collect()
    }

    fn symmetric_pareto(alpha: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u: f64 = 1.0 - rng.random::<f64>();
                let x = u.powf(-1.0 / alpha);
                if rng.random::<bool>() {
                    x
                } else {
                    -x
                }
            })
            .collect()
    }

    #[test]
    fn log_returns_examples() {
        assert_eq!(log_returns(&[100.0, 100.0, 100.0]).unwrap(), vec![0.0, 0.0]);
        let r = log_returns(&[100.0, 100.0 * 0.01f64.exp()]).unwrap();
        assert!((r[0] - 0.01).abs() < 1e-15);
        let e = std::f64::consts::E;
        let r = log_returns(&[1.0, e, e * e]).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15 && (r[1] - 1.0).abs() < 1e-15);
        assert!(log_returns(&[1.0, -1.0]).is_err());
        assert!(log_returns(&[1.0]).is_err());
    }

    #[test]
    fn hill_recovers_pareto_index() {
        for alpha in [2.0, 3.0] {
            let xs = symmetric_pareto(alpha, 100_000, alpha as u64);
            let est = hill_estimator(&xs, 0.05).unwrap();
            assert!((est.index / alpha - 1.0).abs() < 0.1, "alpha {alpha}: {}", est.index);
        }
    }

    #[test]
    fn hill_degenerate_tail_is_capped() {
        let xs: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
        let est = hill_estimator(&xs, 0.05).unwrap();
        assert!(est.capped);
        assert_eq!(est.index, HILL_CAP);
    }

    #[test]
    fn hill_error_paths() {
        assert!(matches!(
            hill_estimator(&normals(100, 1), 0.05),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(
            hill_estimator(&vec![0.0; 1000], 0.05),
            Err(Error::Domain { .. })
        ));
        assert!(hill_estimator(&normals(1000, 1), 1.0).is_err());
    }

    #[test]
    fn acf_white_noise_inside_band() {
        let n = 100_000;
        let rho = acf(&normals(n, 2), 20).unwrap();
        let band = 1.5 * 3.0 / (n as f64).sqrt();
        assert!(rho.iter().all(|r| r.abs() < band), "{rho:?}");
    }

    #[test]
    fn acf_alternating_series() {
        let xs: Vec<f64> = (0..1000).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let rho = acf(&xs, 2).unwrap();
        assert!((rho[0] + 1.0).abs() < 2.0 / 1000.0);
        assert!((rho[1] - 1.0).abs() < 3.0 / 1000.0);
    }

    #[test]
    fn acf_ar1_closed_form() {
        let z = normals(100_000, 3);
        let mut x = vec![0.0; z.len()];
        for t in 1..z.len() {
            x[t] = 0.5 * x[t - 1] + z[t];
        }
        let rho = acf(&x, 5).unwrap();
        for (lag, r) in rho.iter().enumerate() {
            assert!((r - 0.5f64.powi(lag as i32 + 1)).abs() < 0.02);
        }
    }

    #[test]
    fn acf_zero_variance_is_degenerate() {
        assert!(matches!(acf(&[1.0; 50], 5), Err(Error::Degenerate(_))));
        assert!(matches!(acf(&[1.0, 2.0, 3.0], 5), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn volatility_examples() {
        assert_eq!(realized_volatility(&[0.01; 10]).unwrap(), 0.0);
        let c = 0.02;
        let xs: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { c } else { -c }).collect();
        let want = c * (10.0f64 / 9.0).sqrt();
        assert!((realized_volatility(&xs).unwrap() - want).abs() < 1e-15);

        let set = simulate_gbm(0.0, 0.01, 100.0, 100_000, 1, 4).unwrap();
        let v = realized_volatility(&log_returns(set.path(0)).unwrap()).unwrap();
        assert!((v / 0.01 - 1.0).abs() < 0.02);
    }

    #[test]
    fn reference_stats_examples() {
        let expo: Vec<f64> = (0..600).map(|t| 100.0 * (0.001 * t as f64).exp()).collect();
        assert!(reference_stats(&expo, 0.05, 20).is_err());
        assert!(matches!(
            reference_stats(&expo[..100], 0.05, 20),
            Err(Error::InsufficientData { .. })
        ));

        let gbm = simulate_gbm(0.0, 0.01, 100.0, 20_000, 1, 9).unwrap();
        let facts = reference_stats(gbm.path(0), 0.05, 20).unwrap();
        let band = 1.96 / 20_000f64.sqrt() * 1.5;
        assert!(
            facts.acf_sq_returns.iter().all(|r| r.abs() < band),
            "{:?}",
            facts.acf_sq_returns
        );
    }

    #[test]
    fn self_distance_is_zero() {
        let set = simulate_gbm(0.0, 0.01, 100.0, 3000, 1, 5).unwrap();
        let cfg = FactsConfig::default();
        let target = series_facts(set.path(0), &cfg).unwrap();
        let d = stylized_facts_distance(&set, &target, &DistanceWeights::default(), &cfg).unwrap();
        assert_eq!(d.total, 0.0);
    }

    #[test]
    fn weights_validation() {
        assert!(DistanceWeights {
            w_hill: 0.0,
            w_vol: 0.0,
            w_acf: 0.0,
            w_acf_sq: 0.0
        }
        .validate()
        .is_err());
        assert!(DistanceWeights {
            w_hill: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn hill_is_scale_invariant(seed in 0u64..1000, c in 1e-3f64..1e3) {
            let xs = symmetric_pareto(3.0, 2000, seed);
            let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
            let a = hill_estimator(&xs, 0.05).unwrap().index;
            let b = hill_estimator(&scaled, 0.05).unwrap().index;
            prop_assert!((a - b).abs() <= 1e-9 * a);
        }

        #[test]
        fn volatility_is_homogeneous(seed in 0u64..1000, c in -50.0f64..50.0) {
            let xs = normals(200, seed);
            let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
            let a = realized_volatility(&xs).unwrap();
            let b = realized_volatility(&scaled).unwrap();
            prop_assert!((b - c.abs() * a).abs() <= 1e-12 * (1.0 + b));
        }

        #[test]
        fn acf_bounded(seed in 0u64..1000, lag in 1usize..30) {
            let xs = symmetric_pareto(1.5, 300, seed);
            for r in acf(&xs, lag).unwrap() {
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }

        #[test]
        fn distance_nonnegative_and_homogeneous_in_weights(
            seed in 0u64..200,
            w in proptest::array::uniform4(0.0f64..5.0),
            c in 0.01f64..100.0,
        ) {
            prop_assume!(w.iter().any(|&x| x > 0.0));
            let weights = DistanceWeights { w_hill: w[0], w_vol: w[1], w_acf: w[2], w_acf_sq: w[3] };
            let cfg = FactsConfig::default();
            let a = simulate_gbm(0.0, 0.01, 100.0, 600, 1, seed).unwrap();
            let b = simulate_gbm(0.0, 0.015, 100.0, 600, 1, seed + 1).unwrap();
            let sa = series_facts(a.path(0), &cfg).unwrap();
            let sb = series_facts(b.path(0), &cfg).unwrap();
            let d = facts_distance(&sa, &sb, &weights).unwrap();
            let dc = facts_distance(&sa, &sb, &weights.scaled(c)).unwrap();
            prop_assert!(d.total >= 0.0);
            prop_assert!((dc.total - c * d.total).abs() <= 1e-12 * dc.total.max(1e-300));
        }
    }
}
