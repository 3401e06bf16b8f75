//! Parameter estimation: moments taken directly from history plus an
//! exhaustive grid search over the stylized-facts distance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::simulator::{
    ExtendedChiarellaParams, GbmParams, HestonParams, InitialState, ModelParams, ModelSpec, DEFAULT_LOG_PRICE,
};
use crate::stylized_facts::{
    facts_distance, log_returns, reference_stats, scenario_facts, DistanceBreakdown, DistanceWeights, FactsConfig,
    StylizedFactsTarget,
};

pub const MOMENTUM_ALPHA: f64 = 1.0 / 6.0;
pub const MOMENTUM_GAMMA: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedParams {
    pub alpha: f64,
    pub gamma: f64,
    /// Mean daily log return.
    pub mu: f64,
    /// Volatility-adjusted growth `mu - sigma_f^2 / 2`.
    pub g: f64,
    pub sigma_f: f64,
    /// Dispersion of the rolling volatility.
    pub sigma: f64,
    pub rho: f64,
}

/// Moments of a daily price history.
///
/// `rho` correlates the log return over each `vol_window`-day block with the
/// change in trailing `vol_window`-day volatility across that block.
pub fn fixed_params_from_history(prices: &[f64], vol_window: usize) -> Result<FixedParams> {
    if vol_window < 2 {
        return Err(Error::domain("vol_window", "must be at least 2"));
    }
    let needed = (3 * vol_window + 1).max(vol_window + 2);
    if prices.len() < needed {
        return Err(Error::InsufficientData {
            what: "prices for rolling-volatility moments",
            needed,
            got: prices.len(),
        });
    }
    let r = log_returns(prices)?;
    let mu = mean(&r);
    let sigma_f = sample_std(&r);
    let floor = 1e-12 * r.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(mu.abs());
    if sigma_f <= floor {
        return Err(Error::Degenerate(
            "constant returns: volatility moments undefined".into(),
        ));
    }

    // v[i] is the sample std of r[i..i + w].
    let w = vol_window;
    let v: Vec<f64> = r.windows(w).map(sample_std).collect();
    let sigma = sample_std(&v);

    let mut block = Vec::new();
    let mut change = Vec::new();
    let mut cum = 0.0;
    let cums: Vec<f64> = std::iter::once(0.0)
        .chain(r.iter().map(|x| {
            cum += x;
            cum
        }))
        .collect();
    // Block r[t..t + w]; volatility before it is v[t - w], after it v[t + w].
    for t in w..=r.len() - 2 * w {
        block.push(cums[t + w] - cums[t]);
        change.push(v[t + w] - v[t - w]);
    }
    let rho = pearson(&block, &change)
        .ok_or_else(|| Error::Degenerate("rolling volatility is constant: rho undefined".into()))?;

    Ok(FixedParams {
        alpha: MOMENTUM_ALPHA,
        gamma: MOMENTUM_GAMMA,
        mu,
        g: mu - 0.5 * sigma_f * sigma_f,
        sigma_f,
        sigma,
        rho,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    let scale = (a.len() as f64) * 1e-24 * (ma * ma + mb * mb).max(f64::MIN_POSITIVE);
    if saa <= scale || sbb <= scale {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Levels of one grid axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisSpec {
    Levels(Vec<f64>),
    /// `min, min + step, ...` up to `max` inclusive.
    Linear {
        min: f64,
        max: f64,
        step: f64,
    },
    LogSpaced {
        min: f64,
        max: f64,
        n: usize,
    },
}

impl AxisSpec {
    pub fn levels(&self) -> Result<Vec<f64>> {
        let out = match *self {
            AxisSpec::Levels(ref v) => v.clone(),
            AxisSpec::Linear { min, max, step } => {
                if !(step > 0.0) || !(max >= min) {
                    return Err(Error::domain(
                        "grid axis",
                        format!("bad linear axis {min}..{max} by {step}"),
                    ));
                }
                let n = ((max - min) / step + 1e-9).floor() as usize + 1;
                (0..n).map(|i| min + i as f64 * step).collect()
            }
            AxisSpec::LogSpaced { min, max, n } => {
                if !(min > 0.0 && max >= min) || n == 0 {
                    return Err(Error::domain("grid axis", format!("bad log axis {min}..{max} x {n}")));
                }
                if n == 1 {
                    vec![min]
                } else {
                    let (a, b) = (min.ln(), max.ln());
                    (0..n)
                        .map(|i| {
                            if i + 1 == n {
                                max
                            } else {
                                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                            }
                        })
                        .collect()
                }
            }
        };
        if out.is_empty() {
            return Err(Error::domain("grid axis", "must not be empty"));
        }
        if let Some(x) = out.iter().find(|x| !x.is_finite()) {
            return Err(Error::domain("grid axis", format!("level {x} is not finite")));
        }
        Ok(out)
    }
}

fn log_axis(min: f64, max: f64, n: usize) -> AxisSpec {
    AxisSpec::LogSpaced { min, max, n }
}

/// Monte-Carlo effort and seeding shared by every grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchBudget {
    pub replications: usize,
    pub paths_per_replication: usize,
    pub steps_per_path: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            replications: 3,
            paths_per_replication: 16,
            steps_per_path: 3000,
            burn_in: 250,
            seed: 42,
        }
    }
}

impl SearchBudget {
    fn validate(&self) -> Result<()> {
        if self.replications == 0 || self.paths_per_replication == 0 {
            return Err(Error::domain("budget", "replications and paths must be at least 1"));
        }
        if self.steps_per_path < 2 {
            return Err(Error::domain("steps_per_path", "must be at least 2"));
        }
        Ok(())
    }

    /// Replication `r` uses the same stream at every grid point.
    pub fn replication_seed(&self, r: usize) -> u64 {
        derive_seed(self.seed, &format!("calibration/replication/{r}"))
    }
}

/// Chiarella-Heston grid over `(kappa, beta, omega, theta, phi)`.
///
/// A missing `theta` axis defaults to five log-spaced levels spanning
/// `sigma_f^2 / 4 ..= 4 sigma_f^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub kappa: AxisSpec,
    pub beta: AxisSpec,
    pub omega: AxisSpec,
    pub theta: Option<AxisSpec>,
    pub phi: AxisSpec,
    #[serde(flatten)]
    pub budget: SearchBudget,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            kappa: log_axis(0.01, 0.5, 6),
            beta: log_axis(0.01, 1.0, 6),
            omega: log_axis(0.1, 3.0, 6),
            theta: None,
            phi: log_axis(0.01, 0.5, 5),
            budget: SearchBudget::default(),
        }
    }
}

impl GridSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn axes(&self, fixed: &FixedParams) -> Result<Vec<GridAxis>> {
        let s2 = fixed.sigma_f * fixed.sigma_f;
        let theta = self.theta.clone().unwrap_or(log_axis(s2 / 4.0, 4.0 * s2, 5));
        let axes = vec![
            GridAxis::new("kappa", self.kappa.levels()?),
            GridAxis::new("beta", self.beta.levels()?),
            GridAxis::new("omega", self.omega.levels()?),
            GridAxis::new("theta", theta.levels()?),
            GridAxis::new("phi", self.phi.levels()?),
        ];
        for a in &axes[3..] {
            if let Some(x) = a.levels.iter().find(|x| **x < 0.0) {
                return Err(Error::domain("grid axis", format!("{} level {x} must be >= 0", a.name)));
            }
        }
        Ok(axes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub levels: Vec<f64>,
}

impl GridAxis {
    pub fn new(name: &str, levels: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            levels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub index: Vec<usize>,
    pub coords: Vec<f64>,
    /// Mean distance over replications; infinite when the point failed.
    #[serde(with = "finite_or_null")]
    pub mean_distance: f64,
    #[serde(with = "finite_or_null")]
    pub std_distance: f64,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub data_hash: String,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub model: String,
    pub axes: Vec<String>,
    pub best_params: ModelSpec,
    pub best_coords: Vec<f64>,
    #[serde(with = "finite_or_null")]
    pub best_distance: f64,
    pub table: Vec<GridRow>,
    pub provenance: Provenance,
}

impl CalibrationResult {
    /// Table as CSV: axis columns, then mean, std and diagnostic.
    pub fn table_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = self.axes.clone();
        header.extend(["mean_distance", "std_distance", "diagnostic"].map(String::from));
        w.write_record(&header)?;
        for row in &self.table {
            let mut rec: Vec<String> = row.coords.iter().map(|c| format!("{c:?}")).collect();
            rec.push(format!("{:?}", row.mean_distance));
            rec.push(format!("{:?}", row.std_distance));
            rec.push(row.diagnostic.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Outcome of an exhaustive search, before it is tied to a model.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    pub axes: Vec<GridAxis>,
    pub rows: Vec<GridRow>,
    pub best: usize,
}

/// Evaluates `score(coords, replication)` at every grid point and
/// replication. Rows follow lexicographic index order with the first axis
/// most significant; the argmin is the first row attaining the minimum.
pub fn grid_search<F>(axes: &[GridAxis], replications: usize, score: F) -> Result<GridSearch>
where
    F: Fn(&[f64], usize) -> Result<f64> + Sync,
{
    if axes.is_empty() || replications == 0 {
        return Err(Error::domain("grid", "needs at least one axis and one replication"));
    }
    if let Some(a) = axes.iter().find(|a| a.levels.is_empty()) {
        return Err(Error::domain("grid axis", format!("{} is empty", a.name)));
    }
    let n_points: usize = axes.iter().map(|a| a.levels.len()).product();
    let index_of = |mut k: usize| {
        let mut idx = vec![0; axes.len()];
        for (slot, a) in idx.iter_mut().zip(axes).rev() {
            *slot = k % a.levels.len();
            k /= a.levels.len();
        }
        idx
    };

    let scores: Vec<std::result::Result<f64, String>> = (0..n_points * replications)
        .into_par_iter()
        .map(|job| {
            let idx = index_of(job / replications);
            let coords: Vec<f64> = idx.iter().zip(axes).map(|(&i, a)| a.levels[i]).collect();
            match score(&coords, job % replications) {
                Ok(d) if d.is_finite() => Ok(d),
                Ok(d) => Err(format!("distance {d}")),
                Err(e) => Err(e.to_string()),
            }
        })
        .collect();

    let mut rows = Vec::with_capacity(n_points);
    for (k, chunk) in scores.chunks(replications).enumerate() {
        let index = index_of(k);
        let coords = index.iter().zip(axes).map(|(&i, a)| a.levels[i]).collect();
        let failure = chunk
            .iter()
            .enumerate()
            .find_map(|(r, s)| s.as_ref().err().map(|e| (r, e)));
        let row = match failure {
            Some((r, e)) => GridRow {
                index,
                coords,
                mean_distance: f64::INFINITY,
                std_distance: f64::INFINITY,
                diagnostic: Some(format!("replication {r}: {e}")),
            },
            None => {
                let d: Vec<f64> = chunk.iter().map(|s| *s.as_ref().unwrap()).collect();
                let m = mean(&d);
                let sd = if d.len() > 1 { sample_std(&d) } else { 0.0 };
                GridRow {
                    index,
                    coords,
                    mean_distance: m,
                    std_distance: sd,
                    diagnostic: None,
                }
            }
        };
        rows.push(row);
    }
    let mut best = 0;
    for (k, row) in rows.iter().enumerate() {
        if row.mean_distance < rows[best].mean_distance {
            best = k;
        }
    }
    Ok(GridSearch {
        axes: axes.to_vec(),
        rows,
        best,
    })
}

/// Mean stylized-facts distance breakdown of `spec` over the budget's
/// replications.
pub fn model_distance(
    spec: &ModelSpec,
    target: &StylizedFactsTarget,
    weights: &DistanceWeights,
    budget: &SearchBudget,
) -> Result<DistanceBreakdown> {
    let mut acc = DistanceBreakdown {
        hill: 0.0,
        vol: 0.0,
        acf_returns: 0.0,
        acf_sq_returns: 0.0,
        total: 0.0,
    };
    for r in 0..budget.replications {
        let d = replication_distance(spec, target, weights, budget, r)?;
        acc.hill += d.hill;
        acc.vol += d.vol;
        acc.acf_returns += d.acf_returns;
        acc.acf_sq_returns += d.acf_sq_returns;
        acc.total += d.total;
    }
    let k = budget.replications as f64;
    acc.hill /= k;
    acc.vol /= k;
    acc.acf_returns /= k;
    acc.acf_sq_returns /= k;
    acc.total /= k;
    Ok(acc)
}

fn replication_distance(
    spec: &ModelSpec,
    target: &StylizedFactsTarget,
    weights: &DistanceWeights,
    budget: &SearchBudget,
    replication: usize,
) -> Result<DistanceBreakdown> {
    let cfg = FactsConfig {
        tail_fraction: target.tail_fraction,
        max_lag: target.max_lag,
    };
    let set = spec.simulate_after_burn_in(
        budget.steps_per_path,
        budget.paths_per_replication,
        budget.replication_seed(replication),
        budget.burn_in,
    )?;
    facts_distance(&scenario_facts(&set, &cfg)?, target, weights)
}

fn calibrate_with<B>(
    model: &str,
    axes: Vec<GridAxis>,
    target: &StylizedFactsTarget,
    weights: &DistanceWeights,
    budget: &SearchBudget,
    provenance: Provenance,
    build: B,
) -> Result<CalibrationResult>
where
    B: Fn(&[f64]) -> ModelSpec + Sync,
{
    weights.validate()?;
    budget.validate()?;
    let search = grid_search(&axes, budget.replications, |coords, r| {
        Ok(replication_distance(&build(coords), target, weights, budget, r)?.total)
    })?;
    let best = &search.rows[search.best];
    Ok(CalibrationResult {
        model: model.to_string(),
        axes: axes.iter().map(|a| a.name.clone()).collect(),
        best_params: build(&best.coords),
        best_coords: best.coords.clone(),
        best_distance: best.mean_distance,
        table: search.rows,
        provenance,
    })
}

pub fn chiarella_heston_spec(fixed: &FixedParams, coords: &[f64], p0: f64) -> ModelSpec {
    let [kappa, beta, omega, theta, phi] = coords[..] else {
        panic!("five Chiarella-Heston coordinates expected");
    };
    ModelSpec::ChiarellaHeston {
        params: ModelParams {
            kappa,
            beta,
            gamma: fixed.gamma,
            omega,
            g: fixed.g,
            sigma_f: fixed.sigma_f,
            alpha: fixed.alpha,
            phi,
            theta,
            sigma: fixed.sigma,
            rho: fixed.rho,
        },
        init: InitialState {
            p0,
            f0: p0,
            m0: 0.0,
            var0: theta,
        },
    }
}

pub fn grid_search_calibrate(
    grid: &GridSpec,
    target: &StylizedFactsTarget,
    fixed: &FixedParams,
    weights: &DistanceWeights,
    provenance: Provenance,
) -> Result<CalibrationResult> {
    let axes = grid.axes(fixed)?;
    calibrate_with(
        "chiarella-heston",
        axes,
        target,
        weights,
        &grid.budget,
        provenance,
        |c| chiarella_heston_spec(fixed, c, DEFAULT_LOG_PRICE),
    )
}

/// Axes of the three reference models, scaled to the data's volatility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineGrids {
    /// GBM volatility as multiples of `sigma_f`.
    pub gbm_sigma: AxisSpec,
    pub heston_phi: AxisSpec,
    /// Long-run variance as multiples of `sigma_f^2`.
    pub heston_theta: AxisSpec,
    /// Vol-of-vol as multiples of `sigma_f`.
    pub heston_sigma: AxisSpec,
    pub heston_rho: AxisSpec,
    pub ec_kappa: AxisSpec,
    pub ec_beta: AxisSpec,
    /// Noise-trader scale as multiples of `sigma_f`.
    pub ec_sigma_n: AxisSpec,
}

impl Default for BaselineGrids {
    fn default() -> Self {
        Self {
            gbm_sigma: log_axis(0.5, 2.0, 9),
            heston_phi: log_axis(0.01, 0.5, 5),
            heston_theta: log_axis(0.25, 4.0, 5),
            heston_sigma: log_axis(0.02, 0.2, 4),
            heston_rho: AxisSpec::Levels(vec![-0.8, -0.4, 0.0]),
            ec_kappa: log_axis(0.01, 0.5, 6),
            ec_beta: log_axis(0.01, 1.0, 6),
            ec_sigma_n: log_axis(0.5, 2.0, 5),
        }
    }
}

fn scaled(axis: &AxisSpec, by: f64) -> Result<Vec<f64>> {
    Ok(axis.levels()?.into_iter().map(|x| x * by).collect())
}

pub fn calibrate_gbm(
    grids: &BaselineGrids,
    target: &StylizedFactsTarget,
    fixed: &FixedParams,
    weights: &DistanceWeights,
    budget: &SearchBudget,
    provenance: Provenance,
) -> Result<CalibrationResult> {
    let axes = vec![GridAxis::new("sigma", scaled(&grids.gbm_sigma, fixed.sigma_f)?)];
    let mu = fixed.mu;
    calibrate_with("gbm", axes, target, weights, budget, provenance, |c| {
        ModelSpec::Gbm(GbmParams {
            mu: mu + 0.5 * c[0] * c[0],
            sigma: c[0],
            p0: 100.0,
        })
    })
}

pub fn calibrate_heston(
    grids: &BaselineGrids,
    target: &StylizedFactsTarget,
    fixed: &FixedParams,
    weights: &DistanceWeights,
    budget: &SearchBudget,
    provenance: Provenance,
) -> Result<CalibrationResult> {
    let s = fixed.sigma_f;
    let axes = vec![
        GridAxis::new("phi", grids.heston_phi.levels()?),
        GridAxis::new("theta", scaled(&grids.heston_theta, s * s)?),
        GridAxis::new("sigma", scaled(&grids.heston_sigma, s)?),
        GridAxis::new("rho", grids.heston_rho.levels()?),
    ];
    let mu = fixed.mu;
    calibrate_with("heston", axes, target, weights, budget, provenance, |c| {
        ModelSpec::Heston(HestonParams {
            mu,
            var0: c[1],
            phi: c[0],
            theta: c[1],
            sigma: c[2],
            rho: c[3],
            p0: 100.0,
        })
    })
}

pub fn calibrate_extended_chiarella(
    grids: &BaselineGrids,
    target: &StylizedFactsTarget,
    fixed: &FixedParams,
    weights: &DistanceWeights,
    budget: &SearchBudget,
    provenance: Provenance,
) -> Result<CalibrationResult> {
    let axes = vec![
        GridAxis::new("kappa", grids.ec_kappa.levels()?),
        GridAxis::new("beta", grids.ec_beta.levels()?),
        GridAxis::new("sigma_n", scaled(&grids.ec_sigma_n, fixed.sigma_f)?),
    ];
    calibrate_with("extended-chiarella", axes, target, weights, budget, provenance, |c| {
        ModelSpec::ExtendedChiarella(ExtendedChiarellaParams {
            kappa: c[0],
            beta: c[1],
            gamma: fixed.gamma,
            sigma_n: c[2],
            g: fixed.g,
            sigma_f: fixed.sigma_f,
            alpha: fixed.alpha,
            init: InitialState::at_rest(0.0),
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub breakdown: DistanceBreakdown,
}

/// Calibration of all four models against one history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub fixed: FixedParams,
    pub target: StylizedFactsTarget,
    pub results: Vec<CalibrationResult>,
    /// Distance components at each model's selected point.
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSetup {
    pub grid: GridSpec,
    pub baselines: BaselineGrids,
    pub facts: FactsConfig,
    pub weights: DistanceWeights,
    pub vol_window: usize,
}

impl CalibrationSetup {
    pub fn new(grid: GridSpec, facts: FactsConfig, weights: DistanceWeights, vol_window: usize) -> Self {
        Self {
            grid,
            baselines: BaselineGrids::default(),
            facts,
            weights,
            vol_window,
        }
    }

    pub fn provenance(&self, prices: &[f64]) -> Result<Provenance> {
        Ok(Provenance {
            data_hash: hash_prices(prices),
            config_hash: hex(&Sha256::digest(serde_json::to_vec(self)?)),
            seed: self.grid.budget.seed,
        })
    }
}

/// Calibrates Chiarella-Heston and the three reference models on `prices`.
pub fn compare_models(prices: &[f64], setup: &CalibrationSetup) -> Result<ModelComparison> {
    let fixed = fixed_params_from_history(prices, setup.vol_window)?;
    let target = reference_stats(prices, setup.facts.tail_fraction, setup.facts.max_lag)?;
    let prov = setup.provenance(prices)?;
    let (b, w, g) = (&setup.grid.budget, &setup.weights, &setup.baselines);
    let results = vec![
        grid_search_calibrate(&setup.grid, &target, &fixed, w, prov.clone())?,
        calibrate_gbm(g, &target, &fixed, w, b, prov.clone())?,
        calibrate_heston(g, &target, &fixed, w, b, prov.clone())?,
        calibrate_extended_chiarella(g, &target, &fixed, w, b, prov)?,
    ];
    let rows = results
        .iter()
        .map(|r| {
            Ok(ComparisonRow {
                model: r.model.clone(),
                breakdown: model_distance(&r.best_params, &target, w, b)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ModelComparison {
        fixed,
        target,
        results,
        rows,
    })
}

/// Built-in parameter sets for a daily equity index with 1.2% daily volatility.
pub fn default_model(tag: &str) -> Result<ModelSpec> {
    let (theta, phi, sigma, rho) = (1.44e-4, 0.02, 0.0017, -0.5);
    let (kappa, beta, g, sigma_f) = (0.02, 0.002, 0.0002, 0.012);
    let init = InitialState::at_rest(theta);
    Ok(match tag {
        "chiarella-heston" => ModelSpec::ChiarellaHeston {
            params: ModelParams {
                kappa,
                beta,
                gamma: MOMENTUM_GAMMA,
                omega: 1.0,
                g,
                sigma_f,
                alpha: MOMENTUM_ALPHA,
                phi,
                theta,
                sigma,
                rho,
            },
            init,
        },
        "gbm" => ModelSpec::Gbm(GbmParams {
            mu: 0.0003,
            sigma: 0.012,
            p0: 100.0,
        }),
        "heston" => ModelSpec::Heston(HestonParams {
            mu: g,
            var0: theta,
            phi,
            theta,
            sigma,
            rho,
            p0: 100.0,
        }),
        "extended-chiarella" => ModelSpec::ExtendedChiarella(ExtendedChiarellaParams {
            kappa,
            beta,
            gamma: MOMENTUM_GAMMA,
            sigma_n: theta.sqrt(),
            g,
            sigma_f,
            alpha: MOMENTUM_ALPHA,
            init,
        }),
        other => return Err(Error::domain("model", format!("unknown model `{other}`"))),
    })
}

pub const MODEL_TAGS: [&str; 4] = ["chiarella-heston", "gbm", "heston", "extended-chiarella"];

pub fn hash_prices(prices: &[f64]) -> String {
    let mut h = Sha256::new();
    for p in prices {
        h.update(p.to_le_bytes());
    }
    hex(&h.finalize())
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
