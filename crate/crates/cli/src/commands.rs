use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use clap::{ArgGroup, Args};
use serde_json::Value;

use chsim::calibration::{
    compare_models, default_model, fixed_params_from_history, grid_search_calibrate, CalibrationSetup, GridSpec,
    MODEL_TAGS,
};
use chsim::data_io::{
    check_json_numbers, ingest_csv, load_scenarios, save_scenarios, split_history, to_json_string, write_scenarios_csv,
    Config, PriceHistory,
};
use chsim::hedging::{
    build_test_scenarios, evaluate_policy, DeltaHedge, EvaluationReport, HedgingPolicy, NeuralPolicy, NeverHedge,
    OptionSpec, PolicyWeights, Strike,
};
use chsim::rng::derive_seed;
use chsim::simulator::{ModelSpec, ScenarioSet};
use chsim::stylized_facts::{log_returns, realized_volatility, reference_stats, scenario_facts, StylizedFactsTarget};
use chsim::validation::{compare_samples, gsl_div_sample, gsl_div_scenarios};

use crate::manifest::ManifestBuilder;
use crate::GlobalArgs;

pub struct Context {
    pub config: Config,
    config_path: Option<PathBuf>,
}

impl Context {
    pub fn new(global: &GlobalArgs) -> Result<Self> {
        let mut config = match &global.config {
            Some(p) => Config::load(p).with_context(|| format!("config {}", p.display()))?,
            None => Config::default(),
        };
        if let Some(seed) = global.seed {
            config.seed = seed;
        }
        Ok(Self {
            config,
            config_path: global.config.clone(),
        })
    }

    fn manifest(&self, subcommand: &str) -> Result<ManifestBuilder> {
        let mut m = ManifestBuilder::new(subcommand, &self.config);
        m.seed("master", self.config.seed);
        if let Some(p) = &self.config_path {
            m.input(p)?;
        }
        Ok(m)
    }

    fn seed(&self, purpose: &str) -> u64 {
        derive_seed(self.config.seed, purpose)
    }

    fn history(&self, path: &Path) -> Result<PriceHistory> {
        ingest_csv(path, &self.config.columns()).with_context(|| format!("reading {}", path.display()))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value)?)
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// chiarella-heston, gbm, heston or extended-chiarella.
    #[arg(long)]
    pub model: Option<String>,
    /// Calibration result, model comparison or bare model JSON.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

impl ModelArgs {
    fn resolve(&self, m: &mut ManifestBuilder) -> Result<ModelSpec> {
        let tag = self.model.as_deref();
        if let Some(t) = tag {
            if !MODEL_TAGS.contains(&t) {
                bail!("unknown model `{t}` (expected one of {})", MODEL_TAGS.join(", "));
            }
        }
        let spec = match &self.params {
            Some(path) => {
                m.input(path)?;
                load_model(path, tag)?
            }
            None => default_model(tag.unwrap_or("chiarella-heston"))?,
        };
        if let Some(t) = tag {
            if spec.tag() != t {
                bail!(
                    "--model {t} does not match the {} parameters in the params file",
                    spec.tag()
                );
            }
        }
        m.arg("model", spec.tag());
        Ok(spec)
    }
}

fn load_model(path: &Path, tag: Option<&str>) -> Result<ModelSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    check_json_numbers(&text)?;
    let value: Value = serde_json::from_str(&text)?;
    let spec = if let Some(best) = value.get("best_params") {
        best.clone()
    } else if let Some(results) = value.get("results").and_then(Value::as_array) {
        let want = tag.unwrap_or("chiarella-heston");
        results
            .iter()
            .find(|r| r.get("model").and_then(Value::as_str) == Some(want))
            .and_then(|r| r.get("best_params"))
            .cloned()
            .ok_or_else(|| anyhow!("{} has no `{want}` calibration", path.display()))?
    } else {
        value
    };
    let spec: ModelSpec =
        serde_json::from_value(spec).with_context(|| format!("{}: not a model specification", path.display()))?;
    Ok(spec)
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    pub paths: usize,
    #[arg(long, default_value_t = 30)]
    pub steps: usize,
    /// Steps simulated and discarded before the first stored price.
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the paths as CSV, one path per row.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn simulate(ctx: &Context, a: SimulateArgs) -> Result<()> {
    let mut m = ctx.manifest("simulate")?;
    let spec = a.model.resolve(&mut m)?;
    let seed = ctx.seed("simulate");
    m.seed("simulate", seed)
        .arg("paths", a.paths)
        .arg("steps", a.steps)
        .arg("burn_in", a.burn_in);
    let set = spec.simulate_after_burn_in(a.steps, a.paths, seed, a.burn_in)?;
    write_scenario_outputs(&set, &a.out, a.csv.as_deref(), &mut m)?;
    m.finish(&a.out)
}

fn write_scenario_outputs(set: &ScenarioSet, out: &Path, csv: Option<&Path>, m: &mut ManifestBuilder) -> Result<()> {
    save_scenarios(set, out).with_context(|| format!("writing {}", out.display()))?;
    m.output(out);
    if let Some(csv) = csv {
        let file = std::fs::File::create(csv).with_context(|| format!("writing {}", csv.display()))?;
        write_scenarios_csv(set, std::io::BufWriter::new(file))?;
        m.output(csv);
    }
    Ok(())
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["data", "scenarios"])))]
pub struct StatsArgs {
    /// Daily price CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Scenario file; facts are averaged over its paths.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Lag-by-lag ACF table for plotting.
    #[arg(long)]
    pub acf_csv: Option<PathBuf>,
}

pub fn stats(ctx: &Context, a: StatsArgs) -> Result<()> {
    let mut m = ctx.manifest("stats")?;
    let cfg = ctx.config.facts();
    let facts: StylizedFactsTarget = if let Some(path) = &a.data {
        m.input(path)?;
        let h = ctx.history(path)?;
        reference_stats(&h.closes, cfg.tail_fraction, cfg.max_lag)?
    } else {
        let path = a.scenarios.as_ref().expect("clap enforces a source");
        m.input(path)?;
        scenario_facts(&load_scenarios(path)?, &cfg)?
    };
    write_json(&a.out, &facts)?;
    m.output(&a.out);
    if let Some(csv) = &a.acf_csv {
        let mut text = String::from("lag,acf_returns,acf_sq_returns\n");
        for (i, (r, s)) in facts.acf_returns.iter().zip(&facts.acf_sq_returns).enumerate() {
            text.push_str(&format!("{},{r:?},{s:?}\n", i + 1));
        }
        write_text(csv, &text)?;
        m.output(csv);
    }
    m.finish(&a.out)
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Daily price CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// TOML grid specification (default: built-in grid).
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-point table of the Chiarella-Heston search as CSV.
    #[arg(long)]
    pub table_csv: Option<PathBuf>,
    /// Also calibrate GBM, Heston and extended Chiarella.
    #[arg(long)]
    pub compare: bool,
    /// Use only the leading calibration window of the history.
    #[arg(long)]
    pub split: bool,
}

pub fn calibrate(ctx: &Context, a: CalibrateArgs) -> Result<()> {
    let mut m = ctx.manifest("calibrate")?;
    m.input(&a.data)?;
    let mut history = ctx.history(&a.data)?;
    if a.split {
        history = split_history(&history, ctx.config.split())?.0;
    }
    m.arg("split", a.split).arg("compare", a.compare);
    let mut grid = match &a.grid {
        Some(p) => {
            m.input(p)?;
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            GridSpec::from_toml(&text)?
        }
        None => {
            let mut g = GridSpec::default();
            g.budget.replications = ctx.config.replications;
            g.budget.paths_per_replication = ctx.config.paths_per_replication;
            g.budget.steps_per_path = ctx.config.steps_per_path;
            g.budget.burn_in = ctx.config.burn_in;
            g
        }
    };
    grid.budget.seed = ctx.seed("calibrate");
    m.seed("calibrate", grid.budget.seed);
    let setup = CalibrationSetup::new(grid, ctx.config.facts(), ctx.config.weights(), ctx.config.vol_window);
    let prices = &history.closes;

    let ch = if a.compare {
        let cmp = compare_models(prices, &setup)?;
        write_json(&a.out, &cmp)?;
        cmp.results.into_iter().next().expect("chiarella-heston result")
    } else {
        let fixed = fixed_params_from_history(prices, setup.vol_window)?;
        let target = reference_stats(prices, setup.facts.tail_fraction, setup.facts.max_lag)?;
        let r = grid_search_calibrate(&setup.grid, &target, &fixed, &setup.weights, setup.provenance(prices)?)?;
        write_json(&a.out, &r)?;
        r
    };
    m.output(&a.out);
    if let Some(csv) = &a.table_csv {
        write_text(csv, &ch.table_csv()?)?;
        m.output(csv);
    }
    m.finish(&a.out)
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Scenario file, model JSON, or a model name with built-in parameters.
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub b: String,
    /// Reference daily price CSV.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Scenarios drawn from model sources (default from config).
    #[arg(long)]
    pub scenarios: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn validate(ctx: &Context, a: ValidateArgs) -> Result<()> {
    let mut m = ctx.manifest("validate")?;
    m.input(&a.reference)?;
    let reference = ctx.history(&a.reference)?.closes;
    let gsl = ctx.config.gsl();
    let n = a.scenarios.unwrap_or(ctx.config.gsl_scenarios);
    let mut sample = |source: &str, purpose: &str| -> Result<Vec<f64>> {
        let path = Path::new(source);
        m.arg(purpose, source);
        if path.exists() {
            m.input(path)?;
            if is_scenario_file(path)? {
                return Ok(gsl_div_scenarios(&load_scenarios(path)?, &reference, &gsl)?);
            }
            let spec = load_model(path, None)?;
            let seed = ctx.seed(&format!("validate/{purpose}"));
            m.seed(&format!("validate/{purpose}"), seed);
            return Ok(gsl_div_sample(&spec, &reference, n, seed, &gsl)?);
        }
        if MODEL_TAGS.contains(&source) {
            let seed = ctx.seed(&format!("validate/{purpose}"));
            m.seed(&format!("validate/{purpose}"), seed);
            return Ok(gsl_div_sample(&default_model(source)?, &reference, n, seed, &gsl)?);
        }
        bail!("source `{source}` is neither a file nor a model name")
    };
    let xs = sample(&a.a, "a")?;
    let ys = sample(&a.b, "b")?;
    let report = compare_samples(xs, ys)?;
    write_json(&a.out, &report)?;
    m.output(&a.out);
    m.finish(&a.out)
}

fn is_scenario_file(path: &Path) -> Result<bool> {
    let mut head = [0u8; 4];
    let mut f = std::fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let n = f.read(&mut head)?;
    Ok(n == 4 && head == chsim::data_io::SCENARIO_MAGIC)
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of paths (default from config).
    #[arg(long)]
    pub paths: Option<usize>,
    /// Option maturity in days (default from config).
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn export_training_set(ctx: &Context, a: ExportArgs) -> Result<()> {
    let mut m = ctx.manifest("export-training-set")?;
    let spec = a.model.resolve(&mut m)?;
    let paths = a.paths.unwrap_or(ctx.config.training_paths);
    let steps = a.steps.unwrap_or(ctx.config.maturity_days);
    let seed = ctx.seed("export-training-set");
    m.seed("export-training-set", seed)
        .arg("paths", paths)
        .arg("steps", steps)
        .arg("burn_in", a.burn_in);
    let set = spec.simulate_after_burn_in(steps, paths, seed, a.burn_in)?;
    write_scenario_outputs(&set, &a.out, None, &mut m)?;
    m.finish(&a.out)
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").args(["scenarios", "data", "model", "params"])))]
pub struct HedgeEvalArgs {
    /// Scenario file whose path length is maturity + 1.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    /// Daily price CSV turned into rolling windows.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// With --data: price the option with the calibration window's volatility
    /// and build scenarios from the test window.
    #[arg(long, requires = "data")]
    pub split: bool,
    /// Simulate episodes from this model instead (see `simulate --model`).
    #[arg(long)]
    pub model: Option<String>,
    /// Model parameters for simulated episodes (see `simulate --params`).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Paths simulated for model sources.
    #[arg(long, default_value_t = 1000)]
    pub paths: usize,
    /// `delta`, `never`, or a policy weights JSON file.
    #[arg(long, default_value = "delta")]
    pub policy: String,
    /// Comma-separated proportional costs (default from config).
    #[arg(long, value_delimiter = ',')]
    pub costs: Option<Vec<f64>>,
    /// Expected-shortfall level (default from config).
    #[arg(long)]
    pub es_confidence: Option<f64>,
    /// Daily Black-Scholes volatility (default inferred from the source).
    #[arg(long)]
    pub pricing_vol: Option<f64>,
    /// Fixed strike (default: at the money at each episode start).
    #[arg(long)]
    pub strike: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-episode P&L, one column per cost level.
    #[arg(long)]
    pub pnl_csv: Option<PathBuf>,
}

pub fn hedge_eval(ctx: &Context, a: HedgeEvalArgs) -> Result<()> {
    let mut m = ctx.manifest("hedge-eval")?;
    let cfg = &ctx.config;
    let n = cfg.maturity_days;

    let (set, inferred_vol) = if let Some(path) = &a.scenarios {
        m.input(path)?;
        let set = load_scenarios(path)?;
        let vol = pooled_volatility(&set)?;
        (set, vol)
    } else if let Some(path) = &a.data {
        m.input(path)?;
        let h = ctx.history(path)?;
        let (vol_window, test) = if a.split {
            let (cal, test) = split_history(&h, cfg.split())?;
            (cal.closes, test.closes)
        } else {
            (h.closes.clone(), h.closes)
        };
        let vol = realized_volatility(&log_returns(&vol_window)?)?;
        (
            build_test_scenarios(&test, cfg.scenario_window, cfg.initial_price)?,
            vol,
        )
    } else {
        let model = ModelArgs {
            model: a.model.clone(),
            params: a.params.clone(),
        };
        let spec = model.resolve(&mut m)?;
        let seed = ctx.seed("hedge-eval");
        m.seed("hedge-eval", seed).arg("paths", a.paths);
        (spec.simulate(n, a.paths, seed)?, model_pricing_vol(&spec))
    };

    let option = OptionSpec {
        strike: a.strike.map_or(Strike::AtTheMoney, Strike::Fixed),
        pricing_vol: a.pricing_vol.unwrap_or(inferred_vol),
        rate: cfg.rate,
        ..OptionSpec::at_the_money(n, 0.0)
    };
    let costs = a.costs.clone().unwrap_or_else(|| cfg.cost_levels.clone());
    let es = a.es_confidence.unwrap_or(cfg.es_confidence);
    m.arg("policy", &a.policy)
        .arg("pricing_vol", format!("{:?}", option.pricing_vol))
        .arg("costs", format!("{costs:?}"))
        .arg("es_confidence", es);

    let policy: Box<dyn HedgingPolicy> = match a.policy.as_str() {
        "delta" => Box::new(DeltaHedge),
        "never" => Box::new(NeverHedge),
        path => {
            let p = Path::new(path);
            m.input(p)?;
            Box::new(NeuralPolicy::new(PolicyWeights::load(p)?)?)
        }
    };
    let report = evaluate_policy(policy.as_ref(), &set, &option, &costs, es)?;
    write_json(&a.out, &report)?;
    m.output(&a.out);
    if let Some(csv) = &a.pnl_csv {
        write_text(csv, &pnl_table(&report))?;
        m.output(csv);
    }
    m.finish(&a.out)
}

fn pooled_volatility(set: &ScenarioSet) -> Result<f64> {
    let mut all = Vec::with_capacity(set.n_paths() * set.n_steps());
    for row in set.paths() {
        all.extend(log_returns(row)?);
    }
    Ok(realized_volatility(&all)?)
}

fn model_pricing_vol(spec: &ModelSpec) -> f64 {
    match spec {
        ModelSpec::Gbm(p) => p.sigma,
        ModelSpec::Heston(h) => h.theta.sqrt(),
        ModelSpec::ExtendedChiarella(e) => e.sigma_f,
        ModelSpec::ChiarellaHeston { params, .. } => params.sigma_f,
    }
}

fn pnl_table(report: &EvaluationReport) -> String {
    let mut text = String::from("episode");
    for l in &report.levels {
        text.push_str(&format!(",cost_{:?}", l.cost));
    }
    text.push('\n');
    for i in 0..report.n_episodes {
        text.push_str(&i.to_string());
        for l in &report.levels {
            text.push_str(&format!(",{:?}", l.pnl[i]));
        }
        text.push('\n');
    }
    text
}
