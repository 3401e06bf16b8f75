//! Acceptance suite: one PASS / FAIL / SKIP line per criterion.
//!
//! Exits nonzero when a criterion marked `hard` fails. Soft criteria are
//! sampling statements whose verbatim threshold can miss by chance; their
//! failures are reported but do not fail the build.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chsim::calibration::{compare_models, default_model, CalibrationResult, CalibrationSetup, GridSpec};
use chsim::data_io::{
    from_json_str, ingest_csv, read_scenarios, read_scenarios_csv, to_json_string, write_scenarios,
    write_scenarios_csv, Config,
};
use chsim::hedging::*;
use chsim::rng::{derive_seed, NoiseStream};
use chsim::simulator::*;
use chsim::stylized_facts::*;
use chsim::validation::{gsl_div, welch_t_test, GslDivConfig};
use common::{run_ok, write_price_csv};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const SEED: u64 = 20_240_601;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Outcome::*;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn within(elapsed: Duration, limit_secs: u64, outcome: Outcome) -> Outcome {
    let t = elapsed.as_secs_f64();
    match outcome {
        Pass(d) if t < limit_secs as f64 => Pass(format!("{d}; {t:.1}s < {limit_secs}s")),
        Pass(d) => Fail(format!("{d}; {t:.1}s exceeds {limit_secs}s")),
        other => other,
    }
}

struct Criterion {
    name: &'static str,
    hard: bool,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "reduction equivalence",
            hard: true,
            run: reduction_equivalence,
        },
        Criterion {
            name: "stylized-facts ordering",
            hard: true,
            run: stylized_facts_ordering,
        },
        Criterion {
            name: "reference-data comparison",
            hard: true,
            run: reference_data_comparison,
        },
        Criterion {
            name: "estimator oracles",
            hard: true,
            run: estimator_oracles,
        },
        Criterion {
            name: "GSL-div properties",
            hard: true,
            run: gsl_div_properties,
        },
        Criterion {
            name: "Welch test power (>= 99/100)",
            hard: false,
            run: welch_power,
        },
        Criterion {
            name: "hedging environment",
            hard: true,
            run: hedging_environment,
        },
        Criterion {
            name: "scenario construction",
            hard: true,
            run: scenario_construction,
        },
        Criterion {
            name: "determinism and round-trip",
            hard: true,
            run: determinism_and_round_trip,
        },
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut hard_failures = 0;
    for c in &criteria {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(c.run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Fail(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Pass(d) => ("PASS", d),
            Skip(d) => ("SKIP", d),
            Fail(d) => {
                if c.hard {
                    hard_failures += 1;
                    ("FAIL", d)
                } else {
                    ("FAIL (soft)", d)
                }
            }
        };
        println!("{tag:<11} {:<32} [{secs:6.1}s] {detail}", c.name);
    }
    if hard_failures > 0 {
        println!("{hard_failures} hard acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn reduction_equivalence() -> Outcome {
    let started = Instant::now();
    let mut worst_heston = 0.0f64;
    let mut bit_exact = 0;
    for i in 0..100 {
        let seed = derive_seed(SEED, &format!("acceptance/reduction/{i}"));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = ModelParams {
            kappa: rng.random_range(0.0..0.5),
            beta: rng.random_range(0.0..0.05),
            gamma: rng.random_range(1.0..20.0),
            omega: rng.random_range(0.1..3.0),
            g: rng.random_range(-1e-3..1e-3),
            sigma_f: rng.random_range(0.0..0.02),
            alpha: rng.random_range(0.01..1.0),
            phi: rng.random_range(0.005..0.2),
            theta: rng.random_range(1e-5..1e-3),
            sigma: rng.random_range(0.0..0.005),
            rho: rng.random_range(-0.9..0.9),
        };
        let init = InitialState {
            p0: rng.random_range(3.0..6.0),
            f0: rng.random_range(3.0..6.0),
            m0: rng.random_range(-0.01..0.01),
            var0: rng.random_range(1e-5..1e-3),
        };

        let flat = ModelParams {
            phi: 0.0,
            sigma: 0.0,
            ..base
        };
        let ext = ExtendedChiarellaParams {
            kappa: flat.kappa,
            beta: flat.beta,
            gamma: flat.gamma,
            sigma_n: flat.omega * init.var0.sqrt(),
            g: flat.g,
            sigma_f: flat.sigma_f,
            alpha: flat.alpha,
            init,
        };
        let a = simulate_chiarella_heston(&flat, &init, 250, 4, seed).unwrap();
        let b = simulate_extended_chiarella(&ext, 250, 4, seed).unwrap();
        if a.as_flat() == b.as_flat() {
            bit_exact += 1;
        }

        let frozen = ModelParams {
            kappa: 0.0,
            alpha: 0.0,
            omega: 1.0,
            ..base
        };
        let h = HestonParams {
            mu: frozen.beta * (frozen.gamma * init.m0).tanh(),
            var0: init.var0,
            phi: frozen.phi,
            theta: frozen.theta,
            sigma: frozen.sigma,
            rho: frozen.rho,
            p0: init.p0.exp(),
        };
        let a = simulate_chiarella_heston(&frozen, &init, 250, 4, seed).unwrap();
        let b = simulate_heston(&h, 250, 4, seed).unwrap();
        for (ra, rb) in a.paths().zip(b.paths()) {
            for t in 1..ra.len() {
                let d = ((ra[t] / ra[t - 1]).ln() - (rb[t] / rb[t - 1]).ln()).abs();
                worst_heston = worst_heston.max(d);
            }
        }
    }
    within(
        started.elapsed(),
        10,
        check(
            bit_exact == 100 && worst_heston <= 1e-12,
            format!("extended-Chiarella bit-exact {bit_exact}/100; max Heston log-increment gap {worst_heston:.1e}"),
        ),
    )
}

struct PathFacts {
    sq_acf: Vec<f64>,
    hill: f64,
    acf_returns: Vec<f64>,
}

fn path_facts(tag: &str) -> PathFacts {
    let model = default_model(tag).unwrap();
    let set = model
        .simulate_after_burn_in(3000, 32, derive_seed(SEED, &format!("acceptance/facts/{tag}")), 250)
        .unwrap();
    let cfg = FactsConfig::default();
    let per_path: Vec<StylizedFactsTarget> = set.paths().map(|p| series_facts(p, &cfg).unwrap()).collect();
    let mean = scenario_facts(&set, &cfg).unwrap();
    PathFacts {
        sq_acf: per_path
            .iter()
            .map(|f| f.acf_sq_returns.iter().sum::<f64>() / f.acf_sq_returns.len() as f64)
            .collect(),
        hill: mean.hill,
        acf_returns: mean.acf_returns,
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn stylized_facts_ordering() -> Outcome {
    let started = Instant::now();
    let facts: BTreeMap<&str, PathFacts> = chsim::calibration::MODEL_TAGS
        .iter()
        .map(|&t| (t, path_facts(t)))
        .collect();
    let (ch, gbm) = (&facts["chiarella-heston"], &facts["gbm"]);
    let (m_ch, se_ch) = mean_and_se(&ch.sq_acf);
    let (m_gbm, se_gbm) = mean_and_se(&gbm.sq_acf);
    let se = (se_ch * se_ch + se_gbm * se_gbm).sqrt();
    let z = (m_ch - m_gbm) / se;
    let band = 2.0 * 1.96 / 3000f64.sqrt();
    let worst_acf = facts
        .values()
        .flat_map(|f| f.acf_returns.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()));
    within(
        started.elapsed(),
        120,
        check(
            z >= 3.0 && ch.hill < gbm.hill && worst_acf <= band,
            format!(
                "(a) sq-ACF {m_ch:.4} vs {m_gbm:.4}, {z:.1} SE; (b) Hill {:.2} < {:.2}; (c) max |ACF| {worst_acf:.4} <= {band:.4}",
                ch.hill, gbm.hill
            ),
        ),
    )
}

fn reference_data_comparison() -> Outcome {
    let Ok(path) = std::env::var("CHSIM_SP500_CSV") else {
        return Skip("set CHSIM_SP500_CSV to an S&P 500 daily close CSV to run".into());
    };
    let config = Config::default();
    let history = ingest_csv(Path::new(&path), &config.columns()).unwrap();
    let mut grid = GridSpec::default();
    grid.budget.seed = derive_seed(config.seed, "calibrate");
    let setup = CalibrationSetup::new(grid, config.facts(), config.weights(), config.vol_window);
    let cmp = compare_models(&history.closes, &setup).unwrap();
    let total = |tag: &str| cmp.rows.iter().find(|r| r.model == tag).unwrap().breakdown.total;
    let expected = [
        ("chiarella-heston", 0.224),
        ("gbm", 0.514),
        ("heston", 0.520),
        ("extended-chiarella", 0.554),
    ];
    let ch = total("chiarella-heston");
    let lowest = expected[1..].iter().all(|(t, _)| ch < total(t));
    let close = expected.iter().all(|(t, e)| (total(t) - e).abs() <= 0.5 * e);
    let listing: Vec<String> = expected.iter().map(|(t, _)| format!("{t} {:.3}", total(t))).collect();
    check(lowest && close, listing.join(", "))
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

fn estimator_oracles() -> Outcome {
    let started = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;
    for alpha in [2.0, 3.0] {
        let xs = symmetric_pareto(alpha, 100_000, derive_seed(SEED, &format!("acceptance/pareto/{alpha}")));
        let est = hill_estimator(&xs, 0.05).unwrap().index;
        let err = (est - alpha).abs() / alpha;
        ok &= err <= 0.10;
        notes.push(format!("Hill({alpha}) {est:.3}"));
    }

    let mut s = NoiseStream::new(derive_seed(SEED, "acceptance/ar1"), 0);
    let mut x = 0.0;
    let ar: Vec<f64> = (0..100_000)
        .map(|_| {
            x = 0.5 * x + s.next_step().z_s;
            x
        })
        .collect();
    let rho = acf(&ar, 20).unwrap();
    let worst = rho
        .iter()
        .enumerate()
        .map(|(i, r)| (r - 0.5f64.powi(i as i32 + 1)).abs())
        .fold(0.0, f64::max);
    ok &= worst <= 0.02;
    notes.push(format!("AR(1) max ACF error {worst:.4}"));

    let gbm = simulate_gbm(0.0, 0.01, 100.0, 100_000, 1, derive_seed(SEED, "acceptance/vol")).unwrap();
    let vol = realized_volatility(&log_returns(gbm.path(0)).unwrap()).unwrap();
    let err = (vol - 0.01).abs() / 0.01;
    ok &= err <= 0.02;
    notes.push(format!("vol {vol:.5} ({:.2}%)", 100.0 * err));
    within(started.elapsed(), 30, check(ok, notes.join("; ")))
}

fn gbm_path(sigma: f64, seed: u64) -> Vec<f64> {
    simulate_gbm(0.0, sigma, 100.0, 3000, 1, seed).unwrap().path(0).to_vec()
}

fn gsl_div_properties() -> Outcome {
    let cfg = GslDivConfig::default();
    let x = gbm_path(0.01, derive_seed(SEED, "acceptance/gsl/self"));
    let self_div = gsl_div(&x, &x, &cfg).unwrap();
    let mut separated = 0;
    for trial in 0..50 {
        let obs = gbm_path(0.01, derive_seed(SEED, &format!("acceptance/gsl/obs/{trial}")));
        let sim_seed = derive_seed(SEED, &format!("acceptance/gsl/sim/{trial}"));
        let same = gsl_div(&obs, &gbm_path(0.01, sim_seed), &cfg).unwrap();
        let wide = gsl_div(&obs, &gbm_path(0.05, sim_seed), &cfg).unwrap();
        if wide > 0.0 && wide > same {
            separated += 1;
        }
    }
    let a = [0.3, -1.2, 2.5, 0.7, 1.1];
    let w = welch_t_test(&a, &a).unwrap();
    check(
        self_div == 0.0 && separated == 50 && w.t == 0.0 && w.p == 1.0,
        format!(
            "self-divergence {self_div}; separation {separated}/50; identical samples t={} p={}",
            w.t, w.p
        ),
    )
}

fn welch_power() -> Outcome {
    let mut hits = 0;
    for rep in 0..100 {
        let mut s = NoiseStream::new(derive_seed(SEED, &format!("acceptance/welch/{rep}")), 0);
        let xs: Vec<f64> = (0..100).map(|_| s.next_step().z_s).collect();
        let ys: Vec<f64> = (0..100).map(|_| 1.0 + s.next_step().z_s).collect();
        if welch_t_test(&xs, &ys).unwrap().p < 1e-6 {
            hits += 1;
        }
    }
    let detail = format!("p < 1e-6 in {hits}/100 repetitions (exact power ~0.975)");
    if hits >= 99 {
        Pass(detail)
    } else {
        Fail(format!("{detail}; see decisions ledger"))
    }
}

fn lognormal_call_by_quadrature(spot: f64, strike: f64, vol: f64, ttm: f64) -> f64 {
    let sd = vol * ttm.sqrt();
    let drift = -0.5 * vol * vol * ttm;
    let (a, b, n) = (((strike / spot).ln() - drift) / sd, 12.0, 40_000);
    let h = (b - a) / n as f64;
    let f = |z: f64| (spot * (drift + sd * z).exp() - strike) * (-0.5 * z * z).exp();
    let mut sum = f(a) + f(b);
    for i in 1..n {
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    sum * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt()
}

fn hedging_environment() -> Outcome {
    let started = Instant::now();
    let unit_cases = accounting_pnl(1000.0, 1200.0, 50.0, 80.0, 100.0, 101.0, 0.0) == -150.0
        && accounting_pnl(700.0, 650.0, 30.0, 30.0, 100.0, 98.0, 0.25) == -10.0
        && accounting_pnl(500.0, 500.0, 0.0, 40.0, 100.0, 100.0, 0.01) == -40.0;

    let mut worst_bs = 0.0f64;
    for moneyness in [0.8, 0.95, 1.0, 1.05, 1.25] {
        for (vol, ttm) in [(0.2, 1.0), (0.35, 0.25), (0.012, 30.0), (0.6, 2.0)] {
            let s = 100.0 * moneyness;
            let bs = bs_call_price(s, 100.0, 0.0, vol, ttm).unwrap();
            worst_bs = worst_bs.max((bs - lognormal_call_by_quadrature(s, 100.0, vol, ttm)).abs());
        }
    }

    let set = simulate_gbm(0.0, 0.012, 100.0, 30, 1000, derive_seed(SEED, "acceptance/hedging")).unwrap();
    let opt = OptionSpec::at_the_money(30, 0.012);
    let delta = evaluate_policy(&DeltaHedge, &set, &opt, &[0.0, 0.001, 0.01], 0.95).unwrap();
    let naked = evaluate_policy(&NeverHedge, &set, &opt, &[0.0], 0.95).unwrap();
    let (d, n) = (delta.levels[0].std_pnl, naked.levels[0].std_pnl);
    let means: Vec<f64> = delta.levels.iter().map(|l| l.mean_pnl).collect();
    let decreasing = means.windows(2).all(|w| w[0] > w[1]);
    within(
        started.elapsed(),
        60,
        check(
            unit_cases && worst_bs < 1e-6 && 2.0 * d < n && decreasing,
            format!(
                "unit cases {unit_cases}; BS vs quadrature max gap {worst_bs:.1e} over 20 points; \
                 std delta {d:.1} vs never {n:.1}; mean P&L at 0/0.1%/1% {:.1} > {:.1} > {:.1}",
                means[0], means[1], means[2]
            ),
        ),
    )
}

fn scenario_construction() -> Outcome {
    let source = default_model("heston")
        .unwrap()
        .simulate(2999, 1, derive_seed(SEED, "acceptance/windows"))
        .unwrap();
    let prices = source.path(0);
    let set = build_test_scenarios(prices, 30, 100.0).unwrap();
    let mut worst = 0.0f64;
    for (start, row) in set.paths().enumerate() {
        for t in 0..30 {
            let want = (prices[start + t + 1] / prices[start + t]).ln();
            worst = worst.max(((row[t + 1] / row[t]).ln() - want).abs());
        }
    }
    check(
        prices.len() == 3000 && set.n_paths() == 2970 && worst <= 1e-12,
        format!(
            "{} scenarios of {} prices; max return gap {worst:.1e}",
            set.n_paths(),
            set.path_len()
        ),
    )
}

fn strip_duration(text: &str) -> Value {
    let mut v: Value = serde_json::from_str(text).unwrap();
    v.as_object_mut().unwrap().remove("duration_secs");
    v
}

/// Every regular file in `dir`, manifests with their run time removed.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let bytes = std::fs::read(&path).unwrap();
        let bytes = if name.ends_with(".manifest.json") {
            serde_json::to_vec(&strip_duration(std::str::from_utf8(&bytes).unwrap())).unwrap()
        } else {
            bytes
        };
        files.insert(name, bytes);
    }
    files
}

const PIPELINE: &[&[&str]] = &[
    &[
        "simulate", "--paths", "12", "--steps", "300", "--out", "sim.scn", "--csv", "sim.csv",
    ],
    &[
        "stats",
        "--data",
        "prices.csv",
        "--out",
        "stats.json",
        "--acf-csv",
        "acf.csv",
    ],
    &["stats", "--scenarios", "sim.scn", "--out", "sim_stats.json"],
    &[
        "calibrate",
        "--data",
        "prices.csv",
        "--grid",
        "grid.toml",
        "--out",
        "cal.json",
        "--table-csv",
        "cal.csv",
    ],
    &[
        "calibrate",
        "--data",
        "prices.csv",
        "--grid",
        "grid.toml",
        "--compare",
        "--out",
        "cmp.json",
    ],
    &[
        "validate",
        "--a",
        "cal.json",
        "--b",
        "gbm",
        "--ref",
        "prices.csv",
        "--scenarios",
        "6",
        "--out",
        "val.json",
    ],
    &[
        "export-training-set",
        "--params",
        "cal.json",
        "--paths",
        "20",
        "--out",
        "train.scn",
    ],
    &[
        "hedge-eval",
        "--scenarios",
        "train.scn",
        "--out",
        "hedge.json",
        "--pnl-csv",
        "pnl.csv",
    ],
    &["hedge-eval", "--data", "prices.csv", "--out", "hedge_hist.json"],
];

fn run_pipeline(dir: &Path) {
    write_price_csv(dir, 700);
    for args in PIPELINE {
        run_ok(dir, args);
    }
}

fn round_trips() -> Vec<(&'static str, bool)> {
    let set = default_model("chiarella-heston").unwrap().simulate(400, 5, 3).unwrap();

    let mut bin = Vec::new();
    write_scenarios(&set, &mut bin).unwrap();
    let back = read_scenarios(bin.as_slice()).unwrap();
    let binary = back
        .as_flat()
        .iter()
        .zip(set.as_flat())
        .all(|(a, b)| a.to_bits() == b.to_bits())
        && back.seed == set.seed
        && back.model_tag == set.model_tag;

    let mut csv = Vec::new();
    write_scenarios_csv(&set, &mut csv).unwrap();
    let back = read_scenarios_csv(csv.as_slice(), set.seed, &set.model_tag).unwrap();
    let csv_ok = back.as_flat() == set.as_flat();

    let facts = scenario_facts(&set, &FactsConfig::default()).unwrap();
    let facts_ok = from_json_str::<StylizedFactsTarget>(&to_json_string(&facts).unwrap()).unwrap() == facts;

    let weights = PolicyWeights::zeros(&[32, 64, 32], 30);
    let weights_ok = PolicyWeights::from_json(&weights.to_json().unwrap()).unwrap() == weights;

    let config = Config {
        seed: i64::MAX as u64,
        tail_fraction: 0.1 + 0.2,
        ..Config::default()
    };
    let config_ok = Config::from_toml(&config.to_toml().unwrap()).unwrap() == config;

    let spec = default_model("extended-chiarella").unwrap();
    let spec_ok = from_json_str::<ModelSpec>(&to_json_string(&spec).unwrap()).unwrap() == spec;

    vec![
        ("scenario binary", binary),
        ("scenario CSV", csv_ok),
        ("stats JSON", facts_ok),
        ("weights JSON", weights_ok),
        ("config TOML", config_ok),
        ("model JSON", spec_ok),
    ]
}

fn determinism_and_round_trip() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_pipeline(a.path());
    run_pipeline(b.path());
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let differing: Vec<&String> = sa
        .iter()
        .filter(|(k, v)| sb.get(*k) != Some(*v))
        .map(|(k, _)| k)
        .collect();
    let manifests = sa.keys().filter(|k| k.ends_with(".manifest.json")).count();

    let cal: CalibrationResult = from_json_str(&std::fs::read_to_string(a.path().join("cal.json")).unwrap()).unwrap();
    let cal_ok = from_json_str::<CalibrationResult>(&to_json_string(&cal).unwrap()).unwrap() == cal;
    let report: EvaluationReport =
        from_json_str(&std::fs::read_to_string(a.path().join("hedge.json")).unwrap()).unwrap();
    let report_ok = from_json_str::<EvaluationReport>(&to_json_string(&report).unwrap()).unwrap() == report;

    let mut trips = round_trips();
    trips.push(("calibration JSON", cal_ok));
    trips.push(("evaluation JSON", report_ok));
    let broken: Vec<&str> = trips.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    check(
        differing.is_empty() && broken.is_empty() && sa.len() == sb.len() && manifests == PIPELINE.len(),
        format!(
            "{} runs, {} files byte-identical (differing: {differing:?}); {} formats round-trip (broken: {broken:?})",
            PIPELINE.len(),
            sa.len(),
            trips.len()
        ),
    )
}
