#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use chrono::{Days, NaiveDate};
use chsim::calibration::default_model;

pub const GRID: &str = "\
replications = 1
paths_per_replication = 2
steps_per_path = 600
burn_in = 50

[kappa]
levels = [0.02, 0.1]
[beta]
levels = [0.002]
[omega]
levels = [1.0]
[theta]
levels = [1.44e-4]
[phi]
levels = [0.02]
";

pub fn chsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chsim"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn chsim")
}

pub fn run_ok(dir: &Path, args: &[&str]) {
    let out = chsim(dir, args);
    assert!(
        out.status.success(),
        "chsim {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Writes `prices.csv` with `n` daily closes from the default model.
pub fn write_price_csv(dir: &Path, n: usize) {
    let set = default_model("chiarella-heston")
        .unwrap()
        .simulate(n - 1, 1, 11)
        .unwrap();
    let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
    let mut text = String::from("Date,Close\n");
    for (i, p) in set.path(0).iter().enumerate() {
        text.push_str(&format!("{},{p:?}\n", start + Days::new(i as u64)));
    }
    std::fs::write(dir.join("prices.csv"), text).unwrap();
    std::fs::write(dir.join("grid.toml"), GRID).unwrap();
}
