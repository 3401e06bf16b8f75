use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context as _, Result};
use chsim::data_io::{sha256_file, to_json_string, Config};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub arguments: BTreeMap<String, String>,
    pub config: Config,
    pub seeds: BTreeMap<String, u64>,
    pub input_hashes: BTreeMap<String, String>,
    pub outputs: Vec<PathBuf>,
    pub duration_secs: f64,
}

pub struct ManifestBuilder {
    started: Instant,
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn new(subcommand: &str, config: &Config) -> Self {
        Self {
            started: Instant::now(),
            manifest: RunManifest {
                subcommand: subcommand.to_string(),
                arguments: BTreeMap::new(),
                config: config.clone(),
                seeds: BTreeMap::new(),
                input_hashes: BTreeMap::new(),
                outputs: Vec::new(),
                duration_secs: 0.0,
            },
        }
    }

    pub fn arg(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.manifest.arguments.insert(key.to_string(), value.to_string());
        self
    }

    pub fn seed(&mut self, purpose: &str, seed: u64) -> &mut Self {
        self.manifest.seeds.insert(purpose.to_string(), seed);
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        let hash = sha256_file(path)?;
        self.manifest.input_hashes.insert(path.display().to_string(), hash);
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.manifest.outputs.push(path.to_path_buf());
        self
    }

    /// Writes `<primary>.manifest.json`.
    pub fn finish(mut self, primary: &Path) -> Result<()> {
        self.manifest.duration_secs = self.started.elapsed().as_secs_f64();
        let mut name = primary.as_os_str().to_owned();
        name.push(".manifest.json");
        let path = PathBuf::from(name);
        std::fs::write(&path, to_json_string(&self.manifest)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
