//! Experiment runner behind the `moire-spectra` binary.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::Parser;

pub use config::{ConfigError, Experiment, RawConfig, RunConfig};
pub use experiments::Verdict;
pub use output::RunWriter;

#[derive(Debug, Parser)]
#[command(
    name = "moire-spectra",
    version,
    about = "Spectra and density-of-states experiments"
)]
pub struct Cli {
    pub experiment: Experiment,

    /// Flat `key = value` config file; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Window ladder, comma separated.
    #[arg(long = "L", value_name = "L,...")]
    pub ladder: Option<String>,

    #[arg(long)]
    pub theta: Option<f64>,

    #[arg(long)]
    pub lambda: Option<f64>,

    #[arg(long)]
    pub alpha: Option<f64>,

    #[arg(long)]
    pub b: Option<f64>,

    /// Quadrature nodes per shift cell.
    #[arg(long)]
    pub nodes: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Worker threads; 0 picks one per core.
    #[arg(long)]
    pub threads: Option<usize>,

    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Any other config key, as `KEY=VALUE`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Cli {
    /// Config file first, then `--set`, then the dedicated flags.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        for pair in &self.set {
            raw.set_pair(pair)?;
        }
        raw.set("experiment", self.experiment.id());
        let flags = [
            ("L", self.ladder.clone()),
            ("theta", self.theta.map(|v| v.to_string())),
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("alpha", self.alpha.map(|v| v.to_string())),
            ("b", self.b.map(|v| v.to_string())),
            ("nodes", self.nodes.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("threads", self.threads.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                raw.set(key, v);
            }
        }
        raw.resolve()
    }
}

/// Runs one experiment on a dedicated thread pool.
pub fn execute(cfg: &RunConfig) -> Result<Verdict> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()?;
    let writer = RunWriter::create(&cfg.out, &cfg.hash())?;
    pool.install(|| experiments::run(cfg, &writer))
}
