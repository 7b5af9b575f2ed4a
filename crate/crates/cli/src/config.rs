//! Run configuration: a flat `key = value` file merged with command-line
//! overrides, resolved to concrete values and validated up front.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use moire_core::kernels::default_mismatch;
use moire_core::{
    build_window, DisorderLaw, HoppingParams, Kernel, ModelKind, OperatorModel, DEFAULT_TAIL_TOL,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: ini::Error },
    #[error("config {path}: sections are not supported (found [{section}])")]
    Section { path: PathBuf, section: String },
    #[error("config {path}: key `{key}` given twice")]
    Duplicate { path: PathBuf, key: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    Parse {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Model(#[from] moire_core::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    DosConvergence,
    Butterfly,
    DisorderEnsemble,
    CovarianceAudit,
    BirkhoffRates,
    TraceDefect,
}

impl Experiment {
    pub fn id(&self) -> &'static str {
        match self {
            Experiment::DosConvergence => "dos-convergence",
            Experiment::Butterfly => "butterfly",
            Experiment::DisorderEnsemble => "disorder-ensemble",
            Experiment::CovarianceAudit => "covariance-audit",
            Experiment::BirkhoffRates => "birkhoff-rates",
            Experiment::TraceDefect => "trace-defect",
        }
    }

    fn default_ladder(&self) -> Vec<f64> {
        match self {
            Experiment::DosConvergence => vec![25.0, 50.0, 100.0, 200.0, 400.0],
            Experiment::Butterfly => vec![150.0],
            Experiment::DisorderEnsemble => vec![50.0, 100.0, 200.0],
            Experiment::CovarianceAudit => vec![30.0],
            Experiment::BirkhoffRates => Vec::new(),
            Experiment::TraceDefect => vec![20.0, 40.0, 80.0, 160.0],
        }
    }
}

/// Fully resolved configuration. Serialized (minus `threads` and `out`)
/// to produce the config hash.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub model: ModelKind,
    pub alpha: f64,
    pub lambda: f64,
    pub phase: f64,
    pub theta: f64,
    pub b: f64,
    pub amplitude: f64,
    pub decay: f64,
    pub lz: f64,
    pub tail_tol: f64,
    pub disorder_low: f64,
    pub disorder_high: f64,
    pub seed: u64,
    pub samples: usize,
    #[serde(rename = "L")]
    pub ladder: Vec<f64>,
    pub nodes: usize,
    pub limit_l: f64,
    pub kernel: Kernel,
    pub bandwidth: f64,
    pub grid_points: usize,
    pub alphas: usize,
    pub phases: usize,
    pub max_shift: i64,
    pub modes: Vec<i64>,
    pub orbit_lengths: Vec<u64>,
    pub x0: f64,
    pub threads: usize,
    pub out: PathBuf,
}

/// Every key accepted in a config file or via `--set`.
pub const KEYS: &[&str] = &[
    "experiment",
    "model",
    "alpha",
    "lambda",
    "phase",
    "theta",
    "b",
    "amplitude",
    "decay",
    "lz",
    "tail_tol",
    "disorder_low",
    "disorder_high",
    "seed",
    "samples",
    "L",
    "nodes",
    "limit_l",
    "kernel",
    "bandwidth",
    "grid_points",
    "alphas",
    "phases",
    "max_shift",
    "modes",
    "orbit_lengths",
    "x0",
    "threads",
    "out",
];

/// Raw `key -> value` strings, later entries overriding earlier ones.
#[derive(Debug, Clone, Default)]
pub struct RawConfig(BTreeMap<String, String>);

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let file = ini::Ini::load_from_file(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut raw = Self::default();
        for (section, props) in file.iter() {
            if let Some(section) = section {
                return Err(ConfigError::Section {
                    path: path.to_path_buf(),
                    section: section.to_string(),
                });
            }
            for (k, v) in props.iter() {
                if raw.0.insert(k.to_string(), v.to_string()).is_some() {
                    return Err(ConfigError::Duplicate {
                        path: path.to_path_buf(),
                        key: k.to_string(),
                    });
                }
            }
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.0.insert(key.to_string(), value.into());
    }

    /// Parses `key=value`.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair.split_once('=').ok_or_else(|| ConfigError::Parse {
            key: pair.to_string(),
            value: String::new(),
            reason: "expected KEY=VALUE".into(),
        })?;
        self.set(k.trim(), v.trim());
        Ok(())
    }

    pub fn resolve(mut self) -> Result<RunConfig, ConfigError> {
        if let Some(k) = self.0.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
        let experiment = match self.0.remove("experiment") {
            Some(v) => Experiment::from_str(&v, true).map_err(|reason| ConfigError::Parse {
                key: "experiment".into(),
                value: v,
                reason,
            })?,
            None => {
                return Err(ConfigError::Invalid {
                    field: "experiment",
                    reason: "no experiment given".into(),
                })
            }
        };
        let hop = HoppingParams::default();
        let cfg = RunConfig {
            experiment,
            model: self.take_with("model", ModelKind::ReducedChain, parse_model)?,
            alpha: self.take("alpha", moire_core::kernels::GOLDEN)?,
            lambda: self.take("lambda", 2.0)?,
            phase: self.take("phase", 0.0)?,
            theta: self.take("theta", default_mismatch())?,
            b: self.take("b", 0.3)?,
            amplitude: self.take("amplitude", hop.amplitude)?,
            decay: self.take("decay", hop.decay)?,
            lz: self.take("lz", hop.interchain_distance)?,
            tail_tol: self.take("tail_tol", DEFAULT_TAIL_TOL)?,
            disorder_low: self.take("disorder_low", -1.0)?,
            disorder_high: self.take("disorder_high", 1.0)?,
            seed: self.take("seed", 42)?,
            samples: self.take("samples", 32)?,
            ladder: self.take_with("L", experiment.default_ladder(), parse_list)?,
            nodes: self.take("nodes", 16)?,
            limit_l: self.take("limit_l", 60.0)?,
            kernel: self.take_with("kernel", Kernel::Gaussian, parse_kernel)?,
            bandwidth: self.take("bandwidth", 0.05)?,
            grid_points: self.take("grid_points", 801)?,
            alphas: self.take("alphas", 199)?,
            phases: self.take("phases", 8)?,
            max_shift: self.take("max_shift", 5)?,
            modes: self.take_with("modes", vec![1, 2, 3], parse_list)?,
            orbit_lengths: self.take_with(
                "orbit_lengths",
                vec![10, 100, 1_000, 10_000],
                parse_list,
            )?,
            x0: self.take("x0", 0.0)?,
            threads: self.take("threads", 0)?,
            out: self.take_with("out", PathBuf::from("out"), |s| Ok(PathBuf::from(s)))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn take<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.take_with(key, default, |s| s.parse::<T>().map_err(|e| e.to_string()))
    }

    fn take_with<T>(
        &mut self,
        key: &str,
        default: T,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, ConfigError> {
        match self.0.remove(key) {
            None => Ok(default),
            Some(v) => parse(&v).map_err(|reason| ConfigError::Parse {
                key: key.to_string(),
                value: v,
                reason,
            }),
        }
    }
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    match s {
        "almost-mathieu" => Ok(ModelKind::AlmostMathieu),
        "anderson" => Ok(ModelKind::Anderson),
        "coupled" => Ok(ModelKind::CoupledChain),
        "reduced" => Ok(ModelKind::ReducedChain),
        _ => Err("expected almost-mathieu, anderson, coupled or reduced".into()),
    }
}

fn parse_kernel(s: &str) -> Result<Kernel, String> {
    match s {
        "gaussian" => Ok(Kernel::Gaussian),
        "lorentzian" => Ok(Kernel::Lorentzian),
        _ => Err("expected gaussian or lorentzian".into()),
    }
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

impl RunConfig {
    pub fn hopping(&self) -> Result<HoppingParams, ConfigError> {
        Ok(HoppingParams::new(self.amplitude, self.decay, self.lz)?)
    }

    pub fn disorder(&self, seed: u64) -> Result<DisorderLaw, ConfigError> {
        Ok(DisorderLaw::uniform(
            self.disorder_low,
            self.disorder_high,
            seed,
        )?)
    }

    /// The operator of family `kind` built from this configuration.
    pub fn model_of(&self, kind: ModelKind) -> Result<OperatorModel, ConfigError> {
        Ok(match kind {
            ModelKind::AlmostMathieu => {
                OperatorModel::almost_mathieu(self.alpha, self.lambda, self.phase)?
            }
            ModelKind::Anderson => OperatorModel::anderson(self.disorder(self.seed)?)?,
            ModelKind::CoupledChain => {
                OperatorModel::coupled_chain(self.theta, self.b, self.hopping()?)?
            }
            ModelKind::ReducedChain => {
                OperatorModel::reduced_chain(self.theta, self.b, self.hopping()?)?
            }
        })
    }

    /// Families an experiment touches.
    pub fn families(&self) -> Vec<ModelKind> {
        use ModelKind::*;
        match self.experiment {
            Experiment::DosConvergence => vec![self.model],
            Experiment::Butterfly => vec![AlmostMathieu],
            Experiment::DisorderEnsemble => vec![Anderson],
            Experiment::BirkhoffRates => Vec::new(),
            Experiment::CovarianceAudit | Experiment::TraceDefect => {
                vec![AlmostMathieu, Anderson, CoupledChain, ReducedChain]
            }
        }
    }

    /// Checks every numeric field against the preconditions of the calls
    /// the chosen experiment will make.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite_pos = |x: f64| x > 0.0 && x.is_finite();
        if !finite_pos(self.tail_tol) {
            return Err(invalid("tail_tol", "must be finite and > 0"));
        }
        if !finite_pos(self.bandwidth) {
            return Err(invalid("bandwidth", "must be finite and > 0"));
        }
        if self.grid_points < 2 {
            return Err(invalid("grid_points", "need at least 2 points"));
        }
        if self.experiment != Experiment::BirkhoffRates {
            if self.ladder.is_empty() {
                return Err(invalid("L", "ladder is empty"));
            }
            if let Some(l) = self.ladder.iter().find(|l| !finite_pos(**l)) {
                return Err(invalid("L", format!("{l} is not finite and > 0")));
            }
        }
        for kind in self.families() {
            let model = self.model_of(kind)?;
            for &size in &self.ladder {
                build_window(&model, size)?;
            }
        }
        match self.experiment {
            Experiment::DosConvergence => {
                if self.nodes == 0 {
                    return Err(invalid("nodes", "must be >= 1"));
                }
                if !self.model.is_single_chain()
                    && !(self.limit_l > 1.0 && self.limit_l.is_finite())
                {
                    return Err(invalid(
                        "limit_l",
                        "coupled estimate needs 1 < limit_l < inf",
                    ));
                }
                if !finite_pos(self.limit_l) {
                    return Err(invalid("limit_l", "must be finite and > 0"));
                }
            }
            Experiment::Butterfly => {
                if self.alphas == 0 {
                    return Err(invalid("alphas", "must be >= 1"));
                }
                if self.phases == 0 {
                    return Err(invalid("phases", "must be >= 1"));
                }
            }
            Experiment::DisorderEnsemble => {
                if self.samples == 0 {
                    return Err(invalid("samples", "must be >= 1"));
                }
            }
            Experiment::CovarianceAudit => {
                if self.max_shift < 0 {
                    return Err(invalid("max_shift", "must be >= 0"));
                }
            }
            Experiment::BirkhoffRates => {
                if !(0.0..1.0).contains(&self.x0) {
                    return Err(invalid("x0", "must lie in [0, 1)"));
                }
                if self.modes.is_empty() || self.modes.contains(&0) {
                    return Err(invalid("modes", "need nonzero modes"));
                }
                if self.orbit_lengths.is_empty() {
                    return Err(invalid("orbit_lengths", "list is empty"));
                }
                for &m in &self.modes {
                    moire_core::birkhoff_mode_bound(m, self.alpha)?;
                }
            }
            Experiment::TraceDefect => {}
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring `threads` and `out`,
    /// which do not affect results.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        let obj = value.as_object_mut().expect("config is an object");
        obj.remove("threads");
        obj.remove("out");
        hex_sha256(value.to_string().as_bytes())
    }
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(pairs: &[(&str, &str)]) -> RawConfig {
        let mut r = RawConfig::default();
        for (k, v) in pairs {
            r.set(k, *v);
        }
        r
    }

    #[test]
    fn defaults_resolve() {
        let cfg = raw(&[("experiment", "trace-defect")]).resolve().unwrap();
        assert_eq!(cfg.ladder, vec![20.0, 40.0, 80.0, 160.0]);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.b, 0.3);
    }

    #[test]
    fn hash_ignores_threads_and_out() {
        let a = raw(&[("experiment", "butterfly"), ("threads", "1")])
            .resolve()
            .unwrap();
        let b = raw(&[("experiment", "butterfly"), ("threads", "8"), ("out", "x")])
            .resolve()
            .unwrap();
        let c = raw(&[("experiment", "butterfly"), ("lambda", "1")])
            .resolve()
            .unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn rejects_unknown_and_bad_values() {
        assert!(matches!(
            raw(&[("experiment", "butterfly"), ("lamda", "1")]).resolve(),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            raw(&[("experiment", "butterfly"), ("L", "10,x")]).resolve(),
            Err(ConfigError::Parse { .. })
        ));
        assert!(matches!(
            raw(&[("experiment", "dos-convergence"), ("nodes", "0")]).resolve(),
            Err(ConfigError::Invalid { field: "nodes", .. })
        ));
        assert!(raw(&[("experiment", "dos-convergence"), ("theta", "1.5")])
            .resolve()
            .is_err());
        assert!(raw(&[("model", "reduced")]).resolve().is_err());
    }

    #[test]
    fn coupled_ladder_must_clear_the_shift() {
        let r = raw(&[
            ("experiment", "dos-convergence"),
            ("model", "coupled"),
            ("b", "2"),
            ("L", "1,10"),
        ]);
        assert!(matches!(r.resolve(), Err(ConfigError::Model(_))));
    }

    #[test]
    fn set_pair_splits_on_first_equals() {
        let mut r = RawConfig::default();
        r.set_pair("out = a=b").unwrap();
        assert_eq!(r.0["out"], "a=b");
        assert!(r.set_pair("novalue").is_err());
    }
}
