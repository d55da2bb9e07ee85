use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Block expectation value `⟨0|V†MV|0⟩`.
    Evhm,
    /// Sparse expectation value through the walk encoding.
    Sevhm,
    /// Expectation value of a linear-system solution.
    Slep,
    /// Write a random matrix-encoding instance.
    Encode,
    /// Mean estimation through the sparse reduction.
    Reduce,
    /// Query-count sweep over eps with a log-log fit.
    Scaling,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evhm => "evhm",
            Command::Sevhm => "sevhm",
            Command::Slep => "slep",
            Command::Encode => "encode",
            Command::Reduce => "reduce",
            Command::Scaling => "scaling",
        }
    }

    pub fn default_eps(self) -> Vec<f64> {
        match self {
            Command::Evhm => vec![0.05],
            Command::Scaling => vec![0.2, 0.1, 0.05, 0.025],
            _ => vec![0.1],
        }
    }
}

/// Random-instance parameters. Unused fields are ignored by commands that
/// do not need them.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Generator {
    pub n: usize,
    pub kappa: f64,
    pub alpha_a: f64,
    pub alpha_m: f64,
    pub d: usize,
    pub beta: f64,
    /// Seed for drawing the instance, separate from the trial seed so that
    /// sweeps over `seed` keep the instance fixed.
    pub instance_seed: u64,
}

impl Default for Generator {
    fn default() -> Self {
        Self {
            n: 2,
            kappa: 2.0,
            alpha_a: 1.0,
            alpha_m: 1.0,
            d: 2,
            beta: 1.0,
            instance_seed: 1,
        }
    }
}

impl Generator {
    fn validate(&self) -> Result<(), CliError> {
        if self.n == 0 {
            return Err(CliError::Config("generator.n must be >= 1".into()));
        }
        if !(self.kappa >= 1.0 && self.kappa.is_finite()) {
            return Err(CliError::Config(format!("generator.kappa must be >= 1, got {}", self.kappa)));
        }
        for (name, v) in [("alpha_a", self.alpha_a), ("alpha_m", self.alpha_m), ("beta", self.beta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("generator.{name} must be positive, got {v}")));
            }
        }
        if self.d == 0 || self.n < usize::BITS as usize && self.d > 1 << self.n {
            return Err(CliError::Config(format!(
                "generator.d = {} invalid for n = {}",
                self.d, self.n
            )));
        }
        Ok(())
    }
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<Command>,
    pub instance: Option<PathBuf>,
    pub generator: Option<Generator>,
    pub eps: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // relative instance paths are taken from the config's directory
        if let (Some(inst), Some(dir)) = (&cfg.instance, path.parent()) {
            if inst.is_relative() {
                cfg.instance = Some(dir.join(inst));
            }
        }
        Ok(cfg)
    }
}

pub const DEFAULT_TRIALS: usize = 100;

/// A fully resolved experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub instance: Option<PathBuf>,
    /// `None` means the command's built-in instance.
    pub generator: Option<Generator>,
    pub eps: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            instance: None,
            generator: None,
            eps: command.default_eps(),
            trials: DEFAULT_TRIALS,
            seed: 0,
            output: None,
        }
    }

    /// Merges a config file into the defaults for `command`.
    pub fn from_file(command: Command, file: FileConfig) -> Result<Self, CliError> {
        if let Some(c) = file.command {
            if c != command {
                return Err(CliError::Config(format!(
                    "config is for `{}` but `{}` was requested",
                    c.name(),
                    command.name()
                )));
            }
        }
        let mut cfg = Self::new(command);
        cfg.instance = file.instance;
        cfg.generator = file.generator;
        if let Some(eps) = file.eps {
            cfg.eps = eps;
        }
        if let Some(t) = file.trials {
            cfg.trials = t;
        }
        if let Some(s) = file.seed {
            cfg.seed = s;
        }
        cfg.output = file.output;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.trials == 0 {
            return Err(CliError::Config("trials must be >= 1".into()));
        }
        if self.eps.is_empty() {
            return Err(CliError::Config("eps list is empty".into()));
        }
        if let Some(bad) = self.eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(CliError::Config(format!("eps values must be positive, got {bad}")));
        }
        if self.instance.is_some() && self.generator.is_some() {
            return Err(CliError::Config("give either an instance file or a generator, not both".into()));
        }
        if self.command == Command::Encode && self.instance.is_some() {
            return Err(CliError::Config("encode draws a new instance; drop `instance`".into()));
        }
        if let Some(g) = &self.generator {
            g.validate()?;
        }
        Ok(())
    }

    pub fn generator_or_default(&self) -> Generator {
        self.generator.clone().unwrap_or_default()
    }
}

/// Shown under `--help`.
pub const CONFIG_HELP: &str = "\
Config file (TOML, all keys optional; flags override the file):
  command = \"slep\"        must match the subcommand when present
  instance = \"path\"       instance file; slep format for evhm/slep/scaling,
                          encoding format for sevhm/reduce
  eps = [0.1]             default [0.05] for evhm, [0.2, 0.1, 0.05, 0.025]
                          for scaling, [0.1] otherwise; scaling values are
                          multiples of alpha_m, the rest are absolute; slep
                          replaces the instance file's eps with each value
  trials = 100
  seed = 0
  output = \"out.csv\"      default stdout

  [generator]             random instance instead of the built-in one
  n = 2
  kappa = 2.0
  alpha_a = 1.0
  alpha_m = 1.0
  d = 2
  beta = 1.0
  instance_seed = 1

Built-in instances: slep uses A = Z, M = X, b = |+>; the others draw from
the generator defaults above. evhm and scaling use M and b of a slep-format
file with V|0> = b; reduce needs an encoding file with beta = 1.

Exit codes: 0 ok, 2 malformed config or instance, 3 register or degree
budget exceeded, 4 instance promise violated.

CSV columns: kind,seed,trial,eps,estimate,truth,abs_error,success,q_U_M,
q_U_A,q_U_b,q_V,q_O_val,q_O_loc,q_f,success_rate,median_abs_error,slope.
kind is `trial`, `summary` (one per eps) or `fit` (scaling only).";
