use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::DEFAULT_SIGMA_SQ;
use crate::refinement::{DEFAULT_LAMBDA, DEFAULT_TAU2_FACTOR};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Coarse,
    Refined,
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "coarse" => Ok(Stage::Coarse),
            "refined" => Ok(Stage::Refined),
            other => Err(Error::invalid(format!("unknown stage {other:?}"))),
        }
    }
}

/// Everything needed to run the detector over a directory of images.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub solver: SolverConfig,
    pub target_regions: usize,
    pub lambda: f64,
    pub tau2_factor: f64,
    pub sigma_sq_graph: f64,
    pub stage: Stage,
    pub workers: usize,
    pub input: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Dump the solver trace of every image as `<stem>_trace.csv`.
    pub trace: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            solver: SolverConfig::default(),
            target_regions: 200,
            lambda: DEFAULT_LAMBDA,
            tau2_factor: DEFAULT_TAU2_FACTOR,
            sigma_sq_graph: DEFAULT_SIGMA_SQ,
            stage: Stage::Refined,
            workers: 1,
            input: None,
            gt: None,
            output: None,
            trace: false,
        }
    }
}

fn parse<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("cannot parse {value:?}: {e}"))
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Parse a flat `key = value` file. Blank lines and `#` comments are
    /// ignored; unknown keys are errors. Unset keys keep their defaults.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut config = PipelineConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fail = |message: String| Error::Config {
                path: origin.to_path_buf(),
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail(format!("expected key = value, got {line:?}")))?;
            config
                .set(key.trim(), value.trim())
                .map_err(fail)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "alpha" => self.solver.alpha = parse(value)?,
            "gamma" => self.solver.gamma = parse(value)?,
            "mu0" => self.solver.mu0 = parse(value)?,
            "mu_max" => self.solver.mu_max = parse(value)?,
            "rho" => self.solver.rho = parse(value)?,
            "eps1" => self.solver.eps1 = parse(value)?,
            "eps2" => self.solver.eps2 = parse(value)?,
            "max_iters" => self.solver.max_iters = parse(value)?,
            "target_regions" => self.target_regions = parse(value)?,
            "lambda" => self.lambda = parse(value)?,
            "tau2_factor" => self.tau2_factor = parse(value)?,
            "sigma_sq_graph" => self.sigma_sq_graph = parse(value)?,
            "stage" => self.stage = value.parse().map_err(|e: Error| e.to_string())?,
            "workers" | "worker_count" => self.workers = parse(value)?,
            "input" => self.input = Some(PathBuf::from(value)),
            "gt" => self.gt = Some(PathBuf::from(value)),
            "output" => self.output = Some(PathBuf::from(value)),
            "trace" => self.trace = parse(value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.target_regions < 2 {
            return Err(Error::invalid("target_regions must be at least 2"));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::invalid("lambda must be positive"));
        }
        if !(self.tau2_factor > 1.0) {
            return Err(Error::invalid("tau2_factor must exceed 1"));
        }
        if !(self.sigma_sq_graph > 0.0) {
            return Err(Error::invalid("sigma_sq_graph must be positive"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers must be at least 1"));
        }
        Ok(())
    }
}
