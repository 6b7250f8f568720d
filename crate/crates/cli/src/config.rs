//! Flat `key = value` configuration with strict keys.
//!
//! Precedence is flags over file over defaults. Every key can be given in a
//! file, through `--set key=value`, or through its dedicated flag when one
//! exists.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use robust_dpsco::harness::Pipeline;
use robust_dpsco::robust_stats::RobustStatKind;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Sensitivity,
    Sweep,
    Counterexample,
    Certify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Sensitivity => "sensitivity",
            Command::Sweep => "sweep",
            Command::Counterexample => "counterexample",
            Command::Certify => "certify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    Quadratic,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub instance: InstanceKind,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub beta: f64,
    pub sample_std: f64,
    pub truncation_constant: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub batch_constant: f64,
    pub noise_constant: f64,
    pub min_batch: usize,
    pub statistic: String,
    pub trim_fraction: f64,
    pub eta: Option<f64>,
    pub tau: Option<f64>,
    pub varsigma: Option<f64>,
    pub upsilon: Option<f64>,
    pub batch: Option<usize>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub alpha: f64,
    pub grid: Vec<(usize, usize)>,
    pub seeds: usize,
    pub pipelines: Vec<Pipeline>,
    pub trials: usize,
    pub scenario_seeds: usize,
    pub plot: Option<PathBuf>,
    pub dataset_out: Option<PathBuf>,
}

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("instance", "quadratic | linear"),
    ("n", "number of users"),
    ("m", "samples per user"),
    ("d", "dimension"),
    ("beta", "Hessian infinity-norm of the quadratic instance"),
    ("sample_std", "per-coordinate sample std of the quadratic instance"),
    ("truncation_constant", "c in the linear instance clip bound c*sqrt(m ln(mnd))"),
    ("epsilon", "privacy epsilon"),
    ("delta", "privacy delta"),
    ("batch_constant", "c in B = ceil(c ln(mnd/delta)/epsilon)"),
    ("noise_constant", "multiplier on the eta*sqrt(d)/tau output sensitivity"),
    ("min_batch", "lower bound on B"),
    ("statistic", "median | trimmed-mean"),
    ("trim_fraction", "trimmed-mean tail fraction in [0, 0.5)"),
    ("eta", "override the derived step size"),
    ("tau", "override the derived tau (varsigma follows as 1/tau)"),
    ("varsigma", "override the estimator threshold"),
    ("upsilon", "override the concentration threshold"),
    ("batch", "override the derived batch size B"),
    ("seed", "root seed"),
    ("output", "output file, '-' for stdout"),
    ("format", "csv | json"),
    ("alpha", "counterexample perturbation in (0, 0.1]"),
    ("grid", "sweep grid as n:m pairs separated by commas"),
    ("seeds", "sweep: seeds per grid point; sensitivity: coupled runs"),
    ("pipeline", "robust | naive-baseline | non-private | all (comma list allowed)"),
    ("trials", "certify trials per algebraic check"),
    ("scenario_seeds", "certify seeds per trajectory check"),
    ("plot", "sweep: also write a gnuplot script to this path"),
    ("dataset_out", "run: also write the sampled dataset to this path"),
];

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let mut cfg = Self {
            command,
            instance: InstanceKind::Quadratic,
            n: 12_800,
            m: 4,
            d: 2,
            beta: 1.0,
            sample_std: 0.5,
            truncation_constant: 3.0,
            epsilon: 1.0,
            delta: 1e-6,
            batch_constant: 100.0,
            noise_constant: 6.0,
            min_batch: 1,
            statistic: "median".into(),
            trim_fraction: 0.25,
            eta: None,
            tau: None,
            varsigma: None,
            upsilon: None,
            batch: None,
            seed: 0,
            output: None,
            format: Format::Csv,
            alpha: 1e-3,
            grid: Vec::new(),
            seeds: 1,
            pipelines: vec![Pipeline::Robust],
            trials: 10_000,
            scenario_seeds: 100,
            plot: None,
            dataset_out: None,
        };
        match command {
            Command::Sensitivity => {
                cfg.n = 600;
                cfg.m = 8;
                cfg.d = 4;
                cfg.batch_constant = 0.01;
                cfg.min_batch = 30;
                cfg.seeds = 100;
            }
            Command::Sweep => {
                cfg.d = 2;
                cfg.epsilon = 100.0;
                cfg.delta = 1e-3;
                cfg.grid = (10..=16).map(|k| (1usize << k, 1)).collect();
                cfg.seeds = 20;
                cfg.pipelines = Pipeline::ALL.to_vec();
            }
            _ => {}
        }
        cfg
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "instance" => {
                self.instance = match value {
                    "quadratic" => InstanceKind::Quadratic,
                    "linear" => InstanceKind::Linear,
                    _ => return Err(bad(key, value, "expected quadratic or linear")),
                }
            }
            "n" => self.n = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "d" => self.d = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "sample_std" => self.sample_std = parse(key, value)?,
            "truncation_constant" => self.truncation_constant = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "batch_constant" => self.batch_constant = parse(key, value)?,
            "noise_constant" => self.noise_constant = parse(key, value)?,
            "min_batch" => self.min_batch = parse(key, value)?,
            "statistic" => match value {
                "median" | "trimmed-mean" => self.statistic = value.to_string(),
                _ => return Err(bad(key, value, "expected median or trimmed-mean")),
            },
            "trim_fraction" => self.trim_fraction = parse(key, value)?,
            "eta" => self.eta = Some(parse(key, value)?),
            "tau" => self.tau = Some(parse(key, value)?),
            "varsigma" => self.varsigma = Some(parse(key, value)?),
            "upsilon" => self.upsilon = Some(parse(key, value)?),
            "batch" => self.batch = Some(parse(key, value)?),
            "seed" => self.seed = parse(key, value)?,
            "output" => self.output = (value != "-").then(|| PathBuf::from(value)),
            "format" => {
                self.format = match value {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return Err(bad(key, value, "expected csv or json")),
                }
            }
            "alpha" => self.alpha = parse(key, value)?,
            "grid" => self.grid = parse_grid(value).map_err(|m| bad(key, value, &m))?,
            "seeds" => self.seeds = parse(key, value)?,
            "pipeline" => {
                self.pipelines = if value == "all" {
                    Pipeline::ALL.to_vec()
                } else {
                    value
                        .split(',')
                        .map(|p| p.trim().parse::<Pipeline>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| bad(key, value, &e.to_string()))?
                }
            }
            "trials" => self.trials = parse(key, value)?,
            "scenario_seeds" => self.scenario_seeds = parse(key, value)?,
            "plot" => self.plot = Some(PathBuf::from(value)),
            "dataset_out" => self.dataset_out = Some(PathBuf::from(value)),
            _ => return Err(CliError::Usage(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    pub fn statistic_kind(&self) -> Result<RobustStatKind<f64>, CliError> {
        match self.statistic.as_str() {
            "trimmed-mean" => RobustStatKind::trimmed_mean(self.trim_fraction)
                .map_err(|e| CliError::Usage(format!("trim_fraction: {e}"))),
            _ => Ok(RobustStatKind::CoordinateMedian),
        }
    }
}

fn bad(key: &str, value: &str, why: &str) -> CliError {
    CliError::Usage(format!("invalid value '{value}' for key '{key}': {why}"))
}

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V, CliError>
where
    V::Err: fmt::Display,
{
    value.parse::<V>().map_err(|e| bad(key, value, &e.to_string()))
}

fn parse_grid(value: &str) -> Result<Vec<(usize, usize)>, String> {
    let grid = value
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| {
            let (n, m) = pair
                .trim()
                .split_once(':')
                .ok_or_else(|| format!("'{pair}' is not of the form n:m"))?;
            let n = n.trim().parse::<usize>().map_err(|e| e.to_string())?;
            let m = m.trim().parse::<usize>().map_err(|e| e.to_string())?;
            Ok((n, m))
        })
        .collect::<Result<Vec<_>, String>>()?;
    if grid.is_empty() {
        return Err("grid is empty".into());
    }
    Ok(grid)
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
/// Unknown and repeated keys are errors.
pub fn parse_file(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("line {}: expected key = value, got '{line}'", i + 1))
        })?;
        let key = key.trim();
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(CliError::Usage(format!("line {}: unknown configuration key '{key}'", i + 1)));
        }
        if let Some(prev) = seen.insert(key.to_string(), i + 1) {
            return Err(CliError::Usage(format!(
                "line {}: key '{key}' already set on line {prev}",
                i + 1
            )));
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Splits a `key=value` flag argument.
pub fn parse_assignment(arg: &str) -> Result<(String, String), CliError> {
    let (k, v) = arg
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("expected key=value, got '{arg}'")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Defaults, then file entries, then flag entries.
pub fn resolve(
    command: Command,
    file: Option<&str>,
    flags: &[(String, String)],
) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::defaults(command);
    if let Some(text) = file {
        for (k, v) in parse_file(text)? {
            cfg.set(&k, &v)?;
        }
    }
    for (k, v) in flags {
        cfg.set(k, v)?;
    }
    Ok(cfg)
}
