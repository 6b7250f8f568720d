//! Excess-risk sweeps over `(n, m)` grids.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimizer::{default_params_with, localize, naive_dpsgd_baseline, ParamOptions};
use crate::privacy::{NoiseMode, PrivacyBudget};
use crate::problem::{make_quadratic_instance, QuadraticParams};
use crate::{seed, table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Robust,
    NaiveBaseline,
    NonPrivate,
}

impl Pipeline {
    pub const ALL: [Pipeline; 3] = [Pipeline::Robust, Pipeline::NaiveBaseline, Pipeline::NonPrivate];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Robust => "robust",
            Pipeline::NaiveBaseline => "naive-baseline",
            Pipeline::NonPrivate => "non-private",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown pipeline '{s}'")))
    }
}

/// Instance and parameter settings shared by every grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilitySettings {
    pub d: usize,
    pub budget: PrivacyBudget<f64>,
    pub beta: f64,
    pub sample_std: f64,
    pub params: ParamOptions<f64>,
}

impl UtilitySettings {
    pub fn new(d: usize, budget: PrivacyBudget<f64>) -> Self {
        Self {
            d,
            budget,
            beta: 1.0,
            sample_std: 0.5,
            params: ParamOptions::default(),
        }
    }
}

/// One `(grid point, seed, pipeline)` outcome. Failed runs keep their error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityRecord {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub pipeline: Pipeline,
    pub excess_risk: Option<f64>,
    pub passed: Option<bool>,
    pub error: Option<String>,
}

/// Runs one pipeline on the quadratic instance for `(n, m, seed)`. The
/// Hessian and population mean depend only on `(d, seed)`, so grid points of
/// one seed share a problem. All pipelines start at the domain center; the
/// naive baseline uses the robust step size and `⌊n/B⌋` steps.
pub fn run_single(
    n: usize,
    m: usize,
    s: u64,
    settings: &UtilitySettings,
    pipeline: Pipeline,
) -> Result<(f64, Option<bool>)> {
    let mut params = QuadraticParams::new(settings.d, n, m, settings.beta);
    params.sample_std = settings.sample_std;
    let inst = make_quadratic_instance(&params, s)?;
    let model = &inst.model;
    let base = default_params_with(
        n,
        m,
        settings.d,
        settings.budget,
        model.lipschitz_g(),
        model.radius_d(),
        model.smooth_beta(),
        &settings.params,
    )?;
    let x0 = model.domain().center().clone();
    let mut rng = seed::child_rng(s, 2);
    match pipeline {
        Pipeline::Robust | Pipeline::NonPrivate => {
            let cfg = if pipeline == Pipeline::NonPrivate { base.non_private() } else { base };
            let run = localize(&inst.dataset, model, &cfg, &x0, &mut rng)?;
            Ok((model.excess_risk(&run.point)?, Some(run.all_passed())))
        }
        Pipeline::NaiveBaseline => {
            let steps = n / base.batch_users;
            let x = naive_dpsgd_baseline(
                &inst.dataset,
                model,
                settings.budget,
                base.eta,
                steps,
                NoiseMode::Calibrated,
                &mut rng,
            )?;
            Ok((model.excess_risk(&x)?, None))
        }
    }
}

/// Every `(grid point, seed)` pair, run in parallel; rows come back in
/// grid-major, seed-minor order.
pub fn run_utility_experiment(
    grid: &[(usize, usize)],
    settings: &UtilitySettings,
    seeds: &[u64],
    pipeline: Pipeline,
) -> Result<Vec<UtilityRecord>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("utility grid is empty".into()));
    }
    let jobs: Vec<(usize, usize, u64)> = grid
        .iter()
        .flat_map(|&(n, m)| seeds.iter().map(move |&s| (n, m, s)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(n, m, s)| {
            let (excess_risk, passed, error) = match run_single(n, m, s, settings, pipeline) {
                Ok((r, p)) => (Some(r), p, None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            UtilityRecord {
                n,
                m,
                seed: s,
                pipeline,
                excess_risk,
                passed,
                error,
            }
        })
        .collect())
}

/// Mean ± standard error per grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilitySummary {
    pub n: usize,
    pub m: usize,
    pub pipeline: Pipeline,
    pub runs: usize,
    pub failures: usize,
    pub mean_excess_risk: Option<f64>,
    pub std_error: Option<f64>,
}

pub fn summarize(records: &[UtilityRecord]) -> Vec<UtilitySummary> {
    let mut keys: Vec<(usize, usize, Pipeline)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.n, r.m, r.pipeline)) {
            keys.push((r.n, r.m, r.pipeline));
        }
    }
    keys.into_iter()
        .map(|(n, m, pipeline)| {
            let group: Vec<&UtilityRecord> = records
                .iter()
                .filter(|r| r.n == n && r.m == m && r.pipeline == pipeline)
                .collect();
            let values: Vec<f64> = group.iter().filter_map(|r| r.excess_risk).collect();
            let (mean, se) = mean_and_se(&values);
            UtilitySummary {
                n,
                m,
                pipeline,
                runs: group.len(),
                failures: group.len() - values.len(),
                mean_excess_risk: mean,
                std_error: se,
            }
        })
        .collect()
}

fn mean_and_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (Some(mean), Some((var / k).sqrt()))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let rx = ranks(x);
    let ry = ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for k in &idx[i..=j] {
            out[*k] = rank;
        }
        i = j + 1;
    }
    out
}

pub const UTILITY_SCHEMA: &str = "rdpsco-utility v1";
pub const UTILITY_HEADER: [&str; 7] = ["n", "m", "seed", "pipeline", "excess_risk", "passed", "error"];
pub const SUMMARY_SCHEMA: &str = "rdpsco-utility-summary v1";

pub fn write_utility_csv<W: Write>(w: W, records: &[UtilityRecord]) -> Result<()> {
    table::write_csv_with_header(w, UTILITY_SCHEMA, &UTILITY_HEADER, records)
}

pub fn write_summary_csv<W: Write>(w: W, rows: &[UtilitySummary]) -> Result<()> {
    table::write_csv(w, SUMMARY_SCHEMA, rows)
}
