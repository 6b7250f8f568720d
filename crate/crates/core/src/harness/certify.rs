//! The invariant suite behind the `certify` command.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::counterexample::counterexample_geometric_median;
use super::scenarios::{aligned_sensitivity, iid_phase, scatter_phase, score_swap_trial, ScenarioSettings};
use super::sensitivity::BOUND_SLACK;
use crate::error::Result;
use crate::estimator::{coordinate_mean, project_to_interval, robust_gradient_estimate, EstimatorConfig};
use crate::privacy::{gaussian_sigma, PrivacyBudget};
use crate::problem::{linf_distance, random_dominant_hessian};
use crate::robust_stats::{coord_robust_stat, RobustStatKind};
use crate::{seed, table};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub seed: u64,
    /// Trials per randomized algebraic check.
    pub trials: usize,
    /// Seeds per trajectory-level check.
    pub scenario_seeds: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 10_000,
            scenario_seeds: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Worst observed value (or a frequency, for the statistical checks).
    pub statistic: f64,
    pub bound: f64,
    pub passed: bool,
}

pub const CERTIFY_SCHEMA: &str = "rdpsco-certify v1";

pub fn write_certify_csv<W: Write>(w: W, rows: &[CheckResult]) -> Result<()> {
    table::write_csv(w, CERTIFY_SCHEMA, rows)
}

type TrialRng = seed::Rng;

/// Runs `count` independent trials in parallel. Each returns
/// `Ok((violated, statistic))`; the statistic is folded with `max`.
fn run_trials<F>(root: u64, tag: u64, count: usize, f: F) -> Result<(usize, f64)>
where
    F: Fn(&mut TrialRng) -> Result<(bool, f64)> + Sync,
{
    let stream = seed::derive(root, tag);
    let outcomes = (0..count as u64)
        .into_par_iter()
        .map(|i| f(&mut seed::child_rng(stream, i)))
        .collect::<Result<Vec<_>>>()?;
    let violations = outcomes.iter().filter(|(v, _)| *v).count();
    let worst = outcomes.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
    Ok((violations, worst))
}

fn zero_violation(name: &str, trials: usize, (violations, worst): (usize, f64), bound: f64) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        trials,
        violations,
        statistic: worst,
        bound,
        passed: violations == 0,
    }
}

fn uniform(rng: &mut TrialRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn random_vectors(rng: &mut TrialRng, b: usize, d: usize, spread: f64) -> Vec<Vec<f64>> {
    (0..b)
        .map(|_| (0..d).map(|_| uniform(rng, -spread, spread)).collect())
        .collect()
}

const TRIM: f64 = 0.25;

fn kinds() -> [(&'static str, RobustStatKind<f64>); 2] {
    [
        ("median", RobustStatKind::CoordinateMedian),
        ("trimmed-mean", RobustStatKind::CoordinateTrimmedMean { trim_fraction: TRIM }),
    ]
}

/// Places `inside` of `b` points in `B∞(c, r)` and the rest far outside, then
/// returns the worst excess of the statistic over the radius.
fn containment_trial(rng: &mut TrialRng, kind: RobustStatKind<f64>, outliers_max: fn(usize) -> usize) -> Result<(bool, f64)> {
    let b = rng.random_range(1..=21usize);
    let d = rng.random_range(1..=8usize);
    let outliers = rng.random_range(0..=outliers_max(b));
    let c: Vec<f64> = (0..d).map(|_| uniform(rng, -5.0, 5.0)).collect();
    let r = uniform(rng, 0.01, 2.0);
    let mut pts: Vec<Vec<f64>> = (0..b - outliers)
        .map(|_| c.iter().map(|cj| cj + uniform(rng, -r, r)).collect())
        .collect();
    pts.extend((0..outliers).map(|_| c.iter().map(|cj| cj + uniform(rng, -50.0, 50.0)).collect::<Vec<_>>()));
    let stat = coord_robust_stat(&pts, kind)?;
    let excess = linf_distance(&stat, &c) - r;
    Ok((excess > 1e-12, excess))
}

fn lipschitz_trial(rng: &mut TrialRng, kind: RobustStatKind<f64>) -> Result<(bool, f64)> {
    let b = rng.random_range(1..=21usize);
    let d = rng.random_range(1..=8usize);
    let x = random_vectors(rng, b, d, 10.0);
    let delta = uniform(rng, 0.0, 1.0);
    let y: Vec<Vec<f64>> = x
        .iter()
        .map(|v| v.iter().map(|xi| xi + uniform(rng, -delta, delta)).collect())
        .collect();
    let moved = x.iter().zip(&y).map(|(a, b)| linf_distance(a, b)).fold(0.0, f64::max);
    let sx = coord_robust_stat(&x, kind)?;
    let sy = coord_robust_stat(&y, kind)?;
    let excess = linf_distance(&sx, &sy) - moved;
    Ok((excess > 1e-12, excess))
}

fn affine_trial(rng: &mut TrialRng, kind: RobustStatKind<f64>) -> Result<(bool, f64)> {
    let b = rng.random_range(1..=21usize);
    let d = rng.random_range(1..=8usize);
    let x = random_vectors(rng, b, d, 10.0);
    let mut a = uniform(rng, -3.0, 3.0);
    if a.abs() < 1e-3 {
        a = 1.0;
    }
    let shift: Vec<f64> = (0..d).map(|_| uniform(rng, -10.0, 10.0)).collect();
    let y: Vec<Vec<f64>> = x
        .iter()
        .map(|v| v.iter().zip(&shift).map(|(xi, s)| a * xi + s).collect())
        .collect();
    let sx = coord_robust_stat(&x, kind)?;
    let sy = coord_robust_stat(&y, kind)?;
    let worst = sx
        .iter()
        .zip(&sy)
        .zip(&shift)
        .map(|((u, v), s)| {
            let expect = a * u + s;
            (v - expect).abs() / (1.0 + expect.abs())
        })
        .fold(0.0, f64::max);
    Ok((worst > 1e-9, worst))
}

fn projection_trial(rng: &mut TrialRng) -> Result<(bool, f64)> {
    let a = uniform(rng, -5.0, 5.0);
    let b = a + uniform(rng, -1.0, 1.0);
    let c = uniform(rng, -8.0, 8.0);
    let d = c + uniform(rng, -1.0, 1.0);
    let r = uniform(rng, 0.0, 3.0);
    let gap = (project_to_interval(c, a, r) - project_to_interval(d, b, r)).abs();
    Ok((gap > 1.0 + 1e-12, gap))
}

fn estimator_lipschitz_trial(rng: &mut TrialRng, kind: RobustStatKind<f64>) -> Result<(bool, f64)> {
    let b = rng.random_range(1..=21usize);
    let d = rng.random_range(1..=8usize);
    let mut x = random_vectors(rng, b, d, 1.0);
    // A few far outliers so both branches of the estimator are exercised.
    for v in x.iter_mut().take(rng.random_range(0..=b / 3)) {
        for xi in v.iter_mut() {
            *xi += uniform(rng, -100.0, 100.0);
        }
    }
    let delta = uniform(rng, 0.0, 2.0);
    let y: Vec<Vec<f64>> = x
        .iter()
        .map(|v| v.iter().map(|xi| xi + uniform(rng, -delta, delta)).collect())
        .collect();
    let moved = x.iter().zip(&y).map(|(a, b)| linf_distance(a, b)).fold(0.0, f64::max);
    let cfg = EstimatorConfig::new(uniform(rng, 0.0, 3.0), kind)?;
    let gap = linf_distance(&robust_gradient_estimate(&x, &cfg)?, &robust_gradient_estimate(&y, &cfg)?);
    let excess = gap - moved;
    Ok((excess > 1e-12, excess))
}

fn unbiased_trial(rng: &mut TrialRng, kind: RobustStatKind<f64>) -> Result<(bool, f64)> {
    let b = rng.random_range(1..=21usize);
    let d = rng.random_range(1..=8usize);
    let varsigma = uniform(rng, 0.1, 2.0);
    let center: Vec<f64> = (0..d).map(|_| uniform(rng, -5.0, 5.0)).collect();
    let half = 0.49 * varsigma;
    let x: Vec<Vec<f64>> = (0..b)
        .map(|_| center.iter().map(|c| c + uniform(rng, -half, half)).collect())
        .collect();
    let est = robust_gradient_estimate(&x, &EstimatorConfig::new(varsigma, kind)?)?;
    let mean = coordinate_mean(&x)?;
    Ok((est != mean, linf_distance(&est, &mean)))
}

fn contractivity_trial(rng: &mut TrialRng) -> Result<(bool, f64)> {
    let d = rng.random_range(1..=8usize);
    let beta = uniform(rng, 0.1, 10.0);
    let a = random_dominant_hessian(d, beta, uniform(rng, 0.0, 1.0), rng)?;
    let eta = uniform(rng, 0.0, 2.0 / beta);
    let z: Vec<f64> = (0..d).map(|_| uniform(rng, -2.0, 2.0)).collect();
    let x: Vec<f64> = (0..d).map(|_| uniform(rng, -1.0, 1.0)).collect();
    let y: Vec<f64> = (0..d).map(|_| uniform(rng, -1.0, 1.0)).collect();
    let step = |p: &[f64]| -> Vec<f64> {
        let diff: Vec<f64> = p.iter().zip(&z).map(|(u, v)| u - v).collect();
        let g = a.matvec(&diff);
        p.iter().zip(&g).map(|(u, gi)| u - eta * gi).collect()
    };
    let excess = linf_distance(&step(&x), &step(&y)) - linf_distance(&x, &y);
    Ok((excess > BOUND_SLACK, excess))
}

fn frequency_check(name: &str, hits: usize, total: usize, floor: f64) -> CheckResult {
    let freq = hits as f64 / total.max(1) as f64;
    CheckResult {
        name: name.to_string(),
        trials: total,
        violations: total - hits,
        statistic: freq,
        bound: floor,
        passed: freq >= floor,
    }
}

/// Runs every check. The output order is fixed.
pub fn certify(opts: &CertifyOptions) -> Result<Vec<CheckResult>> {
    let n = opts.trials;
    let root = opts.seed;
    let mut out = Vec::new();

    for (i, (label, kind)) in kinds().into_iter().enumerate() {
        let tag = 10 * i as u64;
        let (name, outliers): (String, fn(usize) -> usize) = match kind {
            RobustStatKind::CoordinateMedian => (format!("{label}-majority-containment"), |b| (b - 1) / 2),
            _ => (format!("{label}-containment-within-trim"), |b| (TRIM * b as f64).floor() as usize),
        };
        let r = run_trials(root, tag + 1, n, |rng| containment_trial(rng, kind, outliers))?;
        out.push(zero_violation(&name, n, r, 1e-12));
        let r = run_trials(root, tag + 2, n, |rng| lipschitz_trial(rng, kind))?;
        out.push(zero_violation(&format!("{label}-lipschitz"), n, r, 1e-12));
        let r = run_trials(root, tag + 3, n, |rng| affine_trial(rng, kind))?;
        out.push(zero_violation(&format!("{label}-affine-equivariance"), n, r, 1e-9));
        let r = run_trials(root, tag + 4, n, |rng| estimator_lipschitz_trial(rng, kind))?;
        out.push(zero_violation(&format!("estimator-lipschitz-{label}"), n, r, 1e-12));
        let r = run_trials(root, tag + 5, n, |rng| unbiased_trial(rng, kind))?;
        out.push(zero_violation(&format!("estimator-unbiased-{label}"), n, r, 0.0));
    }
    let r = run_trials(root, 31, 10 * n, projection_trial)?;
    out.push(zero_violation("projection-stability", 10 * n, r, 1.0));
    let r = run_trials(root, 32, n / 10, contractivity_trial)?;
    out.push(zero_violation("contractivity", n / 10, r, BOUND_SLACK));

    let r = run_trials(root, 33, n, |rng| {
        let delta = uniform(rng, 1e-3, 10.0);
        let epsilon = uniform(rng, 0.01, 5.0);
        let budget = PrivacyBudget::new(epsilon, 10f64.powf(uniform(rng, -12.0, -1.0)))?;
        let sigma = gaussian_sigma(delta, &budget)?;
        let err = (sigma * epsilon / (delta * (2.0 * (1.25 / budget.delta).ln()).sqrt()) - 1.0).abs();
        Ok((err > 4.0 * f64::EPSILON, err))
    })?;
    out.push(zero_violation("gaussian-calibration", n, r, 4.0 * f64::EPSILON));

    let seeds: Vec<u64> = (0..opts.scenario_seeds as u64).map(|i| seed::derive(root, 1000 + i)).collect();
    let desk = ScenarioSettings::desk();
    let reports = seeds
        .par_iter()
        .map(|s| aligned_sensitivity(&desk, *s))
        .collect::<Result<Vec<_>>>()?;
    let violated = reports.iter().filter(|r| r.violated).count();
    let worst = reports
        .iter()
        .map(|r| r.first_gap() - r.base_gap_bound)
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(zero_violation("iteration-sensitivity", seeds.len(), (violated, worst), BOUND_SLACK));

    let swaps = seeds
        .par_iter()
        .map(|s| score_swap_trial(&desk, *s))
        .collect::<Result<Vec<_>>>()?;
    let violated = swaps.iter().filter(|(g, b)| g.iter().any(|v| v > b)).count();
    let worst = swaps
        .iter()
        .flat_map(|(g, b)| g.iter().map(move |v| v - b))
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(zero_violation("score-swap-sensitivity", swaps.len(), (violated, worst), 0.0));

    let defaults = ScenarioSettings::reference_defaults();
    let passes = seeds
        .par_iter()
        .map(|s| iid_phase(&defaults, *s).map(|log| log.passed))
        .collect::<Result<Vec<_>>>()?;
    out.push(frequency_check(
        "iid-pass-frequency",
        passes.iter().filter(|p| **p).count(),
        seeds.len(),
        0.95,
    ));
    let halts = seeds
        .par_iter()
        .map(|s| {
            scatter_phase(&defaults, *s)
                .map(|(log, cert)| cert.holds() && log.answers == [crate::privacy::Answer::Bottom])
        })
        .collect::<Result<Vec<_>>>()?;
    out.push(frequency_check(
        "scatter-halt-frequency",
        halts.iter().filter(|h| **h).count(),
        seeds.len(),
        0.95,
    ));

    let ce = counterexample_geometric_median(1e-3)?;
    let ok = ce.geometric_shift >= 0.9 && ce.coordinate_shift <= ce.alpha;
    out.push(CheckResult {
        name: "geometric-median-counterexample".into(),
        trials: 1,
        violations: usize::from(!ok),
        statistic: ce.geometric_shift,
        bound: 0.9,
        passed: ok,
    });
    Ok(out)
}
