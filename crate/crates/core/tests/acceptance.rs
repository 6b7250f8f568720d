//! Desk-scale acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Laplace, Normal};

use robust_dpsco::estimator::{
    coordinate_mean, project_to_interval, robust_gradient_estimate, EstimatorConfig,
};
use robust_dpsco::harness::scenarios::{
    aligned_sensitivity, iid_phase, scatter_phase, score_swap_trial, ScenarioSettings,
};
use robust_dpsco::harness::{
    certify, counterexample_geometric_median, run_utility_experiment, spearman, summarize,
    write_certify_csv, write_utility_csv, CertifyOptions, Pipeline, UtilitySettings, BOUND_SLACK,
};
use robust_dpsco::privacy::{gaussian_mechanism, gaussian_sigma, laplace_sample, Answer, PrivacyBudget};
use robust_dpsco::problem::{linf_distance, make_quadratic_instance, QuadraticParams};
use robust_dpsco::robust_stats::{coord_robust_stat, RobustStatKind};
use robust_dpsco::seed;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

type TrialRng = seed::Rng;

fn uniform(rng: &mut TrialRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Counts trials for which `f` reports a violation.
fn violations<F>(tag: u64, trials: usize, f: F) -> usize
where
    F: Fn(&mut TrialRng) -> bool + Sync,
{
    (0..trials as u64)
        .into_par_iter()
        .filter(|&i| f(&mut seed::child_rng(seed::derive(2024, tag), i)))
        .count()
}

fn random_points(rng: &mut TrialRng, b: usize, d: usize, spread: f64) -> Vec<Vec<f64>> {
    (0..b)
        .map(|_| (0..d).map(|_| uniform(rng, -spread, spread)).collect())
        .collect()
}

fn kinds() -> [RobustStatKind<f64>; 2] {
    [RobustStatKind::CoordinateMedian, RobustStatKind::trimmed_mean(0.25).unwrap()]
}

const TRIALS: usize = 10_000;

fn criterion_1() -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for (k, kind) in kinds().into_iter().enumerate() {
        let base = 100 + 10 * k as u64;
        // More than B/2 points within B∞(c, r); the rest anywhere.
        let majority = violations(base, TRIALS, |rng| {
            let b = rng.random_range(1..=21usize);
            let d = rng.random_range(1..=8usize);
            let outliers = rng.random_range(0..=(b - 1) / 2);
            let c: Vec<f64> = (0..d).map(|_| uniform(rng, -5.0, 5.0)).collect();
            let r = uniform(rng, 0.0, 2.0);
            let mut pts: Vec<Vec<f64>> = (0..b - outliers)
                .map(|_| c.iter().map(|cj| cj + uniform(rng, -r, r)).collect())
                .collect();
            for _ in 0..outliers {
                let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
                pts.push(c.iter().map(|cj| cj + side * uniform(rng, 2.0 * r + 1.0, 100.0)).collect());
            }
            let stat = coord_robust_stat(&pts, kind).unwrap();
            linf_distance(&stat, &c) > r + 1e-12
        });
        let lipschitz = violations(base + 1, TRIALS, |rng| {
            let b = rng.random_range(1..=21usize);
            let d = rng.random_range(1..=8usize);
            let x = random_points(rng, b, d, 10.0);
            let delta = uniform(rng, 0.0, 1.0);
            let y: Vec<Vec<f64>> = x
                .iter()
                .map(|v| v.iter().map(|xi| xi + uniform(rng, -delta, delta)).collect())
                .collect();
            let moved = x.iter().zip(&y).map(|(a, b)| linf_distance(a, b)).fold(0.0, f64::max);
            let gap = linf_distance(&coord_robust_stat(&x, kind).unwrap(), &coord_robust_stat(&y, kind).unwrap());
            gap > moved + 1e-12
        });
        let affine = violations(base + 2, TRIALS, |rng| {
            let b = rng.random_range(1..=21usize);
            let d = rng.random_range(1..=8usize);
            let x = random_points(rng, b, d, 10.0);
            let a = uniform(rng, -3.0, 3.0);
            let s = uniform(rng, -10.0, 10.0);
            let z: Vec<Vec<f64>> = x.iter().map(|v| v.iter().map(|xi| a * xi + s).collect()).collect();
            let sx = coord_robust_stat(&x, kind).unwrap();
            let sz = coord_robust_stat(&z, kind).unwrap();
            sx.iter()
                .zip(&sz)
                .any(|(u, v)| (v - (a * u + s)).abs() > 1e-9 * (1.0 + (a * u + s).abs()))
        });
        ok &= majority == 0 && lipschitz == 0 && affine == 0;
        parts.push(format!(
            "{}: containment {majority}, lipschitz {lipschitz}, affine {affine} violations",
            kind.name()
        ));
    }
    verdict(
        ok,
        format!(
            "{} per axiom; {}; trim 1/4 drops floor(B/4) per tail but the axiom admits floor((B-1)/2) outliers",
            TRIALS,
            parts.join("; ")
        ),
    )
}

fn criterion_2() -> Verdict {
    let trials = 100_000;
    let bad = violations(200, trials, |rng| {
        let a = uniform(rng, -5.0, 5.0);
        let b = a + uniform(rng, -1.0, 1.0);
        let c = uniform(rng, -8.0, 8.0);
        let d = c + uniform(rng, -1.0, 1.0);
        let r = uniform(rng, 0.0, 3.0);
        (project_to_interval(c, a, r) - project_to_interval(d, b, r)).abs() > 1.0
    });
    verdict(bad == 0, format!("{bad} violations in {trials} tuples"))
}

fn criterion_3() -> Verdict {
    let mut lip = 0;
    let mut biased = 0;
    for (k, kind) in kinds().into_iter().enumerate() {
        lip += violations(300 + k as u64, TRIALS, |rng| {
            let b = rng.random_range(1..=21usize);
            let d = rng.random_range(1..=8usize);
            let mut x = random_points(rng, b, d, 1.0);
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
            let cfg = EstimatorConfig::new(uniform(rng, 0.0, 3.0), kind).unwrap();
            let gap = linf_distance(
                &robust_gradient_estimate(&x, &cfg).unwrap(),
                &robust_gradient_estimate(&y, &cfg).unwrap(),
            );
            gap > moved + 1e-12
        });
        // Every point within varsigma/2 of a center puts the mean within
        // varsigma of the statistic, so the estimate must be the mean itself.
        biased += violations(310 + k as u64, TRIALS, |rng| {
            let b = rng.random_range(1..=21usize);
            let d = rng.random_range(1..=8usize);
            let varsigma = uniform(rng, 0.1, 2.0);
            let c: Vec<f64> = (0..d).map(|_| uniform(rng, -5.0, 5.0)).collect();
            let x: Vec<Vec<f64>> = (0..b)
                .map(|_| c.iter().map(|cj| cj + uniform(rng, -0.49, 0.49) * varsigma).collect())
                .collect();
            let cfg = EstimatorConfig::new(varsigma, kind).unwrap();
            robust_gradient_estimate(&x, &cfg).unwrap() != coordinate_mean(&x).unwrap()
        });
    }
    verdict(
        lip == 0 && biased == 0,
        format!("lipschitz {lip} violations, unbiasedness {biased} mismatches over {} trials", 4 * TRIALS),
    )
}

fn criterion_4() -> Verdict {
    let trials = 1000;
    let bad = violations(400, trials, |rng| {
        let d = rng.random_range(1..=8usize);
        let mut p = QuadraticParams::new(d, 1, 1, uniform(rng, 0.1, 10.0));
        p.dominance = uniform(rng, 0.0, 1.0);
        let inst = make_quadratic_instance(&p, rng.random()).unwrap();
        let model = &inst.model;
        let beta = model.smooth_beta();
        let eta = uniform(rng, 0.0, 2.0 / beta);
        let z: Vec<f64> = (0..d).map(|_| uniform(rng, -2.0, 2.0)).collect();
        let x: Vec<f64> = (0..d).map(|_| uniform(rng, -1.0, 1.0)).collect();
        let y: Vec<f64> = (0..d).map(|_| uniform(rng, -1.0, 1.0)).collect();
        let step = |p: &[f64]| -> Vec<f64> {
            let g = model.gradient(p, &z);
            p.iter().zip(&g).map(|(u, gi)| u - eta * gi).collect()
        };
        linf_distance(&step(&x), &step(&y)) > linf_distance(&x, &y) + BOUND_SLACK
    });
    verdict(bad == 0, format!("{bad} violations over {trials} quadratics"))
}

fn scenario_seeds() -> Vec<u64> {
    (0..100u64).map(|i| seed::derive(4242, i)).collect()
}

fn criterion_5() -> Verdict {
    let desk = ScenarioSettings::desk();
    let reports: Vec<_> = scenario_seeds()
        .par_iter()
        .map(|s| aligned_sensitivity(&desk, *s).unwrap())
        .collect();
    let bad = reports
        .iter()
        .filter(|r| {
            let first = r.first_gap();
            first > r.base_gap_bound + BOUND_SLACK
                || r.per_step_linf_gap.iter().any(|g| *g > first + BOUND_SLACK)
        })
        .count();
    let worst = reports
        .iter()
        .map(|r| r.first_gap() / r.base_gap_bound)
        .fold(0.0, f64::max);
    verdict(
        bad == 0,
        format!("{bad} violations over {} coupled runs; worst step-1 gap / bound = {worst:.3}", reports.len()),
    )
}

fn criterion_6() -> Verdict {
    let desk = ScenarioSettings::desk();
    let trials: Vec<_> = scenario_seeds()
        .par_iter()
        .map(|s| score_swap_trial(&desk, *s).unwrap())
        .collect();
    let over_exact = trials.iter().filter(|(g, b)| g.iter().any(|v| v > b)).count();
    let over_two = trials.iter().filter(|(g, _)| g.iter().any(|v| *v > 2.0)).count();
    let worst = trials.iter().flat_map(|(g, _)| g.iter().copied()).fold(0.0, f64::max);
    verdict(
        over_exact == 0 && over_two == 0,
        format!(
            "{over_exact} exceed (2B-1)/B, {over_two} exceed 2 over {} trajectories; worst gap {worst:.4}",
            trials.len()
        ),
    )
}

fn criterion_7() -> Verdict {
    let defaults = ScenarioSettings::reference_defaults();
    let seeds = scenario_seeds();
    let passes = seeds
        .par_iter()
        .filter(|s| iid_phase(&defaults, **s).unwrap().passed)
        .count();
    let halts = seeds
        .par_iter()
        .filter(|s| {
            let (log, cert) = scatter_phase(&defaults, **s).unwrap();
            cert.holds() && log.answers == [Answer::Bottom]
        })
        .count();
    let n = seeds.len() as f64;
    let (p, h) = (passes as f64 / n, halts as f64 / n);
    verdict(p >= 0.95 && h >= 0.95, format!("iid pass frequency {p:.2}, scatter step-1 halt frequency {h:.2}"))
}

/// Kolmogorov distribution tail `P(K > λ)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

fn ks_p_value(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let d = sample
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d)
}

/// Mean and variance within three standard errors of the targets.
fn moments_ok(sample: &[f64], mean: f64, var: f64, fourth_central: f64) -> (bool, f64, f64) {
    let n = sample.len() as f64;
    let m = sample.iter().sum::<f64>() / n;
    let v = sample.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let z_mean = (m - mean) / (var / n).sqrt();
    let z_var = (v - var) / ((fourth_central - var * var) / n).sqrt();
    (z_mean.abs() <= 3.0 && z_var.abs() <= 3.0, z_mean, z_var)
}

fn criterion_8() -> Verdict {
    let draws = 1_000_000;
    let mut calib_worst = 0.0f64;
    let mut rng = seed::rng(800);
    for _ in 0..10_000 {
        let l2 = uniform(&mut rng, 1e-3, 10.0);
        let eps = uniform(&mut rng, 0.01, 5.0);
        let delta = 10f64.powf(uniform(&mut rng, -12.0, -1.0));
        let budget = PrivacyBudget::new(eps, delta).unwrap();
        let expect = (2.0 * (1.25 / delta).ln()).sqrt() * l2 / eps;
        let got = gaussian_sigma(l2, &budget).unwrap();
        calib_worst = calib_worst.max((got - expect).abs() / expect);
    }
    let calibrated = calib_worst <= 4.0 * f64::EPSILON;

    let b = 1.7;
    let lap: Vec<f64> = {
        let mut r = seed::rng(801);
        (0..draws).map(|_| laplace_sample(b, &mut r)).collect()
    };
    let (lap_mom, lz1, lz2) = moments_ok(&lap, 0.0, 2.0 * b * b, 24.0 * b.powi(4));
    let lap_dist = Laplace::new(0.0, b).unwrap();
    let lap_p = ks_p_value(lap, |x| lap_dist.cdf(x));

    let budget = PrivacyBudget::new(0.8, 1e-5).unwrap();
    let sigma = gaussian_sigma(2.0, &budget).unwrap();
    let gauss = gaussian_mechanism(&vec![0.0; draws], 2.0, &budget, &mut seed::rng(802)).unwrap();
    let (g_mom, gz1, gz2) = moments_ok(&gauss, 0.0, sigma * sigma, 3.0 * sigma.powi(4));
    let normal = Normal::new(0.0, sigma).unwrap();
    let g_p = ks_p_value(gauss, |x| normal.cdf(x));

    let ok = calibrated && lap_mom && g_mom && lap_p >= 0.01 && g_p >= 0.01;
    verdict(
        ok,
        format!(
            "sigma rel. error {calib_worst:.1e}; Laplace z = ({lz1:.2}, {lz2:.2}) KS p = {lap_p:.3}; Gaussian z = ({gz1:.2}, {gz2:.2}) KS p = {g_p:.3}"
        ),
    )
}

fn criterion_9() -> Verdict {
    let c = counterexample_geometric_median(1e-3).unwrap();
    verdict(
        c.geometric_shift >= 0.9 && c.coordinate_shift <= c.alpha,
        format!(
            "geometric median shift {:.6} (l2), coordinate-wise median shift {:.2e} (linf)",
            c.geometric_shift, c.coordinate_shift
        ),
    )
}

fn utility_settings(d: usize) -> UtilitySettings {
    UtilitySettings::new(d, PrivacyBudget::new(100.0, 1e-3).unwrap())
}

fn criterion_10() -> Verdict {
    let grid: Vec<(usize, usize)> = (10..=16).map(|k| (1usize << k, 1)).collect();
    let seeds: Vec<u64> = (0..20).collect();
    let settings = utility_settings(2);
    let mut part_a = Vec::new();
    let mut ok = true;
    for p in [Pipeline::NonPrivate, Pipeline::Robust] {
        let records = run_utility_experiment(&grid, &settings, &seeds, p).unwrap();
        let summary = summarize(&records);
        let (x, y): (Vec<f64>, Vec<f64>) = summary
            .iter()
            .map(|s| ((s.n * s.m) as f64, s.mean_excess_risk.unwrap_or(f64::NAN)))
            .unzip();
        let rho = spearman(&x, &y).unwrap_or(f64::NAN);
        ok &= rho <= -0.9;
        part_a.push(format!("{p} Spearman {rho:.2}"));
    }

    let settings = utility_settings(32);
    let seeds: Vec<u64> = (0..5).collect();
    let robust = run_utility_experiment(&[(16_384, 16)], &settings, &seeds, Pipeline::Robust).unwrap();
    let naive = run_utility_experiment(&[(16_384, 16)], &settings, &seeds, Pipeline::NaiveBaseline).unwrap();
    let wins = robust
        .iter()
        .zip(&naive)
        .filter(|(r, n)| match (r.excess_risk, n.excess_risk) {
            (Some(a), Some(b)) => a < b,
            _ => false,
        })
        .count();
    ok &= wins >= 4;
    verdict(
        ok,
        format!(
            "(a) d=2, nm = 2^10..2^16, 20 seeds: {}; (b) d=32: robust below naive in {wins}/5 seeds (epsilon = 100, delta = 1e-3)",
            part_a.join(", ")
        ),
    )
}

fn criterion_11() -> Verdict {
    let certify_bytes = || {
        let opts = CertifyOptions { seed: 11, trials: 500, scenario_seeds: 10 };
        let mut buf = Vec::new();
        write_certify_csv(&mut buf, &certify(&opts).unwrap()).unwrap();
        buf
    };
    let sweep_bytes = || {
        let settings = utility_settings(2);
        let mut buf = Vec::new();
        for p in Pipeline::ALL {
            let rows = run_utility_experiment(&[(1024, 1), (2048, 2)], &settings, &[3, 4], p).unwrap();
            write_utility_csv(&mut buf, &rows).unwrap();
        }
        buf
    };
    let certify_same = certify_bytes() == certify_bytes();
    let sweep_same = sweep_bytes() == sweep_bytes();
    verdict(
        certify_same && sweep_same,
        format!("certify identical: {certify_same}, sweep identical: {sweep_same}"),
    )
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 11] = [
        ("robust-statistic axioms", criterion_1),
        ("projection stability", criterion_2),
        ("estimator Lipschitz and unbiased", criterion_3),
        ("contractivity", criterion_4),
        ("iteration sensitivity", criterion_5),
        ("score sensitivity", criterion_6),
        ("concentration test behavior", criterion_7),
        ("mechanism calibration", criterion_8),
        ("geometric-median counterexample", criterion_9),
        ("utility direction", criterion_10),
        ("determinism", criterion_11),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = run();
        failed += usize::from(!v.passed);
        let mut out = std::io::stdout().lock();
        let _ = writeln!(
            out,
            "criterion {:>2} {} {name}: {} [{:.1}s]",
            i + 1,
            if v.passed { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
        let _ = out.flush();
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
