//! Robust SGD phases, the localization outer loop, the default
//! parameterization and a naive per-step DP-SGD baseline.

use std::io::Write;
use std::ops::Range;

use log::{debug, warn};
use rand::Rng;
use serde::Serialize;

use crate::concentration::{answer_scores, concentration_score, ConcentrationConfig};
use crate::error::{invalid, Error, Result};
use crate::estimator::{coordinate_mean, robust_gradient_estimate, EstimatorConfig};
use crate::privacy::{gaussian_sigma, Answer, NoiseMode, PrivacyBudget};
use crate::problem::{Dataset, LossModel, Point, UserRecord};
use crate::robust_stats::RobustStatKind;
use crate::table;
use crate::Scalar;

/// Tunables of the robust pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpSgdConfig<T> {
    pub budget: PrivacyBudget<T>,
    pub eta: T,
    pub tau: T,
    pub varsigma: T,
    pub upsilon: T,
    pub batch_users: usize,
    pub kind: RobustStatKind<T>,
    /// Multiplier on the `η√d/τ` iterate sensitivity fed to the Gaussian
    /// mechanism. Zero disables output noise.
    pub noise_constant: T,
    /// Fraction of `ε` given to the concentration test; the rest privatizes
    /// the phase outputs.
    pub test_share: T,
    pub test_noise: NoiseMode,
}

impl<T: Scalar> DpSgdConfig<T> {
    pub fn validate(&self, model: &LossModel<T>) -> Result<()> {
        if self.batch_users == 0 {
            return invalid("batch size B must be at least 1");
        }
        if !(self.eta > T::zero()) || !self.eta.is_finite() {
            return invalid("step size eta must be positive and finite");
        }
        let beta = model.smooth_beta();
        if beta > T::zero() && self.eta > T::lit(2.0) / beta {
            return invalid(format!(
                "contractivity precondition eta <= 2/beta violated: eta = {}, 2/beta = {}",
                self.eta,
                T::lit(2.0) / beta
            ));
        }
        if !(self.tau > T::zero()) {
            return invalid("tau must be positive");
        }
        if !(self.varsigma >= T::zero()) {
            return invalid("varsigma must be non-negative");
        }
        if !(self.noise_constant >= T::zero()) {
            return invalid("noise constant must be non-negative");
        }
        if !(self.test_share > T::zero() && self.test_share < T::one()) {
            return invalid("test share must lie in (0, 1)");
        }
        self.kind.validate()
    }

    pub fn estimator(&self) -> EstimatorConfig<T> {
        EstimatorConfig {
            threshold_varsigma: self.varsigma,
            kind: self.kind,
        }
    }

    pub fn concentration(&self) -> ConcentrationConfig<T> {
        ConcentrationConfig {
            tau: self.tau,
            upsilon: self.upsilon,
            epsilon_share: self.budget.epsilon * self.test_share,
            failure_probability: None,
            mode: self.test_noise,
        }
    }

    /// Budget left for privatizing phase outputs.
    pub fn output_budget(&self) -> Result<PrivacyBudget<T>> {
        self.budget.share(T::one() - self.test_share)
    }

    /// Same parameters with every noise source switched off.
    pub fn non_private(mut self) -> Self {
        self.noise_constant = T::zero();
        self.test_noise = NoiseMode::InsecureDisabled;
        self
    }
}

/// Knobs of [`default_params_with`] that the closed forms leave open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamOptions<T> {
    /// Constant in `B = c·ln(mnd/δ)/ε`.
    pub batch_constant: T,
    pub noise_constant: T,
    pub kind: RobustStatKind<T>,
    /// Lower bound on `B` applied after the formula.
    pub min_batch: usize,
}

impl<T: Scalar> Default for ParamOptions<T> {
    fn default() -> Self {
        Self {
            batch_constant: T::lit(100.0),
            noise_constant: T::lit(6.0),
            kind: RobustStatKind::CoordinateMedian,
            min_batch: 1,
        }
    }
}

pub fn default_params<T: Scalar>(
    n: usize,
    m: usize,
    d: usize,
    budget: PrivacyBudget<T>,
    g: T,
    radius_d: T,
    beta: T,
) -> Result<DpSgdConfig<T>> {
    default_params_with(n, m, d, budget, g, radius_d, beta, &ParamOptions::default())
}

/// `ln(nmd)` floored at 1 so tiny instances keep finite parameters.
pub fn log_nmd<T: Scalar>(n: usize, m: usize, d: usize) -> T {
    let nmd = T::from_count(n) * T::from_count(m) * T::from_count(d);
    nmd.ln().max(T::one())
}

/// Batch size `⌈c·ln(mnd/δ)/ε⌉`, at least `min_batch`.
pub fn default_batch<T: Scalar>(
    n: usize,
    m: usize,
    d: usize,
    budget: &PrivacyBudget<T>,
    batch_constant: T,
    min_batch: usize,
) -> Result<usize> {
    if !(budget.delta > T::zero()) {
        return Err(Error::Unsupported("default parameters need delta > 0".into()));
    }
    let nmd = T::from_count(n) * T::from_count(m) * T::from_count(d);
    let raw = (batch_constant * (nmd / budget.delta).ln() / budget.epsilon).ceil();
    let b = raw.to_usize().ok_or_else(|| Error::InvalidArgument("batch size overflow".into()))?;
    Ok(b.max(min_batch).max(1))
}

#[allow(clippy::too_many_arguments)]
pub fn default_params_with<T: Scalar>(
    n: usize,
    m: usize,
    d: usize,
    budget: PrivacyBudget<T>,
    g: T,
    radius_d: T,
    beta: T,
    opts: &ParamOptions<T>,
) -> Result<DpSgdConfig<T>> {
    if n == 0 || m == 0 || d == 0 {
        return invalid("n, m and d must be positive");
    }
    if !(g > T::zero()) || !(radius_d > T::zero()) || !(beta >= T::zero()) {
        return invalid("G and D must be positive and beta non-negative");
    }
    let eps = budget.epsilon;
    if eps > T::lit(2.0) {
        warn!("epsilon = {eps} exceeds 2; the default parameters assume a constant-size epsilon");
    }
    let b = default_batch(n, m, d, &budget, opts.batch_constant, opts.min_batch)?;
    if n < 2 * b {
        return Err(Error::InfeasibleConfiguration(format!(
            "n = {n} users cannot fill one batch of B = {b} in the first phase (needs n >= {})",
            2 * b
        )));
    }
    let (nf, mf, df) = (T::from_count(n), T::from_count(m), T::from_count(d));
    let lnmd = log_nmd::<T>(n, m, d);
    let delta = budget.delta;
    let min_n = ((nf * df / delta).ln()).powi(2) / eps;
    if nf < min_n {
        warn!("n = {n} is below ln^2(nd/delta)/epsilon = {min_n}");
    }
    let tau = mf.sqrt() / (g * lnmd);
    let steps = n / 2 / b;
    let bf = T::from_count(b);
    let upsilon = T::lit(0.9) * bf + T::lit(2.0) * (T::from_count(steps) / delta).ln() / eps;
    let first = bf * mf.sqrt() / nf.sqrt();
    let second = mf.sqrt() * eps / (df * (T::one() / delta).ln() * lnmd).sqrt();
    let mut eta = radius_d / g * first.min(second);
    if beta > T::zero() {
        eta = eta.min(T::lit(2.0) / beta).min(T::one() / (T::lit(6.0) * beta * bf));
        let admissible = g / radius_d
            * (nf.sqrt() * eps / (mf.sqrt() * (nf * mf * df / delta).ln())
                + (df * (T::one() / delta).ln() * lnmd).sqrt() / (mf.sqrt() * eps));
        if beta > admissible {
            warn!("beta = {beta} exceeds the admissible smoothness range {admissible}");
        }
    }
    debug!("default parameters: B={b} tau={tau} upsilon={upsilon} eta={eta}");
    Ok(DpSgdConfig {
        budget,
        eta,
        tau,
        varsigma: T::one() / tau,
        upsilon,
        batch_users: b,
        kind: opts.kind,
        noise_constant: opts.noise_constant,
        test_share: T::lit(0.5),
        test_noise: NoiseMode::Calibrated,
    })
}

/// The deterministic part of a phase: iterates, estimates and the per-step
/// user gradients, without the concentration test.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdTrajectory<T> {
    /// `x_1 … x_T`.
    pub iterates: Vec<Vec<T>>,
    /// `g_0 … g_{T−1}`.
    pub estimates: Vec<Vec<T>>,
    /// The `B` user gradients of every step.
    pub batch_gradients: Vec<Vec<Vec<T>>>,
}

impl<T: Scalar> SgdTrajectory<T> {
    pub fn steps(&self) -> usize {
        self.iterates.len()
    }

    pub fn average_iterate(&self) -> Result<Vec<T>> {
        coordinate_mean(&self.iterates)
    }
}

/// Runs `⌊users/B⌋` robust projected steps from `x0`; step `t` consumes users
/// `(t−1)B .. tB`. Remainder users are ignored.
pub fn sgd_trajectory<T: Scalar>(
    users: &[UserRecord<T>],
    model: &LossModel<T>,
    batch_users: usize,
    eta: T,
    estimator: &EstimatorConfig<T>,
    x0: &[T],
) -> Result<SgdTrajectory<T>> {
    if batch_users == 0 {
        return invalid("batch size B must be at least 1");
    }
    let steps = users.len() / batch_users;
    if steps == 0 {
        return Err(Error::InfeasibleConfiguration(format!(
            "{} users cannot fill one batch of B = {batch_users}",
            users.len()
        )));
    }
    let mut x = x0.to_vec();
    let mut out = SgdTrajectory {
        iterates: Vec::with_capacity(steps),
        estimates: Vec::with_capacity(steps),
        batch_gradients: Vec::with_capacity(steps),
    };
    for batch in users.chunks_exact(batch_users) {
        let grads = batch
            .iter()
            .map(|u| model.user_avg_gradient(u, &x))
            .collect::<Result<Vec<_>>>()?;
        let g = robust_gradient_estimate(&grads, estimator)?;
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi = *xi - eta * *gi;
        }
        model.domain().project_in_place(&mut x);
        out.iterates.push(x.clone());
        out.estimates.push(g);
        out.batch_gradients.push(grads);
    }
    Ok(out)
}

/// Per-phase record of a robust run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog<T> {
    pub phase: usize,
    pub iterates: Vec<Point<T>>,
    pub gradient_estimates: Vec<Vec<T>>,
    pub scores: Vec<T>,
    /// Truncated at the first ⊥.
    pub answers: Vec<Answer>,
    pub passed: bool,
    /// Excess risk of every iterate, empty when the population is unknown.
    pub excess_risk: Vec<T>,
    pub discarded_users: usize,
}

pub const TRAJECTORY_SCHEMA: &str = "rdpsco-trajectory v1";
pub const TRAJECTORY_HEADER: [&str; 6] = ["phase", "step", "score", "answer", "linf_gap", "excess_risk"];

/// One CSV row of a trajectory. `answer` is `none` for steps after a halt.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub phase: usize,
    pub step: usize,
    pub score: f64,
    pub answer: String,
    pub linf_gap: Option<f64>,
    pub excess_risk: Option<f64>,
}

impl<T: Scalar> TrajectoryLog<T> {
    pub fn steps(&self) -> usize {
        self.iterates.len()
    }

    /// Rows for CSV output; `gaps` fills the coupled-gap column when given.
    pub fn rows(&self, gaps: Option<&[T]>) -> Vec<TrajectoryRow> {
        (0..self.steps())
            .map(|t| TrajectoryRow {
                phase: self.phase,
                step: t + 1,
                score: self.scores[t].to_f64_lossy(),
                answer: self
                    .answers
                    .get(t)
                    .map_or_else(|| "none".to_string(), |a| a.to_string()),
                linf_gap: gaps.and_then(|g| g.get(t)).map(|v| v.to_f64_lossy()),
                excess_risk: self.excess_risk.get(t).map(|v| v.to_f64_lossy()),
            })
            .collect()
    }
}

pub fn write_trajectory_csv<W: Write>(w: W, rows: &[TrajectoryRow]) -> Result<()> {
    table::write_csv_with_header(w, TRAJECTORY_SCHEMA, &TRAJECTORY_HEADER, rows)
}

fn run_phase<T: Scalar, R: Rng + ?Sized>(
    users: &[UserRecord<T>],
    model: &LossModel<T>,
    cfg: &DpSgdConfig<T>,
    eta: T,
    x0: &Point<T>,
    phase: usize,
    rng: &mut R,
) -> Result<(Point<T>, TrajectoryLog<T>)> {
    if !model.domain().contains(x0.coords()) {
        return invalid("x0 must lie in the domain");
    }
    let traj = sgd_trajectory(users, model, cfg.batch_users, eta, &cfg.estimator(), x0.coords())?;
    let discarded = users.len() - traj.steps() * cfg.batch_users;
    if discarded > 0 {
        debug!("phase {phase}: discarding {discarded} remainder users");
    }
    let scores = traj
        .batch_gradients
        .iter()
        .map(|batch| concentration_score(batch, cfg.tau))
        .collect::<Result<Vec<_>>>()?;
    let answers = answer_scores(&scores, &cfg.concentration(), rng)?;
    let passed = answers.len() == scores.len() && answers.iter().all(|a| a.is_top());
    let output = if passed {
        Point::new(traj.average_iterate()?)?
    } else {
        x0.clone()
    };
    let iterates = traj
        .iterates
        .into_iter()
        .map(Point::new)
        .collect::<Result<Vec<_>>>()?;
    let excess_risk = if model.population_mean().is_some() {
        iterates.iter().map(|x| model.excess_risk(x)).collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let log = TrajectoryLog {
        phase,
        iterates,
        gradient_estimates: traj.estimates,
        scores,
        answers,
        passed,
        excess_risk,
        discarded_users: discarded,
    };
    Ok((output, log))
}

/// One robust SGD phase over every user of `dataset`: returns the average
/// iterate when each concentration answer is ⊤ and `x0` otherwise.
pub fn dpsgd_phase<T: Scalar, R: Rng + ?Sized>(
    dataset: &Dataset<T>,
    model: &LossModel<T>,
    cfg: &DpSgdConfig<T>,
    x0: &Point<T>,
    rng: &mut R,
) -> Result<(Point<T>, TrajectoryLog<T>)> {
    cfg.validate(model)?;
    check_dims(dataset, model)?;
    run_phase(dataset.users(), model, cfg, cfg.eta, x0, 1, rng)
}

fn check_dims<T: Scalar>(dataset: &Dataset<T>, model: &LossModel<T>) -> Result<()> {
    if dataset.dim() != model.dim() {
        return invalid("dataset and model dimensions differ");
    }
    Ok(())
}

/// Base of the step-size schedule `η_s = η · base^{−s}`.
pub fn schedule_base<T: Scalar>(m: usize) -> T {
    T::from_count(m).ln().max(T::lit(2.0))
}

/// Disjoint user ranges of the localization phases: `⌊n/2^s⌋` users for
/// `s = 1 … S` with `S = max(1, ⌊log₂(n/B)⌋)`.
pub fn phase_plan(n: usize, batch_users: usize) -> Result<Vec<Range<usize>>> {
    if batch_users == 0 {
        return invalid("batch size B must be at least 1");
    }
    if n < 2 * batch_users {
        return Err(Error::InfeasibleConfiguration(format!(
            "localization needs at least {} users for B = {batch_users}, got {n}",
            2 * batch_users
        )));
    }
    let ratio = n / batch_users;
    let phases = (usize::BITS - 1 - ratio.leading_zeros()).max(1) as usize;
    let mut start = 0;
    let mut plan = Vec::with_capacity(phases);
    for s in 1..=phases {
        let len = n >> s;
        if len < batch_users {
            break;
        }
        plan.push(start..start + len);
        start += len;
    }
    Ok(plan)
}

/// Output of [`localize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Localization<T> {
    pub point: Point<T>,
    pub phases: Vec<TrajectoryLog<T>>,
    /// Gaussian noise scale applied after each phase.
    pub sigmas: Vec<T>,
    pub user_ranges: Vec<Range<usize>>,
}

impl<T: Scalar> Localization<T> {
    pub fn all_passed(&self) -> bool {
        self.phases.iter().all(|p| p.passed)
    }

    pub fn rows(&self) -> Vec<TrajectoryRow> {
        self.phases.iter().flat_map(|p| p.rows(None)).collect()
    }
}

/// Localization: phase `s` runs a robust SGD phase on `⌊n/2^s⌋` fresh users
/// with step `η_s`, then releases `Π(x̄_s + ζ_s)`, `ζ_s ~ N(0, σ_s² I)`.
pub fn localize<T: Scalar, R: Rng + ?Sized>(
    dataset: &Dataset<T>,
    model: &LossModel<T>,
    cfg: &DpSgdConfig<T>,
    x0: &Point<T>,
    rng: &mut R,
) -> Result<Localization<T>> {
    cfg.validate(model)?;
    check_dims(dataset, model)?;
    let plan = phase_plan(dataset.n(), cfg.batch_users)?;
    let base = schedule_base::<T>(dataset.m());
    let output_budget = cfg.output_budget()?;
    let sqrt_d = T::from_count(dataset.dim()).sqrt();
    let mut x = x0.clone();
    let mut eta = cfg.eta;
    let mut out = Localization {
        point: x0.clone(),
        phases: Vec::with_capacity(plan.len()),
        sigmas: Vec::with_capacity(plan.len()),
        user_ranges: plan.clone(),
    };
    for (i, range) in plan.into_iter().enumerate() {
        eta = eta / base;
        let users = &dataset.users()[range];
        let (avg, log) = run_phase(users, model, cfg, eta, &x, i + 1, rng)?;
        let sensitivity = cfg.noise_constant * eta * sqrt_d / cfg.tau;
        let sigma = gaussian_sigma(sensitivity, &output_budget)?;
        let mut next = avg.into_coords();
        if sigma > T::zero() {
            for v in &mut next {
                *v = *v + sigma * T::sample_standard_normal(rng);
            }
        }
        model.domain().project_in_place(&mut next);
        x = Point::new(next)?;
        out.phases.push(log);
        out.sigmas.push(sigma);
    }
    out.point = x;
    Ok(out)
}

/// Per-step Gaussian DP-SGD: `steps` disjoint batches of `⌊n/steps⌋` users,
/// each batch mean perturbed with `ℓ2` sensitivity `2G√d/B` at the
/// advanced-composition share of `budget`. Starts from the domain center and
/// returns the average iterate.
pub fn naive_dpsgd_baseline<T: Scalar, R: Rng + ?Sized>(
    dataset: &Dataset<T>,
    model: &LossModel<T>,
    budget: PrivacyBudget<T>,
    eta: T,
    steps: usize,
    mode: NoiseMode,
    rng: &mut R,
) -> Result<Point<T>> {
    check_dims(dataset, model)?;
    if steps == 0 {
        return invalid("baseline needs at least one step");
    }
    if !(eta > T::zero()) {
        return invalid("step size eta must be positive");
    }
    let beta = model.smooth_beta();
    if beta > T::zero() && eta > T::lit(2.0) / beta {
        return invalid("contractivity precondition eta <= 2/beta violated");
    }
    let batch = dataset.n() / steps;
    if batch == 0 {
        return Err(Error::InfeasibleConfiguration(format!(
            "{} users cannot fill {steps} steps",
            dataset.n()
        )));
    }
    let step_budget = budget.advanced_composition_step(steps)?;
    let sens = T::lit(2.0) * model.lipschitz_g() * T::from_count(dataset.dim()).sqrt()
        / T::from_count(batch);
    let sigma = match mode {
        NoiseMode::Calibrated => gaussian_sigma(sens, &step_budget)?,
        NoiseMode::InsecureDisabled => T::zero(),
    };
    let mut x = model.domain().center().coords().to_vec();
    let mut sum = vec![T::zero(); x.len()];
    for users in dataset.users().chunks_exact(batch).take(steps) {
        let grads = users
            .iter()
            .map(|u| model.user_avg_gradient(u, &x))
            .collect::<Result<Vec<_>>>()?;
        let g = coordinate_mean(&grads)?;
        for (xi, gi) in x.iter_mut().zip(&g) {
            let noise = if sigma > T::zero() {
                sigma * T::sample_standard_normal(rng)
            } else {
                T::zero()
            };
            *xi = *xi - eta * (*gi + noise);
        }
        model.domain().project_in_place(&mut x);
        for (s, v) in sum.iter_mut().zip(&x) {
            *s = *s + *v;
        }
    }
    let k = T::from_count(steps);
    Point::new(sum.into_iter().map(|s| s / k).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{make_quadratic_instance, Domain, QuadraticParams};
    use crate::seed;

    fn budget() -> PrivacyBudget<f64> {
        PrivacyBudget::new(1.0, 1e-6).unwrap()
    }

    #[test]
    fn default_params_closed_forms() {
        let cfg = default_params(10_000, 100, 16, budget(), 1.0, 1.0, 0.0).unwrap();
        let b = (100.0 * (1.6e7f64 / 1e-6).ln()).ceil() as usize;
        assert_eq!(b, 3041);
        assert_eq!(cfg.batch_users, b);
        let lnmd = 1.6e7f64.ln();
        assert!((cfg.tau - 10.0 / lnmd).abs() < 1e-12);
        assert!((cfg.varsigma * cfg.tau - 1.0).abs() < 1e-12);
        let ups = 0.9 * b as f64 + 2.0 * (1.0f64 / 1e-6).ln();
        assert!((cfg.upsilon - ups).abs() < 1e-9);
        let first = b as f64 * 10.0 / 100.0;
        let second = 10.0 / (16.0 * (1e6f64).ln() * lnmd).sqrt();
        assert!((cfg.eta - first.min(second)).abs() < 1e-15);
        assert!(cfg.validate(&LossModel::linear(Domain::new(Point::zeros(16), 1.0).unwrap(), 1.0, vec![0.0; 16]).unwrap()).is_ok());

        assert!(matches!(
            default_params(5_000, 100, 16, budget(), 1.0, 1.0, 0.0),
            Err(Error::InfeasibleConfiguration(_))
        ));
    }

    #[test]
    fn tau_scales_with_root_m() {
        let o = ParamOptions { batch_constant: 1.0, ..ParamOptions::default() };
        let a = default_params_with(1000, 100, 4, budget(), 1.0, 1.0, 0.0, &o).unwrap();
        let b = default_params_with(1000, 200, 4, budget(), 1.0, 1.0, 0.0, &o).unwrap();
        let ratio = b.tau / a.tau;
        let logs = (1000.0 * 400.0f64).ln() / (1000.0 * 800.0f64).ln();
        assert!((ratio - 2f64.sqrt() * logs).abs() < 1e-12);
    }

    #[test]
    fn phase_plan_is_disjoint_and_large_enough() {
        let plan = phase_plan(1000, 30).unwrap();
        assert_eq!(plan.len(), 5);
        let mut end = 0;
        for r in &plan {
            assert_eq!(r.start, end);
            assert!(r.len() >= 30);
            end = r.end;
        }
        assert!(end <= 1000);
        assert_eq!(phase_plan(60, 30).unwrap(), vec![0..30]);
        assert!(phase_plan(59, 30).is_err());
    }

    #[test]
    fn single_user_linear_step() {
        let domain = Domain::new(Point::zeros(2), 1.0).unwrap();
        let model = LossModel::linear(domain, 5.0, vec![0.5, -0.5]).unwrap();
        let user = UserRecord::new(vec![vec![3.0, -1.0]]).unwrap();
        let data = Dataset::new(vec![user]).unwrap();
        let cfg = DpSgdConfig {
            budget: budget(),
            eta: 0.1,
            tau: 1.0,
            varsigma: 1.0,
            upsilon: 0.0,
            batch_users: 1,
            kind: RobustStatKind::CoordinateMedian,
            noise_constant: 0.0,
            test_share: 0.5,
            test_noise: NoiseMode::InsecureDisabled,
        };
        let (x, log) = dpsgd_phase(&data, &model, &cfg, &Point::zeros(2), &mut seed::rng(0)).unwrap();
        assert!(log.passed);
        assert_eq!(x.coords(), &[0.0 - 0.1 * -3.0, 0.0 - 0.1 * 1.0]);
    }

    #[test]
    fn eta_above_two_over_beta_rejected() {
        let inst = make_quadratic_instance(&QuadraticParams::new(2, 8, 2, 1.0), 1).unwrap();
        let mut cfg = default_params_with(
            8,
            2,
            2,
            budget(),
            inst.model.lipschitz_g(),
            1.0,
            1.0,
            &ParamOptions { batch_constant: 0.01, ..ParamOptions::default() },
        )
        .unwrap();
        cfg.eta = 2.5;
        let err = dpsgd_phase(&inst.dataset, &inst.model, &cfg, &Point::zeros(2), &mut seed::rng(0));
        assert!(err.unwrap_err().to_string().contains("2/beta"));
    }

    #[test]
    fn trajectory_csv_has_versioned_header() {
        let log = TrajectoryLog::<f64> {
            phase: 1,
            iterates: vec![Point::zeros(1), Point::zeros(1)],
            gradient_estimates: vec![vec![0.0], vec![0.0]],
            scores: vec![3.0, 2.5],
            answers: vec![Answer::Bottom],
            passed: false,
            excess_risk: vec![0.25, 0.125],
            discarded_users: 0,
        };
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &log.rows(None)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "# rdpsco-trajectory v1\nphase,step,score,answer,linf_gap,excess_risk\n\
             1,1,3.0,bottom,,0.25\n1,2,2.5,none,,0.125\n"
        );
    }
}
