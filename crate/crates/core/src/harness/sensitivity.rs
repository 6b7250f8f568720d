//! Coupled noiseless trajectories on neighboring datasets.

use crate::concentration::concentration_score;
use crate::error::{invalid, Result};
use crate::optimizer::{sgd_trajectory, DpSgdConfig, SgdTrajectory};
use crate::problem::{linf_distance, Dataset, LossModel, UserRecord};
use crate::Scalar;

/// Additive slack on every analytic bound.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport<T> {
    /// `‖x_t − y_t‖∞` for `t = 1 … T`.
    pub per_step_linf_gap: Vec<T>,
    /// `η(4ρ + 2ς)`.
    pub base_gap_bound: T,
    /// `|s_t(𝒟) − s_t(𝒟′)|`.
    pub score_gaps: Vec<T>,
    pub violated: bool,
    pub violations: Vec<String>,
}

impl<T: Scalar> SensitivityReport<T> {
    pub fn first_gap(&self) -> T {
        self.per_step_linf_gap.first().copied().unwrap_or_else(T::zero)
    }
}

/// Runs the robust SGD loop without privatization on both datasets from the
/// same `x0` and with the same partition, then checks
/// `gap_1 ≤ η(4ρ + 2ς)`, `gap_t ≤ gap_1` and `|Δs_t| ≤ 2`, each with
/// [`BOUND_SLACK`].
pub fn measure_iteration_sensitivity<T: Scalar>(
    model: &LossModel<T>,
    pair: (&Dataset<T>, &Dataset<T>),
    cfg: &DpSgdConfig<T>,
    x0: &[T],
    rho: T,
) -> Result<SensitivityReport<T>> {
    let (a, b) = pair;
    if a.n() != b.n() || a.m() != b.m() || a.dim() != b.dim() {
        return invalid("neighboring datasets must share n, m and d");
    }
    cfg.validate(model)?;
    let est = cfg.estimator();
    let ta = sgd_trajectory(a.users(), model, cfg.batch_users, cfg.eta, &est, x0)?;
    let tb = sgd_trajectory(b.users(), model, cfg.batch_users, cfg.eta, &est, x0)?;
    let gaps: Vec<T> = ta
        .iterates
        .iter()
        .zip(&tb.iterates)
        .map(|(x, y)| linf_distance(x, y))
        .collect();
    let score_gaps = ta
        .batch_gradients
        .iter()
        .zip(&tb.batch_gradients)
        .map(|(ga, gb)| Ok((concentration_score(ga, cfg.tau)? - concentration_score(gb, cfg.tau)?).abs()))
        .collect::<Result<Vec<T>>>()?;
    let bound = cfg.eta * (T::lit(4.0) * rho + T::lit(2.0) * cfg.varsigma);
    let slack = T::lit(BOUND_SLACK);
    let mut violations = Vec::new();
    let first = gaps[0];
    if first > bound + slack {
        violations.push(format!("step 1 gap {first} exceeds eta(4rho+2varsigma) = {bound}"));
    }
    for (t, g) in gaps.iter().enumerate().skip(1) {
        if *g > first + slack {
            violations.push(format!("step {} gap {g} exceeds step-1 gap {first}", t + 1));
        }
    }
    for (t, g) in score_gaps.iter().enumerate() {
        if *g > T::lit(2.0) + slack {
            violations.push(format!("step {} score gap {g} exceeds 2", t + 1));
        }
    }
    Ok(SensitivityReport {
        per_step_linf_gap: gaps,
        base_gap_bound: bound,
        score_gaps,
        violated: !violations.is_empty(),
        violations,
    })
}

/// For every step, the change in score when the gradient in `slot` is
/// replaced by `replacement`'s gradient at the same iterate.
pub fn score_swap_gaps<T: Scalar>(
    model: &LossModel<T>,
    traj: &SgdTrajectory<T>,
    x0: &[T],
    replacement: &UserRecord<T>,
    slot: usize,
    tau: T,
) -> Result<Vec<T>> {
    let mut gaps = Vec::with_capacity(traj.steps());
    for (t, batch) in traj.batch_gradients.iter().enumerate() {
        if slot >= batch.len() {
            return invalid("swap slot outside the batch");
        }
        let x = if t == 0 { x0 } else { &traj.iterates[t - 1] };
        let mut swapped = batch.clone();
        swapped[slot] = model.user_avg_gradient(replacement, x)?;
        gaps.push((concentration_score(batch, tau)? - concentration_score(&swapped, tau)?).abs());
    }
    Ok(gaps)
}

/// `(2B − 1)/B`.
pub fn swap_score_bound<T: Scalar>(batch: usize) -> T {
    let b = T::from_count(batch);
    (b + b - T::one()) / b
}
