//! Neighboring-dataset construction and step-1 ball-membership certificates.

use crate::error::{invalid, Error, Result};
use crate::problem::{linf_distance, Dataset, LossKind, LossModel, UserRecord};
use crate::robust_stats::{coord_robust_stat, RobustStatKind};
use crate::Scalar;

/// What the pair construction must certify about the step-1 batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alignment<T> {
    /// At least `2B/3` step-1 gradients of each dataset in one common ball of
    /// radius `rho`.
    Aligned { rho: T },
    /// Bad users injected into the step-1 batch so that fewer than `B/3`
    /// gradients share any `1/τ` ball.
    AdversarialScatter,
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSpec<T> {
    pub swap_user_index: usize,
    pub replacement: UserRecord<T>,
    pub alignment: Alignment<T>,
}

/// Where the first step of a phase is taken.
#[derive(Debug, Clone, Copy)]
pub struct ProbeContext<'a, T> {
    pub model: &'a LossModel<T>,
    pub x0: &'a [T],
    pub batch_users: usize,
    pub tau: T,
}

/// The `B` user gradients of the first step, evaluated at `x0`.
pub fn step_one_gradients<T: Scalar>(dataset: &Dataset<T>, ctx: &ProbeContext<'_, T>) -> Result<Vec<Vec<T>>> {
    if dataset.n() < ctx.batch_users || ctx.batch_users == 0 {
        return invalid("dataset holds fewer users than one batch");
    }
    dataset.users()[..ctx.batch_users]
        .iter()
        .map(|u| ctx.model.user_avg_gradient(u, ctx.x0))
        .collect()
}

/// Number of `points` within ℓ∞ distance `radius` of `center`.
pub fn ball_count<T: Scalar>(points: &[Vec<T>], center: &[T], radius: T) -> usize {
    points.iter().filter(|p| linf_distance(p, center) <= radius).count()
}

/// Largest ball count over centers placed at the points themselves.
pub fn max_ball_count<T: Scalar>(points: &[Vec<T>], radius: T) -> usize {
    points.iter().map(|c| ball_count(points, c, radius)).max().unwrap_or(0)
}

/// Best common-ball count over both collections, trying the coordinate
/// medians and every point of either side as center. Returns the smaller of
/// the two sides' counts for the best center.
pub fn common_ball_count<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>], rho: T) -> Result<usize> {
    let mut centers = vec![
        coord_robust_stat(a, RobustStatKind::CoordinateMedian)?,
        coord_robust_stat(b, RobustStatKind::CoordinateMedian)?,
    ];
    centers.extend(a.iter().cloned());
    centers.extend(b.iter().cloned());
    Ok(centers
        .iter()
        .map(|c| ball_count(a, c, rho).min(ball_count(b, c, rho)))
        .max()
        .unwrap_or(0))
}

/// `3k ≥ 2B`.
pub fn is_two_thirds(count: usize, batch: usize) -> bool {
    3 * count >= 2 * batch
}

/// `3k < B`.
pub fn is_below_third(count: usize, batch: usize) -> bool {
    3 * count < batch
}

/// A user whose average gradient at `x` equals `target`.
pub fn user_with_gradient<T: Scalar>(model: &LossModel<T>, x: &[T], target: &[T], m: usize) -> Result<UserRecord<T>> {
    let z = match model.kind() {
        LossKind::Quadratic { hessian } => {
            let shift = hessian.solve(target)?;
            x.iter().zip(&shift).map(|(a, b)| *a - *b).collect()
        }
        LossKind::Linear => target.iter().map(|v| -*v).collect(),
    };
    UserRecord::repeated(z, m)
}

/// Replaces the first `B − (⌈B/3⌉ − 1)` users with users whose step-1
/// gradients sit `5/τ` apart along the first coordinate, beyond every
/// remaining gradient.
pub fn inject_scatter<T: Scalar>(dataset: &Dataset<T>, ctx: &ProbeContext<'_, T>) -> Result<Dataset<T>> {
    let b = ctx.batch_users;
    let grads = step_one_gradients(dataset, ctx)?;
    let good = b.div_ceil(3) - 1;
    let bad = b - good;
    let spacing = T::lit(5.0) / ctx.tau;
    let anchor = grads[bad..].iter().map(|g| g[0]).fold(grads[0][0], T::max);
    let base = grads[bad..].first().cloned().unwrap_or_else(|| grads[0].clone());
    let mut users = dataset.users().to_vec();
    for (k, slot) in users.iter_mut().take(bad).enumerate() {
        let mut target = base.clone();
        target[0] = anchor + spacing * T::from_count(k + 1);
        *slot = user_with_gradient(ctx.model, ctx.x0, &target, dataset.m())?;
    }
    Dataset::new(users)
}

/// Largest step-1 ball counts at radius `1/τ` and `2/τ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScatterCertificate {
    pub max_count_radius_1: usize,
    pub max_count_radius_2: usize,
    pub batch: usize,
}

impl ScatterCertificate {
    pub fn holds(&self) -> bool {
        is_below_third(self.max_count_radius_1, self.batch)
    }
}

pub fn scatter_certificate<T: Scalar>(dataset: &Dataset<T>, ctx: &ProbeContext<'_, T>) -> Result<ScatterCertificate> {
    let grads = step_one_gradients(dataset, ctx)?;
    let r = T::one() / ctx.tau;
    Ok(ScatterCertificate {
        max_count_radius_1: max_ball_count(&grads, r),
        max_count_radius_2: max_ball_count(&grads, r + r),
        batch: ctx.batch_users,
    })
}

/// Builds `(𝒟, 𝒟′)` differing in user `swap_user_index` and certifies the
/// requested alignment. For adversarial scatter both datasets carry the
/// injected bad users.
pub fn neighboring_pair<T: Scalar>(
    dataset: &Dataset<T>,
    spec: &NeighborSpec<T>,
    ctx: &ProbeContext<'_, T>,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if spec.swap_user_index >= dataset.n() {
        return invalid(format!(
            "swap index {} out of range for {} users",
            spec.swap_user_index,
            dataset.n()
        ));
    }
    if spec.replacement.m() != dataset.m() || spec.replacement.dim() != dataset.dim() {
        return invalid("replacement user must match the dataset's m and d");
    }
    let base = match spec.alignment {
        Alignment::AdversarialScatter => inject_scatter(dataset, ctx)?,
        _ => dataset.clone(),
    };
    let other = base.with_user_replaced(spec.swap_user_index, spec.replacement.clone())?;
    match spec.alignment {
        Alignment::Aligned { rho } => {
            let a = step_one_gradients(&base, ctx)?;
            let b = step_one_gradients(&other, ctx)?;
            let count = common_ball_count(&a, &b, rho)?;
            if !is_two_thirds(count, ctx.batch_users) {
                return Err(Error::ConstructionFailure(format!(
                    "best common ball of radius {rho} holds {count} of {} step-1 gradients; 2B/3 required",
                    ctx.batch_users
                )));
            }
        }
        Alignment::AdversarialScatter => {
            for (name, d) in [("D", &base), ("D'", &other)] {
                let cert = scatter_certificate(d, ctx)?;
                if !cert.holds() {
                    return Err(Error::ConstructionFailure(format!(
                        "{name}: {} of {} step-1 gradients share a 1/tau ball; fewer than B/3 required",
                        cert.max_count_radius_1, cert.batch
                    )));
                }
            }
        }
        Alignment::Unconstrained => {}
    }
    Ok((base, other))
}
