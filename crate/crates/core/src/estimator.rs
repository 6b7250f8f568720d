//! Debiased robust gradient estimation.
//!
//! Per coordinate the estimate is the plain mean when it sits within `ς` of
//! the robust statistic, and the mean clamped to `[rs − ς, rs + ς]` otherwise.

use crate::error::{invalid, Result};
use crate::robust_stats::{coord_robust_stat, RobustStatKind};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig<T> {
    pub threshold_varsigma: T,
    pub kind: RobustStatKind<T>,
}

impl<T: Scalar> EstimatorConfig<T> {
    pub fn new(threshold_varsigma: T, kind: RobustStatKind<T>) -> Result<Self> {
        if !(threshold_varsigma >= T::zero()) {
            return invalid("threshold ς must be non-negative");
        }
        kind.validate()?;
        Ok(Self { threshold_varsigma, kind })
    }
}

/// `clamp(value, center − radius, center + radius)`.
pub fn project_to_interval<T: Scalar>(value: T, center: T, radius: T) -> T {
    debug_assert!(radius >= T::zero());
    value.max(center - radius).min(center + radius)
}

/// Coordinate-wise arithmetic mean, summed in input order.
pub fn coordinate_mean<T: Scalar, V: AsRef<[T]>>(vectors: &[V]) -> Result<Vec<T>> {
    let Some(first) = vectors.first() else {
        return invalid("mean of an empty collection");
    };
    let d = first.as_ref().len();
    let mut sum = vec![T::zero(); d];
    for v in vectors {
        let v = v.as_ref();
        if v.len() != d {
            return invalid("all vectors must share one dimension");
        }
        for (acc, x) in sum.iter_mut().zip(v) {
            *acc = *acc + *x;
        }
    }
    let count = T::from_count(vectors.len());
    Ok(sum.into_iter().map(|s| s / count).collect())
}

pub fn robust_gradient_estimate<T: Scalar, V: AsRef<[T]>>(
    vectors: &[V],
    cfg: &EstimatorConfig<T>,
) -> Result<Vec<T>> {
    let mean = coordinate_mean(vectors)?;
    let rs = coord_robust_stat(vectors, cfg.kind)?;
    let radius = cfg.threshold_varsigma;
    Ok(mean
        .into_iter()
        .zip(rs)
        .map(|(mean, rs)| {
            if (rs - mean).abs() >= radius {
                project_to_interval(mean, rs, radius)
            } else {
                mean
            }
        })
        .collect())
}
