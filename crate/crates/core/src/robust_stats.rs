//! Coordinate-wise robust statistics and a Weiszfeld geometric median.
//!
//! Both coordinate statistics are 1-Lipschitz under per-point ℓ∞ perturbation
//! and equivariant under `X ↦ aX + b` for every real `a`. The median also
//! stays inside any ℓ∞-ball holding a strict majority of the inputs; the
//! trimmed mean only does so while the points outside the ball fit into its
//! trim budget on each tail.

use std::cmp::Ordering;

use crate::error::{invalid, Error, Result};
use crate::problem::l2_norm;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RobustStatKind<T> {
    #[default]
    CoordinateMedian,
    /// Drops `floor(trim_fraction · B)` values from each tail.
    CoordinateTrimmedMean { trim_fraction: T },
}

impl<T: Scalar> RobustStatKind<T> {
    pub const DEFAULT_TRIM_FRACTION: f64 = 0.25;

    pub fn trimmed_mean(trim_fraction: T) -> Result<Self> {
        let kind = Self::CoordinateTrimmedMean { trim_fraction };
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::CoordinateMedian => Ok(()),
            Self::CoordinateTrimmedMean { trim_fraction } => {
                if trim_fraction >= T::zero() && trim_fraction < T::lit(0.5) {
                    Ok(())
                } else {
                    invalid("trim fraction must lie in [0, 0.5)")
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::CoordinateMedian => "median",
            Self::CoordinateTrimmedMean { .. } => "trimmed-mean",
        }
    }

    /// The statistic of one coordinate's values.
    pub fn apply_1d(&self, values: &[T]) -> Result<T> {
        if values.is_empty() {
            return invalid("robust statistic of an empty set");
        }
        match *self {
            Self::CoordinateMedian => Ok(median_1d(values)),
            Self::CoordinateTrimmedMean { trim_fraction } => trimmed_mean_1d(values, trim_fraction),
        }
    }
}

fn sorted<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut out = values.to_vec();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    out
}

/// Median; for even counts the midpoint of the two middle order statistics.
///
/// Panics on an empty slice.
pub fn median_1d<T: Scalar>(values: &[T]) -> T {
    assert!(!values.is_empty(), "median of an empty set");
    let s = sorted(values);
    let mid = s.len() / 2;
    if s.len() % 2 == 1 {
        s[mid]
    } else {
        (s[mid - 1] + s[mid]) / T::lit(2.0)
    }
}

pub fn trimmed_mean_1d<T: Scalar>(values: &[T], trim_fraction: T) -> Result<T> {
    if values.is_empty() {
        return invalid("trimmed mean of an empty set");
    }
    if !(trim_fraction >= T::zero() && trim_fraction < T::lit(0.5)) {
        return invalid("trim fraction must lie in [0, 0.5)");
    }
    let s = sorted(values);
    let k = (trim_fraction * T::from_count(s.len()))
        .floor()
        .to_usize()
        .unwrap_or(0);
    let kept = &s[k..s.len() - k];
    let sum = kept.iter().fold(T::zero(), |acc, v| acc + *v);
    Ok(sum / T::from_count(kept.len()))
}

/// Applies `kind` independently to every coordinate of `B` equal-length
/// vectors.
pub fn coord_robust_stat<T: Scalar, V: AsRef<[T]>>(
    vectors: &[V],
    kind: RobustStatKind<T>,
) -> Result<Vec<T>> {
    kind.validate()?;
    let Some(first) = vectors.first() else {
        return invalid("robust statistic of an empty collection");
    };
    let d = first.as_ref().len();
    if vectors.iter().any(|v| v.as_ref().len() != d) {
        return invalid("all vectors must share one dimension");
    }
    let mut column = Vec::with_capacity(vectors.len());
    (0..d)
        .map(|j| {
            column.clear();
            column.extend(vectors.iter().map(|v| v.as_ref()[j]));
            kind.apply_1d(&column)
        })
        .collect()
}

/// Output of [`geometric_median_weiszfeld`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricMedian<T> {
    pub point: Vec<T>,
    pub objective: T,
    pub iterations: usize,
}

/// `Σ_p ‖x − p‖₂`.
pub fn geometric_median_objective<T: Scalar, V: AsRef<[T]>>(points: &[V], x: &[T]) -> T {
    points
        .iter()
        .map(|p| {
            let diff: Vec<T> = p.as_ref().iter().zip(x).map(|(a, b)| *a - *b).collect();
            l2_norm(&diff)
        })
        .fold(T::zero(), |acc, v| acc + v)
}

/// Weiszfeld iteration for `argmin_x Σ_p ‖x − p‖₂`.
///
/// Input points are first tested with the vertex optimality condition
/// `‖Σ_{p≠v} (p − v)/‖p − v‖‖ ≤ mult(v)`, which catches minimizers that sit on
/// an input point, where plain Weiszfeld converges only sublinearly. An iterate
/// that lands on an input point is nudged by 1e-9 along a fixed direction.
pub fn geometric_median_weiszfeld<T: Scalar, V: AsRef<[T]>>(
    points: &[V],
    tol: T,
    max_iter: usize,
) -> Result<GeometricMedian<T>> {
    let Some(first) = points.first() else {
        return invalid("geometric median of an empty set");
    };
    if !(tol > T::zero()) {
        return invalid("tolerance must be positive");
    }
    let d = first.as_ref().len();
    if d == 0 || points.iter().any(|p| p.as_ref().len() != d) {
        return invalid("points must share one positive dimension");
    }
    let coincide = T::lit(1e-12);

    for candidate in points {
        let v = candidate.as_ref();
        if vertex_is_optimal(points, v, coincide) {
            return Ok(GeometricMedian {
                point: v.to_vec(),
                objective: geometric_median_objective(points, v),
                iterations: 0,
            });
        }
    }

    let count = T::from_count(points.len());
    let mut y: Vec<T> = (0..d)
        .map(|j| points.iter().fold(T::zero(), |acc, p| acc + p.as_ref()[j]) / count)
        .collect();
    let nudge = T::lit(1e-9) / T::from_count(d).sqrt();
    for iteration in 1..=max_iter {
        let mut num = vec![T::zero(); d];
        let mut den = T::zero();
        let mut landed = false;
        for p in points {
            let diff: Vec<T> = p.as_ref().iter().zip(&y).map(|(a, b)| *a - *b).collect();
            let dist = l2_norm(&diff);
            if dist <= coincide {
                landed = true;
                break;
            }
            let w = T::one() / dist;
            for (acc, v) in num.iter_mut().zip(p.as_ref()) {
                *acc = *acc + w * *v;
            }
            den = den + w;
        }
        if landed {
            for v in &mut y {
                *v = *v + nudge;
            }
            continue;
        }
        let next: Vec<T> = num.iter().map(|v| *v / den).collect();
        let step: Vec<T> = next.iter().zip(&y).map(|(a, b)| *a - *b).collect();
        y = next;
        if l2_norm(&step) < tol {
            return Ok(GeometricMedian {
                objective: geometric_median_objective(points, &y),
                point: y,
                iterations: iteration,
            });
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: max_iter,
        best: y.iter().map(|v| v.to_f64_lossy()).collect(),
    })
}

fn vertex_is_optimal<T: Scalar, V: AsRef<[T]>>(points: &[V], v: &[T], coincide: T) -> bool {
    let d = v.len();
    let mut pull = vec![T::zero(); d];
    let mut multiplicity = T::zero();
    for p in points {
        let diff: Vec<T> = p.as_ref().iter().zip(v).map(|(a, b)| *a - *b).collect();
        let dist = l2_norm(&diff);
        if dist <= coincide {
            multiplicity = multiplicity + T::one();
        } else {
            for (acc, x) in pull.iter_mut().zip(&diff) {
                *acc = *acc + *x / dist;
            }
        }
    }
    l2_norm(&pull) <= multiplicity
}
