//! Loss models, datasets, the ℓ∞-ball domain, synthetic instance generators
//! and evaluation metrics.

mod dataset;
mod distribution;
mod instances;
mod matrix;
mod model;

pub use dataset::{Dataset, Provenance, UserRecord};
pub use distribution::{Distribution, DistributionKind};
pub use instances::{
    make_linear_hard_instance, make_quadratic_instance, LinearHardInstance, QuadraticInstance,
    QuadraticParams,
};
pub(crate) use instances::random_dominant_hessian;
pub use matrix::DenseMatrix;
pub use model::{weighted_sign_error, Domain, LossKind, LossModel};

use crate::error::{invalid, Result};
use crate::Scalar;

/// A point of the optimization space. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Point<T>(Vec<T>);

impl<T: Scalar> Point<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if let Some(idx) = coords.iter().position(|c| !c.is_finite()) {
            return invalid(format!("point coordinate {idx} is not finite"));
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![T::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[T] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<T> {
        self.0
    }

    pub fn linf_distance(&self, other: &Self) -> T {
        linf_distance(&self.0, &other.0)
    }
}

impl<T> AsRef<[T]> for Point<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

pub fn linf_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

pub fn l2_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

/// ℓ∞ distance; slices must have equal length.
pub fn linf_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc.max((*x - *y).abs()))
}

/// Euclidean projection onto the ℓ∞-ball `B∞(center, radius)`, which is a
/// coordinate-wise clip.
pub fn project_linf<T: Scalar>(x: &Point<T>, center: &Point<T>, radius: T) -> Result<Point<T>> {
    if x.dim() != center.dim() {
        return invalid(format!(
            "dimension mismatch: point has {} coordinates, center has {}",
            x.dim(),
            center.dim()
        ));
    }
    if !(radius >= T::zero()) {
        return invalid("projection radius must be non-negative");
    }
    let mut out = x.0.clone();
    clip_in_place(&mut out, center.coords(), radius);
    Ok(Point(out))
}

pub(crate) fn clip_in_place<T: Scalar>(x: &mut [T], center: &[T], radius: T) {
    for (xi, ci) in x.iter_mut().zip(center) {
        *xi = xi.max(*ci - radius).min(*ci + radius);
    }
}

/// `sign` with the convention `sign(0) = +1`.
pub fn sign_plus<T: Scalar>(v: T) -> T {
    if v < T::zero() {
        -T::one()
    } else {
        T::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> Point<f64> {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn interior_point_unchanged() {
        let out = project_linf(&p(&[0.5, -0.2]), &p(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(out, p(&[0.5, -0.2]));
    }

    #[test]
    fn clips_each_coordinate() {
        let out = project_linf(&p(&[3.0, -3.0]), &p(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(out, p(&[1.0, -1.0]));
        let out = project_linf(&p(&[2.0, 0.5, -1.7]), &p(&[1.0, 0.0, 0.0]), 1.0).unwrap();
        assert_eq!(out, p(&[2.0, 0.5, -1.0]));
    }

    #[test]
    fn projection_rejects_mismatch() {
        let err = project_linf(&p(&[1.0]), &p(&[0.0, 0.0]), 1.0).unwrap_err();
        assert!(matches!(err, crate::Error::InvalidArgument(_)));
    }

    #[test]
    fn point_rejects_nan() {
        assert!(Point::new(vec![0.0, f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn projection_is_idempotent_f32() {
        let x = Point::new(vec![4.0f32, -0.25]).unwrap();
        let c = Point::new(vec![0.0f32, 0.0]).unwrap();
        let once = project_linf(&x, &c, 0.5).unwrap();
        assert_eq!(project_linf(&once, &c, 0.5).unwrap(), once);
    }

    #[test]
    fn sign_of_zero_is_positive() {
        assert_eq!(sign_plus(0.0f64), 1.0);
        assert_eq!(sign_plus(-0.0f64), 1.0);
        assert_eq!(sign_plus(-2.0f64), -1.0);
    }
}
