use rand::Rng;

use super::dataset::Dataset;
use super::distribution::{Distribution, DistributionKind};
use super::matrix::DenseMatrix;
use super::model::{Domain, LossModel};
use super::Point;
use crate::error::{invalid, Result};
use crate::{seed, Scalar};

/// Generator settings for the diagonally dominant quadratic family.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticParams<T> {
    pub d: usize,
    pub n: usize,
    pub m: usize,
    /// Target `‖A‖∞`; the generated Hessian hits it exactly.
    pub beta_target: T,
    pub radius: T,
    pub sample_std: T,
    /// Off-diagonal row mass as a fraction of the diagonal, in `[0, 1]`.
    pub dominance: T,
}

impl<T: Scalar> QuadraticParams<T> {
    pub fn new(d: usize, n: usize, m: usize, beta_target: T) -> Self {
        Self {
            d,
            n,
            m,
            beta_target,
            radius: T::one(),
            sample_std: T::lit(0.5),
            dominance: T::lit(0.8),
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticInstance<T> {
    pub model: LossModel<T>,
    pub dataset: Dataset<T>,
    pub distribution: Distribution<T>,
}

/// Random instance of `f(x; z) = ½ (x − z)ᵀ A (x − z)` on `B∞(0, D)`.
///
/// `A` is symmetric with a positive diagonal; its off-diagonals are rescaled
/// until every row satisfies `Σ_{j≠i} |A_ij| ≤ dominance · A_ii`, then the
/// whole matrix is scaled to `‖A‖∞ = beta_target`. Samples are
/// `z ~ N(μ, std²)` clipped to `[-(D + 3 std), D + 3 std]` with the hidden
/// optimum `μ` uniform on `B∞(0, D/2)`, so `G = β (2D + 3 std)` bounds the
/// gradient over domain and support.
pub fn make_quadratic_instance<T: Scalar>(
    params: &QuadraticParams<T>,
    seed: u64,
) -> Result<QuadraticInstance<T>> {
    let QuadraticParams {
        d,
        n,
        m,
        beta_target,
        radius,
        sample_std,
        dominance,
    } = params.clone();
    if d == 0 || n == 0 || m == 0 {
        return invalid("make_quadratic_instance needs d, n, m >= 1");
    }
    if !(beta_target > T::zero()) || !(dominance >= T::zero() && dominance <= T::one()) {
        return invalid("beta_target must be positive and dominance must lie in [0, 1]");
    }
    let mut rng = seed::rng(seed);
    let hessian = random_dominant_hessian(d, beta_target, dominance, &mut rng)?;

    let half = T::lit(0.5) * radius;
    let mu: Vec<T> = (0..d)
        .map(|_| half * (T::lit(2.0) * T::sample_open01(&mut rng) - T::one()))
        .collect();
    let bound = radius + T::lit(3.0) * sample_std;
    let distribution = Distribution::new(DistributionKind::GaussianMean, mu, sample_std, Some(bound))?;
    let dataset = distribution.sample_dataset(n, m, seed::derive(seed, 1))?;
    let g = beta_target * (radius + bound);
    let domain = Domain::new(Point::zeros(d), radius)?;
    let model = LossModel::quadratic(hessian, domain, g, Some(distribution.effective_mean()))?;
    Ok(QuadraticInstance {
        model,
        dataset,
        distribution,
    })
}

pub(crate) fn random_dominant_hessian<T: Scalar, R: Rng + ?Sized>(
    d: usize,
    beta_target: T,
    dominance: T,
    rng: &mut R,
) -> Result<DenseMatrix<T>> {
    let mut data = vec![T::zero(); d * d];
    for i in 0..d {
        data[i * d + i] = T::lit(0.5) + T::lit(0.5) * T::sample_open01(rng);
        for j in 0..i {
            let v = T::lit(2.0) * T::sample_open01(rng) - T::one();
            data[i * d + j] = v;
            data[j * d + i] = v;
        }
    }
    let mut factor = T::infinity();
    for i in 0..d {
        let off = (0..d)
            .filter(|&j| j != i)
            .fold(T::zero(), |acc, j| acc + data[i * d + j].abs());
        if off > T::zero() {
            factor = factor.min(dominance * data[i * d + i] / off);
        }
    }
    if factor.is_finite() {
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    data[i * d + j] = data[i * d + j] * factor;
                }
            }
        }
    }
    let mut hessian = DenseMatrix::from_row_major(d, data)?;
    let norm = hessian.inf_norm();
    hessian.scale(beta_target / norm);
    Ok(hessian)
}

/// Settings for the linear lower-bound instance `f(x; z) = −<x, z>`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHardInstance<T> {
    pub d: usize,
    pub m: usize,
    /// Number of users the instance is sized for; enters the truncation bound.
    pub n: usize,
    /// `c` in `G = c √(m ln(mnd))`; `None` disables truncation.
    pub truncation_constant: Option<T>,
}

impl<T: Scalar> LinearHardInstance<T> {
    pub fn new(d: usize, m: usize, n: usize) -> Self {
        Self {
            d,
            m,
            n,
            truncation_constant: Some(T::lit(3.0)),
        }
    }

    /// `G = c √(m · max(ln(mnd), 1))`.
    pub fn truncation_bound(&self) -> Option<T> {
        let log_term = T::from_count(self.m * self.n * self.d).ln().max(T::one());
        self.truncation_constant
            .map(|c| c * (T::from_count(self.m) * log_term).sqrt())
    }
}

/// Draws `μ[k] ~ U[-1, 1]` and returns the product law of
/// `N(μ[k], m)` coordinates, clipped to `[-G, G]` when truncation is on.
pub fn make_linear_hard_instance<T: Scalar>(
    spec: &LinearHardInstance<T>,
    seed: u64,
) -> Result<Distribution<T>> {
    if spec.d == 0 || spec.m == 0 || spec.n == 0 {
        return invalid("make_linear_hard_instance needs d, m, n >= 1");
    }
    let mut rng = seed::rng(seed);
    let mu: Vec<T> = (0..spec.d)
        .map(|_| T::lit(2.0) * T::sample_open01(&mut rng) - T::one())
        .collect();
    Distribution::new(
        DistributionKind::LinearHardInstance,
        mu,
        T::from_count(spec.m).sqrt(),
        spec.truncation_bound(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_hessians_are_dominant_with_exact_norm() {
        for seed in 0..200 {
            let params = QuadraticParams::new(1 + (seed as usize % 9), 3, 2, 2.5);
            let inst = make_quadratic_instance::<f64>(&params, seed).unwrap();
            let h = inst.model.hessian().unwrap();
            assert!(h.is_diagonally_dominant());
            assert!(h.is_symmetric());
            assert!((h.inf_norm() - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let params = QuadraticParams::new(4, 10, 3, 1.0);
        let a = make_quadratic_instance::<f64>(&params, 11).unwrap();
        let b = make_quadratic_instance::<f64>(&params, 11).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.model, b.model);
        let c = make_quadratic_instance::<f64>(&params, 12).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn scalar_quadratic_is_minimized_at_fixed_sample() {
        let mut params = QuadraticParams::new(1, 1, 1, 3.0);
        params.sample_std = 0.0;
        let inst = make_quadratic_instance::<f64>(&params, 5).unwrap();
        let z = inst.dataset.users()[0].samples()[0].clone();
        assert_eq!(inst.model.optimum().unwrap().coords(), z.as_slice());
        let at_z = Point::new(z).unwrap();
        assert_eq!(inst.model.excess_risk(&at_z).unwrap(), 0.0);
        assert_eq!(inst.model.hessian().unwrap().get(0, 0), 3.0);
    }

    #[test]
    fn quadratic_gradients_respect_published_g() {
        let params = QuadraticParams::new(5, 20, 4, 1.5);
        let inst = make_quadratic_instance::<f64>(&params, 2).unwrap();
        let g = inst.model.lipschitz_g();
        for corner in [1.0, -1.0] {
            let x = vec![corner; 5];
            for user in inst.dataset.users() {
                for z in user.samples() {
                    let grad = inst.model.gradient(&x, z);
                    assert!(crate::problem::linf_norm(&grad) <= g);
                }
            }
        }
    }

    #[test]
    fn linear_instance_is_truncated_and_flat() {
        let spec = LinearHardInstance::<f64>::new(6, 4, 50);
        let dist = make_linear_hard_instance(&spec, 1).unwrap();
        let model = dist.linear_loss_model().unwrap();
        assert_eq!(model.smooth_beta(), 0.0);
        let g = model.lipschitz_g();
        let data = dist.sample_dataset(50, 4, 2).unwrap();
        assert!(data
            .users()
            .iter()
            .flat_map(|u| u.samples())
            .all(|z| crate::problem::linf_norm(z) <= g));
    }
}
