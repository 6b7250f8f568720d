use super::dataset::UserRecord;
use super::matrix::DenseMatrix;
use super::{clip_in_place, sign_plus, Point};
use crate::error::{invalid, Error, Result};
use crate::Scalar;

/// The feasible set: an ℓ∞-ball of radius `D` around `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain<T> {
    center: Point<T>,
    radius: T,
}

impl<T: Scalar> Domain<T> {
    pub fn new(center: Point<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return invalid("domain radius must be positive and finite");
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &Point<T> {
        &self.center
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.center.coords())
                .all(|(v, c)| (*v - *c).abs() <= self.radius)
    }

    pub fn project_in_place(&self, x: &mut [T]) {
        clip_in_place(x, self.center.coords(), self.radius);
    }

    pub fn project(&self, x: &Point<T>) -> Result<Point<T>> {
        super::project_linf(x, &self.center, self.radius)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossKind<T> {
    /// `f(x; z) = ½ (x − z)ᵀ A (x − z)` with one shared symmetric, diagonally
    /// dominant Hessian `A`.
    Quadratic { hessian: DenseMatrix<T> },
    /// `f(x; z) = −<x, z>`.
    Linear,
}

/// A convex loss family with its published constants.
#[derive(Debug, Clone, PartialEq)]
pub struct LossModel<T> {
    kind: LossKind<T>,
    lipschitz_g: T,
    smooth_beta: T,
    domain: Domain<T>,
    population_mean: Option<Vec<T>>,
    optimum: Option<Point<T>>,
}

impl<T: Scalar> LossModel<T> {
    /// `g` bounds `‖∇f(x; z)‖∞` over the domain and the sample support, i.e.
    /// it is the ℓ1-Lipschitz constant. `population_mean` is `E[z]`; when
    /// known it must lie in the domain so the population optimum is `E[z]`.
    pub fn quadratic(
        hessian: DenseMatrix<T>,
        domain: Domain<T>,
        g: T,
        population_mean: Option<Vec<T>>,
    ) -> Result<Self> {
        if hessian.dim() != domain.dim() {
            return invalid("Hessian and domain dimensions differ");
        }
        if !hessian.is_symmetric() {
            return invalid("Hessian must be symmetric");
        }
        if !hessian.is_diagonally_dominant() || (0..hessian.dim()).any(|i| hessian.get(i, i) < T::zero())
        {
            return invalid("Hessian must be diagonally dominant with a non-negative diagonal");
        }
        check_constant(g, "Lipschitz constant")?;
        let optimum = match &population_mean {
            Some(mu) => {
                if !domain.contains(mu) {
                    return invalid("population mean must lie in the domain");
                }
                Some(Point::new(mu.clone())?)
            }
            None => None,
        };
        Ok(Self {
            smooth_beta: hessian.inf_norm(),
            kind: LossKind::Quadratic { hessian },
            lipschitz_g: g,
            domain,
            population_mean,
            optimum,
        })
    }

    pub fn linear(domain: Domain<T>, g: T, population_mean: Vec<T>) -> Result<Self> {
        check_constant(g, "Lipschitz constant")?;
        if population_mean.len() != domain.dim() {
            return invalid("population mean and domain dimensions differ");
        }
        let optimum: Vec<T> = population_mean
            .iter()
            .zip(domain.center().coords())
            .map(|(mu, c)| *c + domain.radius() * sign_plus(*mu))
            .collect();
        Ok(Self {
            kind: LossKind::Linear,
            lipschitz_g: g,
            smooth_beta: T::zero(),
            optimum: Some(Point::new(optimum)?),
            domain,
            population_mean: Some(population_mean),
        })
    }

    pub fn kind(&self) -> &LossKind<T> {
        &self.kind
    }

    pub fn lipschitz_g(&self) -> T {
        self.lipschitz_g
    }

    pub fn smooth_beta(&self) -> T {
        self.smooth_beta
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn radius_d(&self) -> T {
        self.domain.radius()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn optimum(&self) -> Option<&Point<T>> {
        self.optimum.as_ref()
    }

    pub fn population_mean(&self) -> Option<&[T]> {
        self.population_mean.as_deref()
    }

    pub fn hessian(&self) -> Option<&DenseMatrix<T>> {
        match &self.kind {
            LossKind::Quadratic { hessian } => Some(hessian),
            LossKind::Linear => None,
        }
    }

    pub fn loss(&self, x: &[T], z: &[T]) -> T {
        match &self.kind {
            LossKind::Quadratic { hessian } => {
                let diff: Vec<T> = x.iter().zip(z).map(|(a, b)| *a - *b).collect();
                T::lit(0.5) * hessian.quadratic_form(&diff)
            }
            LossKind::Linear => -x.iter().zip(z).fold(T::zero(), |acc, (a, b)| acc + *a * *b),
        }
    }

    /// Per-sample gradient `∇f(x; z)`.
    pub fn gradient(&self, x: &[T], z: &[T]) -> Vec<T> {
        match &self.kind {
            LossKind::Quadratic { hessian } => {
                let diff: Vec<T> = x.iter().zip(z).map(|(a, b)| *a - *b).collect();
                hessian.matvec(&diff)
            }
            LossKind::Linear => z.iter().map(|v| -*v).collect(),
        }
    }

    /// `q(Z) = (1/m) Σ_{z∈Z} ∇f(x; z)`. Both loss families are affine in `z`,
    /// so this evaluates the gradient at the user's sample mean.
    pub fn user_avg_gradient(&self, user: &UserRecord<T>, x: &[T]) -> Result<Vec<T>> {
        if user.dim() != self.dim() || x.len() != self.dim() {
            return invalid("user, point and model dimensions must agree");
        }
        let m = T::from_count(user.m());
        let mut mean = vec![T::zero(); self.dim()];
        for sample in user.samples() {
            for (acc, v) in mean.iter_mut().zip(sample) {
                *acc = *acc + *v;
            }
        }
        for v in &mut mean {
            *v = *v / m;
        }
        Ok(self.gradient(x, &mean))
    }

    /// `F(x) − min_{y∈𝒳} F(y)` in closed form from the known population.
    pub fn excess_risk(&self, x: &Point<T>) -> Result<T> {
        let (Some(mu), Some(opt)) = (&self.population_mean, &self.optimum) else {
            return Err(Error::Unsupported(
                "excess risk needs a known population".into(),
            ));
        };
        if x.dim() != self.dim() {
            return invalid("point dimension does not match the model");
        }
        let risk = match &self.kind {
            LossKind::Quadratic { hessian } => {
                let diff: Vec<T> = x
                    .coords()
                    .iter()
                    .zip(opt.coords())
                    .map(|(a, b)| *a - *b)
                    .collect();
                T::lit(0.5) * hessian.quadratic_form(&diff)
            }
            LossKind::Linear => x
                .coords()
                .iter()
                .zip(opt.coords())
                .zip(mu)
                .fold(T::zero(), |acc, ((xi, oi), mi)| acc + (*oi - *xi) * *mi),
        };
        Ok(risk.max(T::zero()))
    }
}

fn check_constant<T: Scalar>(v: T, name: &str) -> Result<()> {
    if !(v >= T::zero()) || !v.is_finite() {
        return invalid(format!("{name} must be finite and non-negative"));
    }
    Ok(())
}

/// `Σ_i |μ[i]| · 1(sign(μ[i]) ≠ sign(x[i]))` with `sign(0) = +1`.
pub fn weighted_sign_error<T: Scalar>(mu: &[T], x: &Point<T>) -> Result<T> {
    if mu.len() != x.dim() {
        return invalid("mean and point dimensions differ");
    }
    Ok(mu
        .iter()
        .zip(x.coords())
        .filter(|(m, v)| sign_plus(**m) != sign_plus(**v))
        .fold(T::zero(), |acc, (m, _)| acc + m.abs()))
}
