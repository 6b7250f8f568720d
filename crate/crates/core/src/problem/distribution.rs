use rand::Rng;
use statrs::function::erf::erfc;

use super::dataset::{Dataset, Provenance, UserRecord};
use super::model::{Domain, LossModel};
use super::Point;
use crate::error::{invalid, Error, Result};
use crate::{seed, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionKind {
    GaussianMean,
    LinearHardInstance,
}

impl DistributionKind {
    fn tag(self) -> &'static str {
        match self {
            DistributionKind::GaussianMean => "gaussian-mean",
            DistributionKind::LinearHardInstance => "linear-hard-instance",
        }
    }
}

/// Product distribution with independent coordinates `N(μ[k], std²)`, each
/// optionally clipped to `[-bound, bound]` via `z / max(1, |z| / bound)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T> {
    kind: DistributionKind,
    mean_mu: Vec<T>,
    per_coordinate_std: T,
    truncation_bound: Option<T>,
}

impl<T: Scalar> Distribution<T> {
    pub fn new(
        kind: DistributionKind,
        mean_mu: Vec<T>,
        per_coordinate_std: T,
        truncation_bound: Option<T>,
    ) -> Result<Self> {
        if mean_mu.is_empty() {
            return invalid("distribution mean must have at least one coordinate");
        }
        if mean_mu.iter().any(|v| !v.is_finite() || v.abs() > T::one()) {
            return invalid("distribution mean must lie in [-1, 1]^d");
        }
        if !(per_coordinate_std >= T::zero()) || !per_coordinate_std.is_finite() {
            return invalid("per-coordinate std must be finite and non-negative");
        }
        if let Some(b) = truncation_bound {
            if !(b > T::zero()) || !b.is_finite() {
                return invalid("truncation bound must be positive and finite");
            }
        }
        Ok(Self {
            kind,
            mean_mu,
            per_coordinate_std,
            truncation_bound,
        })
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn mean_mu(&self) -> &[T] {
        &self.mean_mu
    }

    pub fn dim(&self) -> usize {
        self.mean_mu.len()
    }

    pub fn per_coordinate_std(&self) -> T {
        self.per_coordinate_std
    }

    pub fn truncation_bound(&self) -> Option<T> {
        self.truncation_bound
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        self.mean_mu
            .iter()
            .map(|mu| {
                let z = *mu + self.per_coordinate_std * T::sample_standard_normal(rng);
                match self.truncation_bound {
                    Some(b) => z / T::one().max(z.abs() / b),
                    None => z,
                }
            })
            .collect()
    }

    /// Exact mean of the (possibly clipped) coordinates, `E[z]`.
    pub fn effective_mean(&self) -> Vec<T> {
        let sigma = self.per_coordinate_std.to_f64_lossy();
        self.mean_mu
            .iter()
            .map(|mu| {
                let mu = mu.to_f64_lossy();
                let value = match self.truncation_bound {
                    None => mu,
                    Some(b) => clipped_gaussian_mean(mu, sigma, b.to_f64_lossy()),
                };
                T::lit(value)
            })
            .collect()
    }

    /// `n` users of `m` i.i.d. samples each, drawn user by user.
    pub fn sample_dataset(&self, n: usize, m: usize, seed: u64) -> Result<Dataset<T>> {
        if n == 0 || m == 0 {
            return invalid("sample_dataset needs n >= 1 and m >= 1");
        }
        let mut rng = seed::rng(seed);
        let users = (0..n)
            .map(|_| UserRecord::new((0..m).map(|_| self.sample(&mut rng)).collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset::new(users)?.with_provenance(Provenance {
            seed,
            distribution: self.descriptor(),
        }))
    }

    /// The linear loss `f(x; z) = -<x, z>` on `[-1, 1]^d` with this
    /// distribution as its population.
    pub fn linear_loss_model(&self) -> Result<LossModel<T>> {
        let Some(bound) = self.truncation_bound else {
            return Err(Error::Unsupported(
                "untruncated samples have no Lipschitz bound".into(),
            ));
        };
        let domain = Domain::new(Point::zeros(self.dim()), T::one())?;
        LossModel::linear(domain, bound, self.effective_mean())
    }

    pub fn descriptor(&self) -> String {
        let mu: Vec<String> = self.mean_mu.iter().map(|v| v.to_string()).collect();
        let trunc = match self.truncation_bound {
            Some(b) => b.to_string(),
            None => "none".into(),
        };
        format!(
            "{} std={} trunc={} mu={}",
            self.kind.tag(),
            self.per_coordinate_std,
            trunc,
            mu.join(",")
        )
    }

    pub fn from_descriptor(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidArgument(format!("distribution descriptor: {msg}"));
        let mut parts = text.split_whitespace();
        let kind = match parts.next() {
            Some("gaussian-mean") => DistributionKind::GaussianMean,
            Some("linear-hard-instance") => DistributionKind::LinearHardInstance,
            _ => return Err(bad("unknown kind")),
        };
        let (mut std, mut trunc, mut mu) = (None, None, None);
        for part in parts {
            let (key, value) = part.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let num = |v: &str| v.parse::<T>().map_err(|_| bad("invalid number"));
            match key {
                "std" => std = Some(num(value)?),
                "trunc" if value == "none" => trunc = Some(None),
                "trunc" => trunc = Some(Some(num(value)?)),
                "mu" => mu = Some(value.split(',').map(num).collect::<Result<Vec<T>>>()?),
                _ => return Err(bad("unknown key")),
            }
        }
        Self::new(
            kind,
            mu.ok_or_else(|| bad("missing mu"))?,
            std.ok_or_else(|| bad("missing std"))?,
            trunc.ok_or_else(|| bad("missing trunc"))?,
        )
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E[clip(X, -b, b)]` for `X ~ N(mu, sigma²)`.
pub(crate) fn clipped_gaussian_mean(mu: f64, sigma: f64, b: f64) -> f64 {
    if sigma == 0.0 {
        return mu.clamp(-b, b);
    }
    let lo = (-b - mu) / sigma;
    let hi = (b - mu) / sigma;
    let (cdf_lo, cdf_hi) = (std_normal_cdf(lo), std_normal_cdf(hi));
    -b * cdf_lo
        + b * (1.0 - cdf_hi)
        + mu * (cdf_hi - cdf_lo)
        + sigma * (std_normal_pdf(lo) - std_normal_pdf(hi))
}
