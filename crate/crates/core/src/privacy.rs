//! Noise primitives: Laplace sampling, the Gaussian mechanism and the
//! AboveThreshold comparator.
//!
//! These samplers use ordinary floating point and are not hardened against
//! floating-point side channels.

use std::fmt;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget<T> {
    pub epsilon: T,
    pub delta: T,
}

impl<T: Scalar> PrivacyBudget<T> {
    pub fn new(epsilon: T, delta: T) -> Result<Self> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return invalid("epsilon must be positive and finite");
        }
        if !(delta >= T::zero() && delta < T::one()) {
            return invalid("delta must lie in [0, 1)");
        }
        Ok(Self { epsilon, delta })
    }

    /// Both parameters scaled by `fraction`.
    pub fn share(&self, fraction: T) -> Result<Self> {
        Self::new(self.epsilon * fraction, self.delta * fraction)
    }

    /// Per-step budget under advanced composition over `steps` mechanisms:
    /// `ε₀ = ε / (2√(2k ln(2/δ)))`, `δ₀ = δ / (2k)`.
    pub fn advanced_composition_step(&self, steps: usize) -> Result<Self> {
        if steps == 0 {
            return invalid("composition over zero steps");
        }
        if !(self.delta > T::zero()) {
            return Err(Error::Unsupported("advanced composition needs delta > 0".into()));
        }
        let k = T::from_count(steps);
        let two = T::lit(2.0);
        let eps0 = self.epsilon / (two * (two * k * (two / self.delta).ln()).sqrt());
        Self::new(eps0, self.delta / (two * k))
    }
}

/// Whether mechanisms draw noise. `InsecureDisabled` exists only so branch
/// logic can be tested deterministically; it provides no privacy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Calibrated,
    InsecureDisabled,
}

/// One draw from `Lap(scale)` by inverting the CDF at a single uniform.
pub fn laplace_sample<T: Scalar, R: Rng + ?Sized>(scale: T, rng: &mut R) -> T {
    assert!(scale > T::zero(), "Laplace scale must be positive");
    let half = T::lit(0.5);
    let u = T::sample_open01(rng) - half;
    let magnitude = -(T::one() - T::lit(2.0) * u.abs()).ln();
    if u < T::zero() {
        -scale * magnitude
    } else {
        scale * magnitude
    }
}

/// `σ = Δ·√(2 ln(1.25/δ))/ε`.
pub fn gaussian_sigma<T: Scalar>(l2_sensitivity: T, budget: &PrivacyBudget<T>) -> Result<T> {
    if !(budget.delta > T::zero()) {
        return Err(Error::Unsupported("the Gaussian mechanism requires delta > 0".into()));
    }
    if !(l2_sensitivity >= T::zero()) {
        return invalid("sensitivity must be non-negative");
    }
    Ok(l2_sensitivity * (T::lit(2.0) * (T::lit(1.25) / budget.delta).ln()).sqrt() / budget.epsilon)
}

/// `v + N(0, σ² I)` with `σ` from [`gaussian_sigma`]. Zero sensitivity returns
/// `v` untouched and consumes no randomness.
pub fn gaussian_mechanism<T: Scalar, R: Rng + ?Sized>(
    v: &[T],
    l2_sensitivity: T,
    budget: &PrivacyBudget<T>,
    rng: &mut R,
) -> Result<Vec<T>> {
    let sigma = gaussian_sigma(l2_sensitivity, budget)?;
    if sigma == T::zero() {
        return Ok(v.to_vec());
    }
    Ok(v.iter().map(|x| *x + sigma * T::sample_standard_normal(rng)).collect())
}

/// `8 ln(2T/γ)/ε`: with probability `1 − γ`, every query at least this far
/// above the threshold is answered ⊤ within `T` queries.
pub fn accuracy_margin<T: Scalar>(queries: usize, gamma: T, epsilon: T) -> T {
    T::lit(8.0) * (T::lit(2.0) * T::from_count(queries) / gamma).ln() / epsilon
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Answer {
    Top,
    Bottom,
}

impl Answer {
    pub fn is_top(self) -> bool {
        self == Answer::Top
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::Top => "top",
            Answer::Bottom => "bottom",
        })
    }
}

/// Sparse-vector comparator over sensitivity-1 queries. Halts at the first ⊥.
#[derive(Debug, Clone)]
pub struct AboveThreshold<T> {
    threshold: T,
    noisy_threshold: T,
    epsilon: T,
    mode: NoiseMode,
    halted: bool,
    queries_answered: usize,
    failure_probability: Option<T>,
}

impl<T: Scalar> AboveThreshold<T> {
    pub fn new<R: Rng + ?Sized>(threshold: T, epsilon: T, rng: &mut R) -> Result<Self> {
        Self::with_mode(threshold, epsilon, NoiseMode::Calibrated, rng)
    }

    pub fn with_mode<R: Rng + ?Sized>(
        threshold: T,
        epsilon: T,
        mode: NoiseMode,
        rng: &mut R,
    ) -> Result<Self> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return invalid("AboveThreshold needs a positive finite epsilon");
        }
        let noisy_threshold = match mode {
            NoiseMode::Calibrated => threshold - laplace_sample(T::lit(2.0) / epsilon, rng),
            NoiseMode::InsecureDisabled => threshold,
        };
        Ok(Self {
            threshold,
            noisy_threshold,
            epsilon,
            mode,
            halted: false,
            queries_answered: 0,
            failure_probability: None,
        })
    }

    /// Records a failure probability for reporting. It does not affect noise:
    /// the comparator is (ε, 0)-DP.
    pub fn with_failure_probability(mut self, beta: T) -> Self {
        self.failure_probability = Some(beta);
        self
    }

    pub fn query<R: Rng + ?Sized>(&mut self, q_value: T, rng: &mut R) -> Result<Answer> {
        if self.halted {
            return Err(Error::StateViolation(format!(
                "AboveThreshold halted after {} queries",
                self.queries_answered
            )));
        }
        let nu = match self.mode {
            NoiseMode::Calibrated => laplace_sample(T::lit(4.0) / self.epsilon, rng),
            NoiseMode::InsecureDisabled => T::zero(),
        };
        self.queries_answered += 1;
        if q_value + nu < self.noisy_threshold {
            self.halted = true;
            Ok(Answer::Bottom)
        } else {
            Ok(Answer::Top)
        }
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }

    pub fn noisy_threshold(&self) -> T {
        self.noisy_threshold
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn queries_answered(&self) -> usize {
        self.queries_answered
    }

    pub fn failure_probability(&self) -> Option<T> {
        self.failure_probability
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn gaussian_closed_form() {
        let b = PrivacyBudget::<f64>::new(1.0, 1e-5).unwrap();
        let sigma = gaussian_sigma(1.0, &b).unwrap();
        assert!((sigma - 4.844_805_262_605_389).abs() < 1e-12);
        let v = vec![1.0, 2.0];
        let mut rng = seed::rng(1);
        assert_eq!(gaussian_mechanism(&v, 0.0, &b, &mut rng).unwrap(), v);
    }

    #[test]
    fn gaussian_needs_delta() {
        let b = PrivacyBudget::new(1.0, 0.0).unwrap();
        assert!(matches!(gaussian_sigma(1.0, &b), Err(Error::Unsupported(_))));
    }

    #[test]
    fn budget_validation() {
        assert!(PrivacyBudget::new(0.0, 0.1).is_err());
        assert!(PrivacyBudget::new(1.0, 1.0).is_err());
        assert!(PrivacyBudget::new(1.0, -0.1).is_err());
    }

    #[test]
    fn debug_threshold_branches() {
        let mut rng = seed::rng(3);
        let mut at = AboveThreshold::with_mode(5.0, 1.0, NoiseMode::InsecureDisabled, &mut rng).unwrap();
        assert_eq!(at.noisy_threshold(), 5.0);
        assert_eq!(at.query(6.0, &mut rng).unwrap(), Answer::Top);
        assert_eq!(at.query(4.0, &mut rng).unwrap(), Answer::Bottom);
        assert!(at.is_halted());
        assert!(matches!(at.query(10.0, &mut rng), Err(Error::StateViolation(_))));
        assert_eq!(at.queries_answered(), 2);
    }

    #[test]
    fn laplace_is_reproducible() {
        let a: Vec<f64> = {
            let mut r = seed::rng(9);
            (0..5).map(|_| laplace_sample(1.0, &mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = seed::rng(9);
            (0..5).map(|_| laplace_sample(1.0, &mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn thresholds_differ_across_seeds() {
        let a = AboveThreshold::new(0.0, 1.0, &mut seed::rng(1)).unwrap();
        let b = AboveThreshold::new(0.0, 1.0, &mut seed::rng(2)).unwrap();
        assert_ne!(a.noisy_threshold(), b.noisy_threshold());
    }

    #[test]
    fn advanced_composition_formula() {
        let b = PrivacyBudget::new(1.0, 1e-6).unwrap();
        let s = b.advanced_composition_step(10).unwrap();
        let expect = 1.0 / (2.0 * (20.0 * (2e6f64).ln()).sqrt());
        assert!((s.epsilon - expect).abs() < 1e-15);
        assert!((s.delta - 5e-8).abs() < 1e-20);
    }
}
