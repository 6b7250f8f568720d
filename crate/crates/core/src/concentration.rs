//! Smoothed concentration score and the per-step concentration test.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::privacy::{AboveThreshold, Answer, NoiseMode};
use crate::problem::linf_distance;
use crate::Scalar;

/// `s = (1/B) Σ_i Σ_j exp(−τ‖q_i − q_j‖∞)` over ordered pairs, self-pairs
/// included, so `1 ≤ s ≤ B`.
pub fn concentration_score<T: Scalar, V: AsRef<[T]>>(gradients: &[V], tau: T) -> Result<T> {
    if gradients.is_empty() {
        return invalid("concentration score of an empty batch");
    }
    if !(tau > T::zero()) {
        return invalid("tau must be positive");
    }
    let d = gradients[0].as_ref().len();
    if gradients.iter().any(|g| g.as_ref().len() != d) {
        return invalid("all gradients must share one dimension");
    }
    let b = gradients.len();
    // Each unordered pair counted twice; the B self-pairs contribute 1 each.
    let mut off = T::zero();
    for i in 0..b {
        for j in (i + 1)..b {
            off = off + (-tau * linf_distance(gradients[i].as_ref(), gradients[j].as_ref())).exp();
        }
    }
    let count = T::from_count(b);
    Ok((count + T::lit(2.0) * off) / count)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationConfig<T> {
    pub tau: T,
    pub upsilon: T,
    /// Budget handed to AboveThreshold.
    pub epsilon_share: T,
    /// Kept for reporting; AboveThreshold ignores it.
    pub failure_probability: Option<T>,
    pub mode: NoiseMode,
}

impl<T: Scalar> ConcentrationConfig<T> {
    pub fn new(tau: T, upsilon: T, epsilon_share: T) -> Result<Self> {
        if !(tau > T::zero()) {
            return invalid("tau must be positive");
        }
        if !(epsilon_share > T::zero()) {
            return invalid("epsilon share must be positive");
        }
        Ok(Self {
            tau,
            upsilon,
            epsilon_share,
            failure_probability: None,
            mode: NoiseMode::Calibrated,
        })
    }

    pub fn with_mode(mut self, mode: NoiseMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Outcome of [`run_concentration_test`].
#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome<T> {
    pub scores: Vec<T>,
    /// Truncated at the first ⊥.
    pub answers: Vec<Answer>,
}

impl<T> TestOutcome<T> {
    pub fn passed(&self) -> bool {
        self.answers.len() == self.scores.len() && self.answers.iter().all(|a| a.is_top())
    }
}

/// Scores every step's batch, then streams `s_t/2` against threshold `υ/2`
/// through one AboveThreshold instance. The halving turns the score's
/// one-user sensitivity of at most 2 into a sensitivity-1 query.
pub fn run_concentration_test<T: Scalar, V: AsRef<[T]>, R: Rng + ?Sized>(
    per_step_gradients: &[Vec<V>],
    cfg: &ConcentrationConfig<T>,
    rng: &mut R,
) -> Result<TestOutcome<T>> {
    let Some(first) = per_step_gradients.first() else {
        return invalid("concentration test over an empty stream");
    };
    let b = first.len();
    if per_step_gradients.iter().any(|step| step.len() != b) {
        return invalid("every step must hold the same number of gradients");
    }
    let scores = per_step_gradients
        .iter()
        .map(|step| concentration_score(step, cfg.tau))
        .collect::<Result<Vec<_>>>()?;
    let answers = answer_scores(&scores, cfg, rng)?;
    Ok(TestOutcome { scores, answers })
}

/// The AboveThreshold stage alone, on precomputed scores.
pub fn answer_scores<T: Scalar, R: Rng + ?Sized>(
    scores: &[T],
    cfg: &ConcentrationConfig<T>,
    rng: &mut R,
) -> Result<Vec<Answer>> {
    let half = T::lit(0.5);
    let mut at = AboveThreshold::with_mode(cfg.upsilon * half, cfg.epsilon_share, cfg.mode, rng)?;
    if let Some(beta) = cfg.failure_probability {
        at = at.with_failure_probability(beta);
    }
    let mut answers = Vec::with_capacity(scores.len());
    for s in scores {
        let a = at.query(*s * half, rng)?;
        answers.push(a);
        if !a.is_top() {
            break;
        }
    }
    Ok(answers)
}
