//! Empirical certification of the stability, sensitivity and mechanism
//! properties the privacy analysis relies on.

pub mod certify;
pub mod counterexample;
pub mod neighbors;
pub mod scenarios;
pub mod sensitivity;
pub mod utility;

pub use certify::{certify, write_certify_csv, CertifyOptions, CheckResult, CERTIFY_SCHEMA};
pub use counterexample::{counterexample_geometric_median, Counterexample};
pub use neighbors::{
    ball_count, common_ball_count, inject_scatter, max_ball_count, neighboring_pair,
    scatter_certificate, step_one_gradients, Alignment, NeighborSpec, ProbeContext,
    ScatterCertificate,
};
pub use sensitivity::{
    measure_iteration_sensitivity, score_swap_gaps, swap_score_bound, SensitivityReport, BOUND_SLACK,
};
pub use utility::{
    run_single, run_utility_experiment, spearman, summarize, write_summary_csv, write_utility_csv,
    Pipeline, UtilityRecord, UtilitySettings, UtilitySummary, SUMMARY_SCHEMA, UTILITY_HEADER,
    UTILITY_SCHEMA,
};

use crate::problem::linf_distance;
use crate::Scalar;

/// `(1/B) Σ_i Σ_j 1(‖q_i − q_j‖∞ ≤ radius)`: the hard-count score the smoothed
/// score replaces. Comparison only.
pub fn indicator_score<T: Scalar>(gradients: &[Vec<T>], radius: T) -> T {
    let b = gradients.len();
    let hits = gradients
        .iter()
        .map(|a| gradients.iter().filter(|c| linf_distance(a, c) <= radius).count())
        .sum::<usize>();
    T::from_count(hits) / T::from_count(b.max(1))
}
