//! Geometric-median instability next to the coordinate-wise median.

use crate::error::{invalid, Result};
use crate::problem::{l2_norm, linf_distance};
use crate::robust_stats::{coord_robust_stat, geometric_median_weiszfeld, RobustStatKind};

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub alpha: f64,
    pub geometric_p: Vec<f64>,
    pub geometric_p_prime: Vec<f64>,
    /// `ℓ2` distance between the two geometric medians.
    pub geometric_shift: f64,
    pub coordinate_p: Vec<f64>,
    pub coordinate_p_prime: Vec<f64>,
    /// `ℓ∞` distance between the two coordinate-wise medians.
    pub coordinate_shift: f64,
}

/// `P = {(0,0),(0,0),(1,0),(1,α)}` and `P′ = {(0,0),(0,α),(1,0),(1,0)}`.
pub fn counterexample_sets(alpha: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    (
        vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, alpha]],
        vec![vec![0.0, 0.0], vec![0.0, alpha], vec![1.0, 0.0], vec![1.0, 0.0]],
    )
}

pub fn counterexample_geometric_median(alpha: f64) -> Result<Counterexample> {
    if !(alpha > 0.0 && alpha <= 0.1) {
        return invalid("alpha must lie in (0, 0.1]");
    }
    let (p, q) = counterexample_sets(alpha);
    let gp = geometric_median_weiszfeld(&p, 1e-12, 100_000)?.point;
    let gq = geometric_median_weiszfeld(&q, 1e-12, 100_000)?.point;
    let diff: Vec<f64> = gp.iter().zip(&gq).map(|(a, b)| a - b).collect();
    let cp = coord_robust_stat(&p, RobustStatKind::CoordinateMedian)?;
    let cq = coord_robust_stat(&q, RobustStatKind::CoordinateMedian)?;
    Ok(Counterexample {
        alpha,
        geometric_shift: l2_norm(&diff),
        coordinate_shift: linf_distance(&cp, &cq),
        geometric_p: gp,
        geometric_p_prime: gq,
        coordinate_p: cp,
        coordinate_p_prime: cq,
    })
}
