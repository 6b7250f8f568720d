//! Linear-time user-level differentially private stochastic convex optimization.
//!
//! The optimizer runs projected SGD where each step aggregates per-user average
//! gradients through a debiased coordinate-wise robust statistic, certifies the
//! whole trajectory with a smoothed concentration test fed to AboveThreshold,
//! and privatizes only the average iterate of each localization phase.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below name the double precision instantiations used by the
//! verification harness and the CLI.

// `!(x > 0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod concentration;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod optimizer;
pub mod privacy;
pub mod problem;
pub mod robust_stats;
pub mod scalar;
pub mod seed;
pub mod table;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point64 = problem::Point<f64>;
pub type Point32 = problem::Point<f32>;
pub type Dataset64 = problem::Dataset<f64>;
pub type Dataset32 = problem::Dataset<f32>;
pub type UserRecord64 = problem::UserRecord<f64>;
pub type LossModel64 = problem::LossModel<f64>;
pub type LossModel32 = problem::LossModel<f32>;
pub type Distribution64 = problem::Distribution<f64>;
pub type DpSgdConfig64 = optimizer::DpSgdConfig<f64>;
pub type DpSgdConfig32 = optimizer::DpSgdConfig<f32>;
pub type PrivacyBudget64 = privacy::PrivacyBudget<f64>;
pub type TrajectoryLog64 = optimizer::TrajectoryLog<f64>;
