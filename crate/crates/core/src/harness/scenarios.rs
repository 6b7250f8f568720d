//! Seeded single-trial constructions shared by `certify` and the tests.

use rand::Rng;

use super::neighbors::{
    inject_scatter, neighboring_pair, scatter_certificate, step_one_gradients, Alignment,
    NeighborSpec, ProbeContext, ScatterCertificate,
};
use super::sensitivity::{measure_iteration_sensitivity, score_swap_gaps, swap_score_bound, SensitivityReport};
use crate::error::Result;
use crate::optimizer::{
    default_params_with, dpsgd_phase, sgd_trajectory, DpSgdConfig, ParamOptions, TrajectoryLog,
};
use crate::privacy::PrivacyBudget;
use crate::problem::{make_quadratic_instance, QuadraticInstance, QuadraticParams, UserRecord};
use crate::robust_stats::{coord_robust_stat, RobustStatKind};
use crate::seed;

/// A quadratic instance size together with the parameter profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSettings {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub budget: PrivacyBudget<f64>,
    pub beta: f64,
    pub params: ParamOptions<f64>,
}

impl ScenarioSettings {
    /// Batch constant 100, `ε = 1`, `δ = 10⁻⁶`; gives `B = 2536` and five
    /// steps over all `n = 12800` users.
    pub fn reference_defaults() -> Self {
        Self {
            n: 12_800,
            m: 4,
            d: 2,
            budget: PrivacyBudget { epsilon: 1.0, delta: 1e-6 },
            beta: 1.0,
            params: ParamOptions::default(),
        }
    }

    /// A small profile for the deterministic stability probes: `B = 30`.
    pub fn desk() -> Self {
        Self {
            n: 600,
            m: 8,
            d: 4,
            budget: PrivacyBudget { epsilon: 1.0, delta: 1e-6 },
            beta: 1.0,
            params: ParamOptions {
                batch_constant: 0.01,
                min_batch: 30,
                ..ParamOptions::default()
            },
        }
    }

    pub fn instance(&self, s: u64) -> Result<QuadraticInstance<f64>> {
        make_quadratic_instance(&QuadraticParams::new(self.d, self.n, self.m, self.beta), s)
    }

    pub fn config(&self, inst: &QuadraticInstance<f64>) -> Result<DpSgdConfig<f64>> {
        let model = &inst.model;
        default_params_with(
            self.n,
            self.m,
            self.d,
            self.budget,
            model.lipschitz_g(),
            model.radius_d(),
            model.smooth_beta(),
            &self.params,
        )
    }
}

/// One phase over i.i.d. users from the domain center.
pub fn iid_phase(settings: &ScenarioSettings, s: u64) -> Result<TrajectoryLog<f64>> {
    let inst = settings.instance(s)?;
    let cfg = settings.config(&inst)?;
    let x0 = inst.model.domain().center().clone();
    let (_, log) = dpsgd_phase(&inst.dataset, &inst.model, &cfg, &x0, &mut seed::child_rng(s, 7))?;
    Ok(log)
}

/// One phase after injecting a bad majority into the step-1 batch.
pub fn scatter_phase(settings: &ScenarioSettings, s: u64) -> Result<(TrajectoryLog<f64>, ScatterCertificate)> {
    let inst = settings.instance(s)?;
    let cfg = settings.config(&inst)?;
    let x0 = inst.model.domain().center().clone();
    let ctx = ProbeContext {
        model: &inst.model,
        x0: x0.coords(),
        batch_users: cfg.batch_users,
        tau: cfg.tau,
    };
    let data = inject_scatter(&inst.dataset, &ctx)?;
    let cert = scatter_certificate(&data, &ctx)?;
    let (_, log) = dpsgd_phase(&data, &inst.model, &cfg, &x0, &mut seed::child_rng(s, 7))?;
    Ok((log, cert))
}

/// A replacement user for slot `slot`: on odd seeds a fresh i.i.d. user, on
/// even seeds one whose step-1 gradient is pushed `10/τ` away from the batch
/// median in every coordinate with random signs.
fn replacement_user(
    inst: &QuadraticInstance<f64>,
    cfg: &DpSgdConfig<f64>,
    x0: &[f64],
    s: u64,
) -> Result<UserRecord<f64>> {
    let mut rng = seed::child_rng(s, 11);
    let m = inst.dataset.m();
    if s % 2 == 1 {
        let samples = (0..m).map(|_| inst.distribution.sample(&mut rng)).collect();
        return UserRecord::new(samples);
    }
    let ctx = ProbeContext {
        model: &inst.model,
        x0,
        batch_users: cfg.batch_users,
        tau: cfg.tau,
    };
    let grads = step_one_gradients(&inst.dataset, &ctx)?;
    let mut target = coord_robust_stat(&grads, RobustStatKind::CoordinateMedian)?;
    for v in &mut target {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        *v += sign * 10.0 / cfg.tau;
    }
    super::neighbors::user_with_gradient(&inst.model, x0, &target, m)
}

/// Coupled noiseless trajectories on a `(1/τ)`-aligned pair whose differing
/// user sits in the step-1 batch.
pub fn aligned_sensitivity(settings: &ScenarioSettings, s: u64) -> Result<SensitivityReport<f64>> {
    let inst = settings.instance(s)?;
    let cfg = settings.config(&inst)?;
    let x0 = inst.model.domain().center().coords().to_vec();
    let replacement = replacement_user(&inst, &cfg, &x0, s)?;
    let slot = seed::child_rng(s, 12).random_range(0..cfg.batch_users);
    let rho = 1.0 / cfg.tau;
    let ctx = ProbeContext {
        model: &inst.model,
        x0: &x0,
        batch_users: cfg.batch_users,
        tau: cfg.tau,
    };
    let spec = NeighborSpec {
        swap_user_index: slot,
        replacement,
        alignment: Alignment::Aligned { rho },
    };
    let (a, b) = neighboring_pair(&inst.dataset, &spec, &ctx)?;
    measure_iteration_sensitivity(&inst.model, (&a, &b), &cfg, &x0, rho)
}

/// Per-step score change from swapping one batch gradient along an i.i.d.
/// trajectory, with the `(2B − 1)/B` bound.
pub fn score_swap_trial(settings: &ScenarioSettings, s: u64) -> Result<(Vec<f64>, f64)> {
    let inst = settings.instance(s)?;
    let cfg = settings.config(&inst)?;
    let x0 = inst.model.domain().center().coords().to_vec();
    let replacement = replacement_user(&inst, &cfg, &x0, s)?;
    let slot = seed::child_rng(s, 12).random_range(0..cfg.batch_users);
    let traj = sgd_trajectory(
        inst.dataset.users(),
        &inst.model,
        cfg.batch_users,
        cfg.eta,
        &cfg.estimator(),
        &x0,
    )?;
    let gaps = score_swap_gaps(&inst.model, &traj, &x0, &replacement, slot, cfg.tau)?;
    Ok((gaps, swap_score_bound(cfg.batch_users)))
}
