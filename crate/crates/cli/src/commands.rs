//! Subcommand bodies. Every command renders its whole table into memory and
//! writes it once, so output files have a single writer.

use std::fs;
use std::io::Write;
use std::path::Path;

use log::{info, warn};
use serde::Serialize;

use robust_dpsco::harness::scenarios::{aligned_sensitivity, ScenarioSettings};
use robust_dpsco::harness::{
    certify, counterexample_geometric_median, run_utility_experiment, spearman, summarize,
    write_certify_csv, write_summary_csv, write_utility_csv, CertifyOptions, Pipeline,
    UtilityRecord, UtilitySettings, UtilitySummary, CERTIFY_SCHEMA, SUMMARY_SCHEMA,
    UTILITY_SCHEMA,
};
use robust_dpsco::optimizer::{
    default_batch, default_params_with, localize, phase_plan, schedule_base,
    write_trajectory_csv, DpSgdConfig, ParamOptions, TrajectoryRow, TRAJECTORY_SCHEMA,
};
use robust_dpsco::privacy::{gaussian_sigma, PrivacyBudget};
use robust_dpsco::problem::{
    make_linear_hard_instance, make_quadratic_instance, weighted_sign_error, Dataset,
    LinearHardInstance, LossModel, QuadraticParams,
};
use robust_dpsco::{seed, table, Error};

use crate::config::{Command, Format, InstanceKind, RunConfig};
use crate::error::CliError;

pub const SENSITIVITY_SCHEMA: &str = "rdpsco-sensitivity v1";
pub const COUNTEREXAMPLE_SCHEMA: &str = "rdpsco-counterexample v1";

/// Runs the configured subcommand and writes its output.
pub fn execute(cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.command {
        Command::Run => run(cfg),
        Command::Sensitivity => sensitivity(cfg),
        Command::Sweep => sweep(cfg),
        Command::Counterexample => counterexample(cfg),
        Command::Certify => run_certify(cfg),
    }
}

fn core(module: &str) -> impl Fn(Error) -> CliError + '_ {
    move |e| CliError::from_core(module, e)
}

fn budget(cfg: &RunConfig) -> Result<PrivacyBudget<f64>, CliError> {
    PrivacyBudget::new(cfg.epsilon, cfg.delta).map_err(core("privacy"))
}

fn param_options(cfg: &RunConfig) -> Result<ParamOptions<f64>, CliError> {
    Ok(ParamOptions {
        batch_constant: cfg.batch_constant,
        noise_constant: cfg.noise_constant,
        kind: cfg.statistic_kind()?,
        min_batch: cfg.min_batch,
    })
}

const OVERRIDE_KEYS: [&str; 5] = ["eta", "tau", "varsigma", "upsilon", "batch"];

fn reject_overrides(cfg: &RunConfig) -> Result<(), CliError> {
    let given = [
        cfg.eta.is_some(),
        cfg.tau.is_some(),
        cfg.varsigma.is_some(),
        cfg.upsilon.is_some(),
        cfg.batch.is_some(),
    ];
    if let Some(i) = given.iter().position(|g| *g) {
        return Err(CliError::Usage(format!(
            "key '{}' only applies to the run subcommand",
            OVERRIDE_KEYS[i]
        )));
    }
    if cfg.instance == InstanceKind::Linear {
        return Err(CliError::Usage(format!(
            "instance = linear only applies to the run subcommand, not {}",
            cfg.command.name()
        )));
    }
    Ok(())
}

/// Serialized output: CSV with a schema line, or a JSON object.
fn render<S: Serialize>(
    cfg: &RunConfig,
    schema: &str,
    csv: impl FnOnce(&mut Vec<u8>) -> robust_dpsco::Result<()>,
    rows: &[S],
) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    match cfg.format {
        Format::Csv => csv(&mut buf).map_err(core("table"))?,
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a, S> {
                schema: &'a str,
                rows: &'a [S],
            }
            serde_json::to_writer_pretty(&mut buf, &Doc { schema, rows })
                .map_err(|e| CliError::Runtime(format!("json: {e}")))?;
            buf.push(b'\n');
        }
    }
    Ok(buf)
}

/// Appends a marker row so a partial table is recognizable.
fn mark_failed(cfg: &RunConfig, buf: &mut Vec<u8>, message: &str) {
    if cfg.format == Format::Csv {
        let _ = writeln!(buf, "# FAILED: {}", message.replace('\n', " "));
    }
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

struct Problem {
    model: LossModel<f64>,
    dataset: Dataset<f64>,
    mean: Option<Vec<f64>>,
}

fn build_problem(cfg: &RunConfig) -> Result<Problem, CliError> {
    match cfg.instance {
        InstanceKind::Quadratic => {
            let mut p = QuadraticParams::new(cfg.d, cfg.n, cfg.m, cfg.beta);
            p.sample_std = cfg.sample_std;
            let inst = make_quadratic_instance(&p, cfg.seed).map_err(core("problem"))?;
            Ok(Problem { model: inst.model, dataset: inst.dataset, mean: None })
        }
        InstanceKind::Linear => {
            let mut spec = LinearHardInstance::new(cfg.d, cfg.m, cfg.n);
            spec.truncation_constant = (cfg.truncation_constant > 0.0).then_some(cfg.truncation_constant);
            let dist = make_linear_hard_instance(&spec, cfg.seed).map_err(core("problem"))?;
            let model = dist.linear_loss_model().map_err(core("problem"))?;
            let dataset = dist
                .sample_dataset(cfg.n, cfg.m, seed::derive(cfg.seed, 1))
                .map_err(core("problem"))?;
            Ok(Problem { model, dataset, mean: Some(dist.mean_mu().to_vec()) })
        }
    }
}

/// Derived parameters with the overrides applied.
fn derive_config(
    cfg: &RunConfig,
    model: &LossModel<f64>,
) -> Result<DpSgdConfig<f64>, CliError> {
    let mut opts = param_options(cfg)?;
    if let Some(b) = cfg.batch {
        if b == 0 {
            return Err(CliError::Usage("invalid value for key 'batch': must be positive".into()));
        }
        opts.batch_constant = 0.0;
        opts.min_batch = b;
    }
    let mut dp = default_params_with(
        cfg.n,
        cfg.m,
        cfg.d,
        budget(cfg)?,
        model.lipschitz_g(),
        model.radius_d(),
        model.smooth_beta(),
        &opts,
    )
    .map_err(core("optimizer"))?;
    if let Some(tau) = cfg.tau {
        dp.tau = tau;
        dp.varsigma = 1.0 / tau;
    }
    if let Some(v) = cfg.varsigma {
        dp.varsigma = v;
    }
    if let Some(v) = cfg.upsilon {
        dp.upsilon = v;
    }
    if let Some(e) = cfg.eta {
        dp.eta = e;
    }
    dp.validate(model).map_err(core("optimizer"))?;
    echo_params(cfg, model, &dp)?;
    Ok(dp)
}

fn tag(overridden: bool) -> &'static str {
    if overridden {
        " [override]"
    } else {
        ""
    }
}

/// Logs every derived parameter with the formula it came from.
fn echo_params(cfg: &RunConfig, model: &LossModel<f64>, dp: &DpSgdConfig<f64>) -> Result<(), CliError> {
    let (n, m, d) = (cfg.n, cfg.m, cfg.d);
    info!(
        "B = {} = max(ceil(c_B ln(nmd/delta)/epsilon), min_batch) with c_B = {}, n = {n}, m = {m}, d = {d}{}",
        dp.batch_users,
        cfg.batch_constant,
        tag(cfg.batch.is_some())
    );
    info!(
        "tau = {} = sqrt(m)/(G max(ln(nmd), 1)) with G = {}{}",
        dp.tau,
        model.lipschitz_g(),
        tag(cfg.tau.is_some())
    );
    info!("varsigma = {} = 1/tau{}", dp.varsigma, tag(cfg.varsigma.is_some()));
    info!(
        "upsilon = {} = 0.9 B + 2 ln(T/delta)/epsilon with T = floor(n/2/B) = {}{}",
        dp.upsilon,
        n / 2 / dp.batch_users,
        tag(cfg.upsilon.is_some())
    );
    info!(
        "eta = {} = (D/G) min(B sqrt(m/n), sqrt(m) epsilon/sqrt(d ln(1/delta) ln(nmd))) capped at 2/beta and 1/(6 beta B){}",
        dp.eta,
        tag(cfg.eta.is_some())
    );
    let plan = phase_plan(n, dp.batch_users).map_err(core("optimizer"))?;
    let base: f64 = schedule_base(m);
    let out_budget = dp.output_budget().map_err(core("privacy"))?;
    let mut eta = dp.eta;
    for (s, range) in plan.iter().enumerate() {
        eta /= base;
        let sens = dp.noise_constant * eta * (d as f64).sqrt() / dp.tau;
        let sigma = gaussian_sigma(sens, &out_budget).map_err(core("privacy"))?;
        info!(
            "phase {}: {} users, eta_s = eta/max(ln m, 2)^s = {eta}, sigma_s = c_noise eta_s sqrt(d)/tau sqrt(2 ln(1.25/delta'))/epsilon' = {sigma} at (epsilon', delta') = ({}, {})",
            s + 1,
            range.len(),
            out_budget.epsilon,
            out_budget.delta
        );
    }
    Ok(())
}

fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let problem = build_problem(cfg)?;
    let dp = derive_config(cfg, &problem.model)?;
    if let Some(path) = &cfg.dataset_out {
        let mut buf = Vec::new();
        problem.dataset.write_text(&mut buf).map_err(core("problem"))?;
        emit(Some(path), &buf)?;
        info!("dataset written to {}", path.display());
    }
    let x0 = problem.model.domain().center().clone();
    let mut rng = seed::child_rng(cfg.seed, 2);
    let result = localize(&problem.dataset, &problem.model, &dp, &x0, &mut rng);
    let run = match result {
        Ok(run) => run,
        Err(e) => {
            let mut buf = Vec::new();
            let _ = write_trajectory_csv(&mut buf, &[] as &[TrajectoryRow]);
            let err = CliError::from_core("optimizer", e);
            mark_failed(cfg, &mut buf, &err.to_string());
            emit(cfg.output.as_deref(), &buf)?;
            return Err(err);
        }
    };
    let rows = run.rows();
    let bytes = render(cfg, TRAJECTORY_SCHEMA, |b| write_trajectory_csv(b, &rows), &rows)?;
    emit(cfg.output.as_deref(), &bytes)?;
    let risk = problem.model.excess_risk(&run.point).map_err(core("problem"))?;
    info!(
        "final excess risk {risk}; concentration test {} in all {} phases",
        if run.all_passed() { "passed" } else { "did not pass" },
        run.phases.len()
    );
    if let Some(mu) = &problem.mean {
        let err = weighted_sign_error(mu, &run.point).map_err(core("problem"))?;
        info!("weighted sign estimation error {err}");
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SensitivityRow {
    seed: u64,
    step: usize,
    linf_gap: f64,
    base_gap_bound: f64,
    score_gap: Option<f64>,
    violated: bool,
}

fn sensitivity(cfg: &RunConfig) -> Result<(), CliError> {
    reject_overrides(cfg)?;
    let settings = ScenarioSettings {
        n: cfg.n,
        m: cfg.m,
        d: cfg.d,
        budget: budget(cfg)?,
        beta: cfg.beta,
        params: param_options(cfg)?,
    };
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    let mut failure = None;
    for i in 0..cfg.seeds as u64 {
        let s = seed::derive(cfg.seed, i);
        match aligned_sensitivity(&settings, s) {
            Ok(report) => {
                for (t, gap) in report.per_step_linf_gap.iter().enumerate() {
                    rows.push(SensitivityRow {
                        seed: s,
                        step: t + 1,
                        linf_gap: *gap,
                        base_gap_bound: report.base_gap_bound,
                        score_gap: report.score_gaps.get(t).copied(),
                        violated: report.violated,
                    });
                }
                violations.extend(report.violations.iter().map(|v| format!("seed {s}: {v}")));
            }
            Err(e) => {
                failure = Some(CliError::from_core("harness", e));
                break;
            }
        }
    }
    let mut bytes = render(
        cfg,
        SENSITIVITY_SCHEMA,
        |b| table::write_csv(b, SENSITIVITY_SCHEMA, &rows),
        &rows,
    )?;
    if let Some(err) = failure {
        mark_failed(cfg, &mut bytes, &err.to_string());
        emit(cfg.output.as_deref(), &bytes)?;
        return Err(err);
    }
    emit(cfg.output.as_deref(), &bytes)?;
    if violations.is_empty() {
        info!("no sensitivity bound violated over {} seeds", cfg.seeds);
        Ok(())
    } else {
        Err(CliError::Invariant(violations.join("; ")))
    }
}

fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    reject_overrides(cfg)?;
    if cfg.grid.is_empty() {
        return Err(CliError::Usage("key 'grid' is empty".into()));
    }
    let budget = budget(cfg)?;
    let opts = param_options(cfg)?;
    for &(n, m) in &cfg.grid {
        if n == 0 || m == 0 {
            return Err(CliError::Usage(format!("grid point {n}:{m} must be positive")));
        }
        let b = default_batch(n, m, cfg.d, &budget, opts.batch_constant, opts.min_batch)
            .map_err(core("optimizer"))?;
        if n < 2 * b {
            return Err(CliError::Infeasible(format!(
                "optimizer: grid point n = {n}, m = {m} has B = {b} and needs n >= {}",
                2 * b
            )));
        }
    }
    let settings = UtilitySettings {
        d: cfg.d,
        budget,
        beta: cfg.beta,
        sample_std: cfg.sample_std,
        params: opts,
    };
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|i| cfg.seed + i).collect();
    let mut records: Vec<UtilityRecord> = Vec::new();
    for &p in &cfg.pipelines {
        records.extend(
            run_utility_experiment(&cfg.grid, &settings, &seeds, p).map_err(core("harness"))?,
        );
    }
    let summary = summarize(&records);
    log_trends(cfg, &summary);
    let mut bytes = render(cfg, UTILITY_SCHEMA, |b| write_utility_csv(b, &records), &records)?;
    let failed: Vec<&UtilityRecord> = records.iter().filter(|r| r.error.is_some()).collect();
    if let Some(first) = failed.first() {
        let msg = format!(
            "{} of {} runs failed; first at n = {}, m = {}, seed = {}: {}",
            failed.len(),
            records.len(),
            first.n,
            first.m,
            first.seed,
            first.error.as_deref().unwrap_or_default()
        );
        mark_failed(cfg, &mut bytes, &msg);
        emit(cfg.output.as_deref(), &bytes)?;
        return Err(CliError::Runtime(format!("harness: {msg}")));
    }
    emit(cfg.output.as_deref(), &bytes)?;
    if let Some(plot) = &cfg.plot {
        write_plot(cfg, plot, &summary)?;
    }
    Ok(())
}

fn log_trends(cfg: &RunConfig, summary: &[UtilitySummary]) {
    for &p in &cfg.pipelines {
        let (x, y): (Vec<f64>, Vec<f64>) = summary
            .iter()
            .filter(|s| s.pipeline == p)
            .filter_map(|s| s.mean_excess_risk.map(|r| ((s.n * s.m) as f64, r)))
            .unzip();
        match spearman(&x, &y) {
            Some(rho) => info!("{p}: Spearman correlation of mean excess risk with nm = {rho:.3}"),
            None => warn!("{p}: too few grid points for a rank correlation"),
        }
    }
}

/// Writes the summary table next to `plot` and a gnuplot script reading it.
fn write_plot(cfg: &RunConfig, plot: &Path, summary: &[UtilitySummary]) -> Result<(), CliError> {
    let data = plot.with_extension("csv");
    let mut buf = Vec::new();
    write_summary_csv(&mut buf, summary).map_err(core("table"))?;
    emit(Some(&data), &buf)?;
    let name = data
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut gp = String::new();
    gp.push_str(&format!("# {SUMMARY_SCHEMA} plot; data in {name}\n"));
    gp.push_str("set datafile separator ','\nset datafile commentschars '#'\n");
    gp.push_str("set logscale xy\nset xlabel 'n m'\nset ylabel 'mean excess risk'\nset key top right\n");
    gp.push_str(&format!("set title 'd = {}, epsilon = {}, delta = {}'\n", cfg.d, cfg.epsilon, cfg.delta));
    let plots: Vec<String> = cfg
        .pipelines
        .iter()
        .map(|p: &Pipeline| {
            format!(
                "'{name}' using ($1*$2):(strcol(3) eq '{p}' ? $6 : NaN):7 with yerrorlines title '{p}'"
            )
        })
        .collect();
    gp.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    emit(Some(plot), gp.as_bytes())?;
    info!("plot script {} reads {}", plot.display(), data.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct CounterexampleRow {
    statistic: &'static str,
    alpha: f64,
    median_p_x: f64,
    median_p_y: f64,
    median_p_prime_x: f64,
    median_p_prime_y: f64,
    norm: &'static str,
    shift: f64,
}

fn counterexample(cfg: &RunConfig) -> Result<(), CliError> {
    let c = counterexample_geometric_median(cfg.alpha).map_err(core("harness"))?;
    let rows = [
        CounterexampleRow {
            statistic: "geometric-median",
            alpha: c.alpha,
            median_p_x: c.geometric_p[0],
            median_p_y: c.geometric_p[1],
            median_p_prime_x: c.geometric_p_prime[0],
            median_p_prime_y: c.geometric_p_prime[1],
            norm: "l2",
            shift: c.geometric_shift,
        },
        CounterexampleRow {
            statistic: "coordinate-median",
            alpha: c.alpha,
            median_p_x: c.coordinate_p[0],
            median_p_y: c.coordinate_p[1],
            median_p_prime_x: c.coordinate_p_prime[0],
            median_p_prime_y: c.coordinate_p_prime[1],
            norm: "linf",
            shift: c.coordinate_shift,
        },
    ];
    let bytes = render(
        cfg,
        COUNTEREXAMPLE_SCHEMA,
        |b| table::write_csv(b, COUNTEREXAMPLE_SCHEMA, &rows),
        &rows,
    )?;
    emit(cfg.output.as_deref(), &bytes)?;
    info!(
        "alpha = {}: geometric median moves {:.6} in l2, coordinate-wise median moves {:.6} in linf",
        c.alpha, c.geometric_shift, c.coordinate_shift
    );
    Ok(())
}

fn run_certify(cfg: &RunConfig) -> Result<(), CliError> {
    let opts = CertifyOptions {
        seed: cfg.seed,
        trials: cfg.trials,
        scenario_seeds: cfg.scenario_seeds,
    };
    let rows = certify(&opts).map_err(core("harness"))?;
    let bytes = render(cfg, CERTIFY_SCHEMA, |b| write_certify_csv(b, &rows), &rows)?;
    emit(cfg.output.as_deref(), &bytes)?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        info!("all {} checks passed", rows.len());
        Ok(())
    } else {
        Err(CliError::Invariant(format!("failed checks: {}", failed.join(", "))))
    }
}
