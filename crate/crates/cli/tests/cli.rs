use std::fs;
use std::process::{Command, Output};

fn rdpsco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdpsco"))
        .args(args)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn empty_config_runs_with_defaults_and_echoes_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.cfg");
    fs::write(&cfg, "# nothing set\n\n").unwrap();
    let o = rdpsco(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let err = stderr(&o);
    for needle in ["B = 2536", "tau = ", "varsigma = ", "upsilon = ", "eta = ", "sigma_s = "] {
        assert!(err.contains(needle), "missing {needle} in log:\n{err}");
    }
    let out = stdout(&o);
    assert!(out.starts_with("# rdpsco-trajectory v1\nphase,step,score,answer,linf_gap,excess_risk\n"));
}

fn logged_value(log: &str, prefix: &str) -> f64 {
    let line = log.lines().find(|l| l.contains(prefix)).expect("line present");
    let rest = &line[line.find(prefix).unwrap() + prefix.len()..];
    rest.split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn epsilon_flag_propagates_into_derived_parameters() {
    let a = stderr(&rdpsco(&["run", "--epsilon", "1", "--set", "n=40000"]));
    let b = stderr(&rdpsco(&["run", "--epsilon", "2", "--set", "n=40000"]));
    let (n, m, d, delta) = (40000.0f64, 4.0f64, 2.0f64, 1e-6f64);
    for (log, eps) in [(&a, 1.0), (&b, 2.0)] {
        let batch = (100.0 * (n * m * d / delta).ln() / eps).ceil();
        assert_eq!(logged_value(log, "B = "), batch);
        let steps = (n as usize / 2 / batch as usize) as f64;
        let upsilon = 0.9 * batch + 2.0 * (steps / delta).ln() / eps;
        assert!((logged_value(log, "upsilon = ") - upsilon).abs() < 1e-9 * upsilon);
    }
    // tau does not depend on epsilon
    assert_eq!(logged_value(&a, "tau = "), logged_value(&b, "tau = "));
}

#[test]
fn file_values_lose_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    fs::write(&cfg, "epsilon = 2\nn = 40000\n").unwrap();
    let file_only = stderr(&rdpsco(&["run", "--config", cfg.to_str().unwrap()]));
    let flagged = stderr(&rdpsco(&["run", "--config", cfg.to_str().unwrap(), "--epsilon", "1"]));
    let b2 = (100.0f64 * (40000.0f64 * 8.0 / 1e-6).ln() / 2.0).ceil();
    let b1 = (100.0f64 * (40000.0f64 * 8.0 / 1e-6).ln()).ceil();
    assert_eq!(logged_value(&file_only, "B = "), b2);
    assert_eq!(logged_value(&flagged, "B = "), b1);
}

#[test]
fn usage_errors_exit_two() {
    let o = rdpsco(&["run", "--set", "eta=2.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("contractivity precondition eta <= 2/beta"));

    let o = rdpsco(&["run", "--set", "colour=blue"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("'colour'"));

    let o = rdpsco(&["run", "--set", "epsilon=-1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = rdpsco(&["run", "--format", "xml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("'format'"));

    let o = rdpsco(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn duplicate_file_keys_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dup.cfg");
    fs::write(&cfg, "seed = 1\nseed = 2\n").unwrap();
    let o = rdpsco(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
}

#[test]
fn infeasible_configuration_exits_three() {
    let o = rdpsco(&["run", "--set", "n=100"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = rdpsco(&["sweep", "--grid", "16:1", "--seeds", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn one_point_sweep_gives_one_row() {
    let o = rdpsco(&["sweep", "--grid", "1024:1", "--seeds", "1", "--pipeline", "robust"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "# rdpsco-utility v1");
    assert_eq!(lines[1], "n,m,seed,pipeline,excess_risk,passed,error");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("1024,1,0,robust,"));
}

#[test]
fn counterexample_distance_printed() {
    let o = rdpsco(&["counterexample", "--alpha", "1e-3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let shift = |name: &str| -> f64 {
        let line = out.lines().find(|l| l.starts_with(name)).unwrap();
        line.rsplit(',').next().unwrap().parse().unwrap()
    };
    assert!(shift("geometric-median") >= 0.9);
    assert!(shift("coordinate-median") <= 1e-3);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<String> = (0..4)
        .map(|i| dir.path().join(format!("{i}.csv")).to_string_lossy().into_owned())
        .collect();
    let sweep = ["sweep", "--grid", "1024:1,2048:2", "--seeds", "2", "--seed", "5"];
    for p in &paths[..2] {
        let mut args = sweep.to_vec();
        args.extend(["-o", p.as_str()]);
        assert_eq!(rdpsco(&args).status.code(), Some(0));
    }
    let run = ["run", "--seed", "3", "--format", "json"];
    for p in &paths[2..] {
        let mut args = run.to_vec();
        args.extend(["-o", p.as_str()]);
        assert_eq!(rdpsco(&args).status.code(), Some(0));
    }
    assert_eq!(fs::read(&paths[0]).unwrap(), fs::read(&paths[1]).unwrap());
    assert_eq!(fs::read(&paths[2]).unwrap(), fs::read(&paths[3]).unwrap());
}

#[test]
fn small_certify_exits_zero_and_lists_checks() {
    let o = rdpsco(&["certify", "--set", "trials=200", "--set", "scenario_seeds=20"]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}\n{}", stderr(&o));
    assert!(out.starts_with("# rdpsco-certify v1\nname,trials,violations,statistic,bound,passed\n"));
    assert_eq!(out.lines().count(), 2 + 18);
}

#[test]
fn sensitivity_reports_per_step_gaps() {
    let o = rdpsco(&["sensitivity", "--seeds", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("# rdpsco-sensitivity v1\nseed,step,linf_gap,base_gap_bound,score_gap,violated\n"));
    assert!(out.lines().skip(2).all(|l| l.ends_with(",false")));
}

#[test]
fn run_writes_dataset_that_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("users.txt");
    let o = rdpsco(&[
        "run", "--set", "instance=linear", "--set", "n=20000", "--set", "m=2",
        "--set", &format!("dataset_out={}", data.display()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ds = robust_dpsco::problem::Dataset::<f64>::read_text(std::io::BufReader::new(
        fs::File::open(&data).unwrap(),
    ))
    .unwrap();
    assert_eq!((ds.n(), ds.m(), ds.dim()), (20000, 2, 2));
}

#[test]
fn overrides_rejected_outside_run() {
    let o = rdpsco(&["sweep", "--set", "eta=0.1", "--grid", "1024:1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("'eta'"));
}
