use std::process::{Command, Output};

use taskbench::report::{self, RunRecord};

fn taskbench(args: &[&str], workers_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_taskbench"));
    cmd.args(args).env_remove("TASKBENCH_WORKERS");
    if let Some(w) = workers_env {
        cmd.env("TASKBENCH_WORKERS", w);
    }
    cmd.output().expect("spawn taskbench")
}

fn stdout_records(out: &Output) -> Vec<RunRecord> {
    serde_json::from_slice(&out.stdout).expect("run prints a JSON array")
}

#[test]
fn run_checksum_matches_across_backends() {
    let flags = [
        "run", "--type", "stencil", "--width", "64", "--steps", "16", "--kernel", "compute_bound", "--iter", "4096",
        "--workers", "4", "--seed", "7", "--reps", "1", "--spi", "1e-8", "--backend",
    ];
    let mut checksums = Vec::new();
    for backend in ["ws", "bsp", "fbc"] {
        let mut args = flags.to_vec();
        args.push(backend);
        let out = taskbench(&args, None);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let records = stdout_records(&out);
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].tasks_executed, 64 * 16);
        checksums.push(records[0].checksum.clone());
    }
    assert!(checksums.windows(2).all(|w| w[0] == w[1]), "{checksums:?}");
}

#[test]
fn unknown_type_is_a_usage_error() {
    let out = taskbench(&["run", "--type", "fft"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--type"));
}

#[test]
fn validation_errors_exit_one() {
    let cases: [&[&str]; 5] = [
        &["run", "--width", "0", "--spi", "1e-8"],
        &["run", "--backend", "bsp", "--no-barrier", "--spi", "1e-8"],
        &["run", "--kernel", "load_imbalance", "--imbalance", "3", "--spi", "1e-8"],
        &["run", "--type", "spread", "--width", "4", "--radix", "9", "--spi", "1e-8"],
        &["sweep", "--max-exp", "6", "--min-exp", "8", "--spi", "1e-8"],
    ];
    for args in cases {
        let out = taskbench(args, Some("2"));
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn workers_default_comes_from_environment() {
    let out = taskbench(&["run", "--iter", "64", "--steps", "2", "--reps", "1", "--spi", "1e-8"], Some("3"));
    assert_eq!(out.status.code(), Some(0));
    let r = &stdout_records(&out)[0];
    assert_eq!(r.workers, 3);
    assert_eq!(r.width, 48);
    // the flag wins over the environment
    let out = taskbench(&["run", "--iter", "64", "--steps", "2", "--reps", "1", "--spi", "1e-8", "--workers", "2"], Some("3"));
    assert_eq!(stdout_records(&out)[0].workers, 2);
}

#[test]
fn no_barrier_run_is_labelled() {
    let out = taskbench(
        &["run", "--backend", "fbc", "--no-barrier", "--iter", "64", "--steps", "3", "--reps", "1", "--spi", "1e-8"],
        Some("2"),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_records(&out)[0].backend, "fbc-nobarrier");
}

#[test]
fn run_writes_every_format() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let (json, csv, dat) = (p("r.json"), p("r.csv"), p("r.dat"));
    let out = taskbench(
        &["run", "--iter", "64", "--steps", "2", "--reps", "2", "--spi", "1e-8", "--json", &json, "--csv", &csv, "--dat", &dat],
        Some("2"),
    );
    assert_eq!(out.status.code(), Some(0));
    let records = report::read_json(std::path::Path::new(&json)).unwrap();
    assert_eq!(records[0].reps, 2);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 2);
    assert!(std::fs::read_to_string(&dat).unwrap().contains("# iterations ws"));
}

#[test]
fn unwritable_output_is_an_execution_failure() {
    let out = taskbench(
        &["run", "--iter", "64", "--steps", "2", "--reps", "1", "--spi", "1e-8", "--json", "/nonexistent-dir/r.json"],
        Some("1"),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent-dir/r.json"));
}

#[test]
fn metg_reports_per_backend() {
    let dir = tempfile::tempdir().unwrap();
    let dat = dir.path().join("m.dat");
    let out = taskbench(
        &[
            "metg", "--workers", "2", "--width", "8", "--steps", "4", "--max-exp", "12", "--min-exp", "6", "--reps", "1",
            "--spi", "2.5e-8", "--backend", "bsp,ws", "--dat", dat.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("bsp") && text.contains("ws") && text.contains("METG(50%)"));
    let dat = std::fs::read_to_string(dat).unwrap();
    assert!(dat.contains("# task_granularity_seconds bsp ws"));
}

#[test]
fn selftest_passes() {
    let out = taskbench(&["selftest", "--workers", "4", "--iter", "16"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("selftest:"));
}

#[test]
fn help_exits_zero() {
    let out = taskbench(&["--help"], None);
    assert_eq!(out.status.code(), Some(0));
    for sub in ["run", "sweep", "metg", "scale", "imbalance", "comm", "calibrate", "selftest"] {
        assert!(String::from_utf8_lossy(&out.stdout).contains(sub), "{sub}");
    }
}
