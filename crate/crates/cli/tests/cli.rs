use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nlsdecay::commands::{self, RunDir};
use nlsdecay::config;
use nlsdecay::output::{self, Table};
use nlsdecay::snapshot;
use nlsdecay_core::ratefit::FitStatus;
use tempfile::TempDir;

const SMALL: &str = r#"{
  "run_id": "small",
  "geometry": {"dimension": 1, "sizes": [256], "lengths": [40.0], "mode": "radial-3d"},
  "initial": {"profile": {"base": {"kind": "gaussian", "amplitude": 0.5, "width": 1.0},
                          "bubbles": [{"weight": 1.0, "delay": 1.0}]}},
  "solver": {"dt": 0.01, "t_end": 4.0, "snapshot_stride": 10},
  "observe": {"norms": ["hdot0.5", "lp3"], "probe_times": [3.0, 4.0], "tail_s": [1.0, 2.0, 3.0],
              "duhamel": {"t": 3.0, "delay": 1.0, "m": 0.5}},
  "fit": {"window": [1.5, 3.5]}
}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlsdecay"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn simulate(dir: &Path, config: &Path, out: &str) -> PathBuf {
    let run = dir.join(out);
    run_ok(bin().args(["simulate", "--config"]).arg(config).arg("--out").arg(&run));
    run
}

#[test]
fn simulate_writes_run_directory() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.json", SMALL);
    let run = simulate(tmp.path(), &cfg, "a");
    for f in ["config.json", "manifest.json", "observables.csv", "conservation.csv"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let manifest: commands::Manifest = output::read_json(&run.join("manifest.json")).unwrap();
    assert_eq!(manifest.snapshots.len(), 41);
    assert_eq!(manifest.steps, 400);
    let hash = config::load(&cfg).unwrap().hash;
    assert_eq!(manifest.config_hash, hash);
    let obs = Table::read(&run.join("observables.csv")).unwrap();
    assert_eq!(obs.config_hash, hash);
    assert_eq!(obs.header, ["t", "l2", "linf", "l4", "energy", "hdot0.5", "lp3"]);
    assert_eq!(obs.rows.len(), 41);
    let last = snapshot::read(&run.join("snapshots").join(&manifest.snapshots[40].file)).unwrap();
    assert_eq!(last.time(), manifest.end_time);
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.json", SMALL);
    let a = simulate(tmp.path(), &cfg, "a");
    let b = simulate(tmp.path(), &cfg, "b");
    for f in ["observables.csv", "conservation.csv", "manifest.json", "config.json", "snapshots/snap_000040.nlsf"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn probe_beyond_horizon_fails_before_compute() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", &SMALL.replace("[3.0, 4.0]", "[3.0, 5.0]"));
    let out = bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(tmp.path().join("run")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad.json:7: probe_times"), "{stderr}");
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn measure_produces_reports() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.json", SMALL);
    let run = simulate(tmp.path(), &cfg, "a");
    run_ok(bin().arg("measure").arg(&run));
    let hash = config::load(&cfg).unwrap().hash;

    let obs = Table::read(&run.join("observables.csv")).unwrap();
    assert_eq!(obs.rows.len(), 41);

    let scatter: commands::ScatterFile = output::read_json(&run.join("scatter.json")).unwrap();
    assert_eq!(scatter.config_hash, hash);
    assert!(scatter.cauchy_gap > 0.0);
    let u_plus = snapshot::read(&run.join("u_plus.nlsf")).unwrap();
    assert_eq!(u_plus.time(), 0.0);
    let tail = Table::read(&run.join("tail.csv")).unwrap();
    assert_eq!(tail.column("s").unwrap(), [1.0, 2.0, 3.0]);

    let duhamel: commands::DuhamelFile = output::read_json(&run.join("duhamel.json")).unwrap();
    assert_eq!(duhamel.pieces_l2.len(), 5);
    assert_eq!(duhamel.boundaries, [0.0, 0.5, 0.5, 1.5, 1.5, 3.0]);
    assert!(duhamel.relative_residual < 1e-2, "{}", duhamel.relative_residual);
    assert!(duhamel.max_h4_norm > 0.0);
}

#[test]
fn fit_round_trips_exact_power_law_through_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "run.json",
        &SMALL.replace("\"fit\": {\"window\": [1.5, 3.5]}", "\"fit\": {\"window\": [1.0, 4.0], \"targets\": [{\"series\": \"linf\", \"target\": -1.5, \"tolerance\": 0.1, \"window\": [1.0, 4.0]}]}"),
    );
    let run = simulate(tmp.path(), &cfg, "a");
    let hash = config::load(&cfg).unwrap().hash;

    let mut table = Table::new(&hash, &["t", "linf"]);
    table.rows = (1..=40).map(|i| {
        let t = 0.1 * i as f64;
        vec![t, 2.75 * t.powf(-1.4375)]
    }).collect();
    table.write(&run.join("observables.csv")).unwrap();

    let report = commands::fit(&RunDir::open(&run, None, false).unwrap(), false).unwrap();
    let fit = report.entries[0].fit.unwrap();
    assert!((fit.exponent + 1.4375).abs() <= 1e-12, "{}", fit.exponent);
    assert!((fit.log_amplitude - 2.75f64.ln()).abs() <= 1e-12);
    assert_eq!(report.entries[0].status, FitStatus::Pass);

    let from_file: commands::RateReportFile = output::read_json(&run.join("rate_report.json")).unwrap();
    assert_eq!(from_file.entries[0].fit.unwrap().exponent.to_bits(), fit.exponent.to_bits());
}

#[test]
fn fit_refuses_foreign_files_unless_forced() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.json", SMALL);
    let run = simulate(tmp.path(), &cfg, "a");
    run_ok(bin().arg("measure").arg(&run));
    let path = run.join("observables.csv");
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, text.replacen("# config_hash=", "# config_hash=0", 1)).unwrap();

    let out = bin().arg("fit").arg(&run).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not match"));
    run_ok(bin().arg("fit").arg(&run).arg("--force"));
    assert!(run.join("rate_report.json").is_file());
}

#[test]
fn measure_with_other_config_needs_force() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.json", SMALL);
    let run = simulate(tmp.path(), &cfg, "a");
    let other = write_config(tmp.path(), "other.json", &SMALL.replace("\"lp3\"", "\"lp6\""));
    let out = bin().arg("measure").arg(&run).arg("--config").arg(&other).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    run_ok(bin().arg("measure").arg(&run).arg("--config").arg(&other).arg("--force"));
    let obs = Table::read(&run.join("observables.csv")).unwrap();
    assert_eq!(obs.header.last().unwrap(), "lp6");
}

#[test]
fn missing_snapshot_is_io_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.json", SMALL);
    let run = simulate(tmp.path(), &cfg, "a");
    fs::remove_file(run.join("snapshots/snap_000007.nlsf")).unwrap();
    let out = bin().arg("measure").arg(&run).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn warm_restart_continues_the_run() {
    let tmp = TempDir::new().unwrap();
    let plain = SMALL.replace(
        r#""observe": {"norms": ["hdot0.5", "lp3"], "probe_times": [3.0, 4.0], "tail_s": [1.0, 2.0, 3.0],
              "duhamel": {"t": 3.0, "delay": 1.0, "m": 0.5}},"#,
        "",
    );
    assert!(!plain.contains("observe"));
    let full = write_config(tmp.path(), "full.json", &plain);
    let full_run = simulate(tmp.path(), &full, "full");
    let half = write_config(tmp.path(), "half.json", &plain.replace("\"t_end\": 4.0", "\"t_end\": 2.0"));
    let half_run = simulate(tmp.path(), &half, "half");

    let restart_text = plain
        .replace(
            r#"{"profile": {"base": {"kind": "gaussian", "amplitude": 0.5, "width": 1.0},
                          "bubbles": [{"weight": 1.0, "delay": 1.0}]}}"#,
            r#"{"snapshot": "half/snapshots/snap_000020.nlsf"}"#,
        )
        .replace("\"t_end\": 4.0", "\"t_end\": 2.0");
    assert!(restart_text.contains("\"snapshot\": \"half"));
    let restart = write_config(tmp.path(), "restart.json", &restart_text);
    let restart_run = simulate(tmp.path(), &restart, "restart");
    assert!(half_run.is_dir());

    let a = snapshot::read(&full_run.join("snapshots/snap_000040.nlsf")).unwrap();
    let b = snapshot::read(&restart_run.join("snapshots/snap_000020.nlsf")).unwrap();
    assert!((a.time() - b.time()).abs() < 1e-12);
    assert_eq!(a.values(), b.values());
}

#[test]
fn numeric_abort_exit_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "abort.json",
        &SMALL.replace("\"snapshot_stride\": 10", "\"snapshot_stride\": 10, \"max_mass_drift\": 1e-300"),
    );
    let out = bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(tmp.path().join("r")).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_runs_every_config() {
    let tmp = TempDir::new().unwrap();
    let a = write_config(tmp.path(), "a.json", &SMALL.replace("\"small\"", "\"first\""));
    let b = write_config(tmp.path(), "b.json", &SMALL.replace("\"small\"", "\"second\"").replace("0.5, \"width\"", "0.25, \"width\""));
    let out = tmp.path().join("sweep");
    run_ok(bin().args(["--threads", "2", "sweep", "--config"]).arg(&a).arg("--config").arg(&b).arg("--out").arg(&out));
    for id in ["first", "second"] {
        assert!(out.join(id).join("rate_report.json").is_file(), "{id}");
    }
    let dup = bin().args(["sweep", "--config"]).arg(&a).arg("--config").arg(&a).arg("--out").arg(&out).output().unwrap();
    assert_eq!(dup.status.code(), Some(2));
}

#[test]
fn threads_env_is_honoured() {
    let out = bin().env("NLSDECAY_THREADS", "0x").args(["verify", "ratefit"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    run_ok(bin().env("NLSDECAY_THREADS", "3").args(["verify", "ratefit"]));
    run_ok(bin().env("NLSDECAY_THREADS", "3").args(["--threads", "1", "verify", "ratefit"]));
}

#[test]
fn verify_output_is_byte_identical() {
    for suite in ["ratefit", "interpolation"] {
        let a = run_ok(bin().args(["verify", suite])).stdout;
        let b = run_ok(bin().args(["verify", suite])).stdout;
        assert_eq!(a, b, "{suite}");
        let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
        assert_eq!(v["passed"], true);
    }
}

#[test]
fn verify_unknown_suite_is_an_error() {
    let out = bin().args(["verify", "no-such-suite"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}
