//! Black-box tests of the command-line interface: exit codes, report
//! files, fault injection, and restart equivalence.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hmhd"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const SMALL_RUN: &str = "\
grid.n = 32
grid.band = 8
model.system = electron_aniso
model.alpha = 0.6
init.seed = 3
init.k_max = 6
init.amplitude_h3 = 1.0
step.dt_mode = fixed
step.dt = 0.002
step.t_end = 0.04
step.stride = 5
output.snapshot_stride = 10
";

#[test]
fn verify_small_suite_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let out = bin()
        .args(["verify", "--dim", "2", "--n", "16", "--seeds", "1"])
        .arg("--json")
        .arg(&json)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["all_pass"], true);
    assert!(report["n_checks"].as_u64().unwrap() > 20);
    assert_eq!(report["n_failed"].as_u64().unwrap(), 0);
    assert!(report["checks"].as_array().unwrap().len() > 20);
}

#[test]
fn default_verify_suite_is_wide() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let out = bin().arg("verify").arg("--json").arg(&json).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(
        report["n_checks"].as_u64().unwrap() >= 60,
        "only {} checks",
        report["n_checks"]
    );
    assert_eq!(report["all_pass"], true);
}

#[test]
fn fault_injection_is_caught_and_named() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let out = bin()
        .args(["verify", "--dim", "2", "--n", "16", "--seeds", "1"])
        .arg("--json")
        .arg(&json)
        .env("HMHD_FAULT_LABEL", "I1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("I1"), "stderr: {err}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["all_pass"], false);
    assert!(report["first_failure"].as_str().is_some());
}

#[test]
fn unknown_fault_label_is_rejected() {
    let out = bin()
        .args(["verify", "--dim", "2", "--n", "16", "--seeds", "1"])
        .env("HMHD_FAULT_LABEL", "bogus")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn simulate_writes_trajectory_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    write(&cfg, SMALL_RUN);
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("simulate")
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,"));
    let n_cols = header.split(',').count();
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 3);
    for r in &rows {
        assert_eq!(r.split(',').count(), n_cols, "ragged row {r}");
    }
    assert!(out_dir.join("snapshot_latest.bin").exists());
    assert!(out_dir.join("snapshot_final.bin").exists());

    let (_, state) = hmhd_core::snapshot::load(&out_dir.join("snapshot_final.bin")).unwrap();
    assert!((state.t - 0.04).abs() <= 1e-12);
}

#[test]
fn restart_matches_uninterrupted_run_closely() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    write(&cfg, SMALL_RUN);

    let full = dir.path().join("full");
    let halves = dir.path().join("halves");
    let run = |extra: &[&std::ffi::OsStr]| {
        let mut c = bin();
        c.arg("simulate").arg("--config").arg(&cfg);
        for a in extra {
            c.arg(a);
        }
        let out = c.output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    };
    use std::ffi::OsStr;
    run(&[OsStr::new("--out-dir"), full.as_os_str()]);
    run(&[
        OsStr::new("--out-dir"),
        halves.as_os_str(),
        OsStr::new("--t-end"),
        OsStr::new("0.02"),
    ]);
    let snap = halves.join("snapshot_final.bin");
    run(&[
        OsStr::new("--out-dir"),
        halves.as_os_str(),
        OsStr::new("--restart"),
        snap.as_os_str(),
    ]);

    let (_, a) = hmhd_core::snapshot::load(&full.join("snapshot_final.bin")).unwrap();
    let (_, b) = hmhd_core::snapshot::load(&halves.join("snapshot_final.bin")).unwrap();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for c in 1..=3 {
        for (x, y) in a
            .b
            .comp(c)
            .coeffs()
            .iter()
            .zip(b.b.comp(c).coeffs().iter())
        {
            worst = worst.max((x - y).norm());
            scale = scale.max(x.norm());
        }
    }
    assert!(
        worst <= 1e-12 * scale.max(1e-300),
        "restart drift {worst:.3e} vs scale {scale:.3e}"
    );
}

#[test]
fn blowup_exits_2_and_keeps_last_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    write(&cfg, &format!("{SMALL_RUN}step.h3_ceiling = 0.5\n"));
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("simulate")
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("blow-up"), "stderr: {err}");
    assert!(out_dir.join("snapshot_latest.bin").exists());
    assert!(!out_dir.join("snapshot_final.bin").exists());
}

#[test]
fn config_errors_exit_3_and_name_the_offender() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");

    write(&cfg, "grid.m = 4\n");
    let out = bin().arg("simulate").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.m"));

    write(&cfg, "grid.n = 16\ngrid.n = 32\n");
    let out = bin().arg("simulate").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.n"));

    let out = bin()
        .arg("simulate")
        .arg("--config")
        .arg(dir.path().join("missing.cfg"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn scaling_subcommand_exit_codes() {
    let pass = bin()
        .args([
            "scaling-test", "--n", "32", "--band", "4", "--t-end", "0.01", "--dt", "0.0005",
        ])
        .output()
        .unwrap();
    assert_eq!(
        pass.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&pass.stderr)
    );

    let fail = bin()
        .args([
            "scaling-test", "--n", "32", "--band", "4", "--t-end", "0.01", "--dt", "0.0005",
            "--tol", "0",
        ])
        .output()
        .unwrap();
    assert_eq!(fail.status.code(), Some(1));
}

#[test]
fn help_documents_every_config_key() {
    let out = bin().args(["simulate", "--help"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for (key, _) in hmhd_core::config::KEY_DOCS {
        assert!(text.contains(key), "help is missing {key}");
    }
    assert!(text.contains("HMHD_THREADS"));
}
