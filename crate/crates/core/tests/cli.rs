use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pcrlab::config::{RunConfig, KEYS};
use pcrlab::estimator::FitReport;
use pcrlab::{pcr_fit, Simulator};

const SMALL: &str = "T = [80]\np_rule = \"p = 12\"\nK_rule = \"K = 2\"\nspike_constants = [2.0, 1.0]\n\
    alpha = 0.9\nrho = 0.3\nvartheta = [1.0, 0.5]\ngamma_tail = [0.2]\nseed = 41\n";

fn pcrlab(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pcrlab"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn bundled(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn simulate_is_byte_identical_and_reports_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let out = pcrlab(&["simulate", "--config", s(&cfg), "--out", s(&a)], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("seed used: 41"));
    assert!(pcrlab(&["simulate", "--config", s(&cfg), "--out", s(&b)], &[])
        .status
        .success());
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());

    let text = String::from_utf8(bytes).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 13);
    assert_eq!(header[0], "y");
    assert_eq!(lines.count(), 80);

    let c = dir.path().join("c.csv");
    assert!(
        pcrlab(&["simulate", "--config", s(&cfg), "--out", s(&c), "--seed", "42"], &[])
            .status
            .success()
    );
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn empty_sample_is_refused_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.cfg", &SMALL.replace("T = [80]", "T = [0]"));
    let out_file = dir.path().join("never.csv");
    let out = pcrlab(&["simulate", "--config", s(&cfg), "--out", s(&out_file)], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_file.exists());
}

#[test]
fn simulate_then_fit_matches_in_process_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let data = dir.path().join("data.csv");
    let report_path = dir.path().join("fit.json");
    assert!(pcrlab(&["simulate", "--config", s(&cfg), "--out", s(&data)], &[])
        .status
        .success());
    let out = pcrlab(&["fit", s(&data), "-k", "2", "--out", s(&report_path)], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("empirical risk R_T"));
    let report: FitReport = serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();

    let config = RunConfig::load(SMALL, std::iter::empty::<(String, String)>()).unwrap();
    let (cell, spec) = config.first_cell().unwrap();
    let sample = Simulator::new(&spec).unwrap().sample(cell.t, config.seed).unwrap();
    let expected = pcr_fit(&sample, 2).unwrap().report(&sample);
    assert_eq!((report.t, report.p, report.k), (80, 12, 2));
    assert!((report.empirical_risk - expected.empirical_risk).abs() <= 1e-12);
    for (a, b) in report.vartheta_hat.iter().zip(&expected.vartheta_hat) {
        assert!((a - b).abs() <= 1e-12);
    }
    for (a, b) in report.eigvals_hat.iter().zip(&expected.eigvals_hat) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }
}

#[test]
fn fit_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let data = dir.path().join("data.csv");
    assert!(pcrlab(&["simulate", "--config", s(&cfg), "--out", s(&data)], &[])
        .status
        .success());

    let out = pcrlab(&["fit", s(&data), "-k", "13"], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("component count"));

    let zeros = dir.path().join("zeros.csv");
    std::fs::write(&zeros, "y,x1,x2\n1,0,0\n2,0,0\n3,0,0\n").unwrap();
    let out = pcrlab(&["fit", s(&zeros), "-k", "1"], &[]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("rank deficient"));

    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, "y,x1,x2\n1,2,3\n4,five,6\n").unwrap();
    let out = pcrlab(&["fit", s(&broken)], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn sweep_rejects_empty_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "empty.cfg", "T = []\n");
    let out = pcrlab(&["sweep", "--config", s(&cfg)], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("grid is empty"));
}

#[test]
fn unknown_keys_fail_in_file_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "typo.cfg", "replicatoins = 3\n");
    assert_eq!(pcrlab(&["simulate", "--config", s(&cfg)], &[]).status.code(), Some(1));
    let cfg = write_config(dir.path(), "ok.cfg", SMALL);
    let out = pcrlab(&["simulate", "--config", s(&cfg)], &[("PCRLAB_REPLICATOINS", "3")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn environment_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let out = pcrlab(
        &["simulate", "--config", s(&cfg)],
        &[("PCRLAB_SEED", "7"), ("PCRLAB_T", "[5]")],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("seed used: 7"));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 6);
}

#[test]
fn help_lists_every_key_with_default() {
    let out = pcrlab(&["--help"], &[]);
    let text = String::from_utf8(out.stdout).unwrap();
    for (key, default, _) in KEYS {
        let line = text
            .lines()
            .find(|l| l.trim_start().starts_with(&format!("{key} ")))
            .unwrap_or_else(|| panic!("{key}"));
        assert!(line.contains(default), "{line}");
    }
    for sub in ["simulate", "fit", "decompose", "sweep", "diagnose"] {
        assert!(text.contains(sub));
    }
}

#[test]
fn decompose_and_diagnose_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", &format!("{SMALL}replications = 5\n"));
    let row = dir.path().join("row.csv");
    let out = pcrlab(&["decompose", "--config", s(&cfg), "--out", s(&row)], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("bound holds"));
    let text = std::fs::read_to_string(&row).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 13);

    let diag = dir.path().join("diag.json");
    let out = pcrlab(&["diagnose", "--config", s(&cfg), "--out", s(&diag)], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&diag).unwrap()).unwrap();
    assert_eq!(json[0]["diagnostics"]["count"], 5);
}

#[test]
fn bundled_excess_bound_config_has_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("excess_bound");
    let out = pcrlab(
        &[
            "sweep",
            "--config",
            &bundled("excess_bound.cfg"),
            "--out",
            s(&prefix),
            "--check",
        ],
        &[],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(format!("{}.json", prefix.display())).unwrap()).unwrap();
    assert_eq!(summary["bound_violations"], 0);
    assert_eq!(summary["check"]["passed"], true);
}

#[test]
fn bundled_strong_signal_config_passes_check() {
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .to_string();
    let out = pcrlab(
        &[
            "sweep",
            "--config",
            &bundled("strong_signal.cfg"),
            "--check",
            "--threads",
            &threads,
        ],
        &[],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("mean_residual slope"));
}
