use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn corrugate(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_corrugate"));
    cmd.args(args).env_remove("CORRUGATE_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn config(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

/// Explicit schedule whose single stage fits on a 256² grid.
const SMALL_RUN: &str = "\
n = 2
seed = 3
grid.resolution = 256
schedule.a = 20
schedule.b = 1.2
schedule.c = 0.5
schedule.q_max = 1
problem.vb = trig
problem.vb.amplitude = 0.1
problem.vb.freq = 1, 1
stage.policy = record
stage.residual_tests = 4
";

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

#[test]
fn alpha_at_the_threshold_is_infeasible() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "t.cfg",
        "n = 2\ngrid.resolution = 32\nschedule.alpha = 0.14285714285714285\n",
    );
    let out = corrugate(&["feasible", &cfg], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("infeasible"));
}

#[test]
fn alpha_below_the_threshold_is_feasible() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "t.cfg",
        "n = 2\ngrid.resolution = 32\nschedule.alpha = 0.05\n",
    );
    let out = corrugate(&["feasible", &cfg, "--json"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["feasible"], true);
    assert!(json["ledger"]["entries"].as_array().unwrap().len() > 5);
}

#[test]
fn malformed_config_exits_4_with_line_and_key() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "bad.cfg", "n = 2\ngrid.resolution = lots\n");
    let out = corrugate(&["run", &cfg], &[]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("line 2") && err.contains("grid.resolution"),
        "{err}"
    );
    assert_eq!(
        corrugate(&["run", "/nonexistent.cfg"], &[]).status.code(),
        Some(4)
    );
    assert_eq!(corrugate(&["frobnicate"], &[]).status.code(), Some(4));
}

#[test]
fn bad_thread_count_exits_4() {
    let out = corrugate(&["info", "/nonexistent"], &[("CORRUGATE_THREADS", "zero")]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CORRUGATE_THREADS"));
}

#[test]
fn zero_stages_write_the_initialisation_and_one_log_line() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "q0.cfg",
        "n = 2\ngrid.resolution = 64\nschedule.q_max = 0\nproblem.vb = trig\nproblem.vb.freq = 1, 1\n",
    );
    let out_dir = dir.path().join("out");
    let out = corrugate(&["run", &cfg, "--out", out_dir.to_str().unwrap()], &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 1);
    let log: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(log["q"], 0);
    for key in ["norms", "deficit", "bound", "margins", "timings"] {
        assert!(log.get(key).is_some(), "log line lacks {key}");
    }
    for file in [
        "v.cigrid",
        "w.cigrid",
        "vb.cigrid",
        "f.cigrid",
        "provenance.json",
    ] {
        assert!(out_dir.join(file).exists(), "{file} missing");
    }
    let prov: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("provenance.json")).unwrap()).unwrap();
    for key in [
        "frame",
        "schedule",
        "ledger",
        "background",
        "measured",
        "stages",
    ] {
        assert!(prov.get(key).is_some(), "provenance lacks {key}");
    }
}

#[test]
fn same_seed_gives_identical_files_for_any_thread_count() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "run.cfg", SMALL_RUN);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let flags = ["--dump-stages", "--emit-plot-data"];
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        let mut args = vec!["run", &cfg, "--out", out.to_str().unwrap()];
        args.extend(flags);
        let res = corrugate(&args, &[("CORRUGATE_THREADS", threads)]);
        assert_eq!(
            res.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
    let (fa, fb) = (files(&a), files(&b));
    assert!(fa.contains_key("stage_01_v.cigrid") && fa.contains_key("norms.csv"));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        assert!(bytes == &fb[name], "{name} differs between runs");
    }

    let c = dir.path().join("c");
    let res = corrugate(
        &["run", &cfg, "--out", c.to_str().unwrap(), "--seed", "4"],
        &[],
    );
    assert_eq!(res.status.code(), Some(0));
    assert_ne!(fs::read(c.join("v.cigrid")).unwrap(), fa["v.cigrid"]);
}

#[test]
fn strict_run_of_an_infeasible_schedule_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "s.cfg", &SMALL_RUN.replace("record", "strict"));
    let out_dir = dir.path().join("out");
    let out = corrugate(&["run", &cfg, "--out", out_dir.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn inspection_commands_read_run_output() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "run.cfg", SMALL_RUN);
    let out_dir = dir.path().join("out");
    let res = corrugate(&["run", &cfg, "--out", out_dir.to_str().unwrap()], &[]);
    assert_eq!(res.status.code(), Some(0));
    let v = out_dir.join("v.cigrid");
    let f = out_dir.join("f.cigrid");

    let info = corrugate(&["info", v.to_str().unwrap()], &[]);
    assert_eq!(info.status.code(), Some(0));
    let text = String::from_utf8(info.stdout).unwrap();
    assert!(text.starts_with("CIGRID v1 n=2"));

    let dump = corrugate(&["dump", v.to_str().unwrap(), "--limit", "5"], &[]);
    assert_eq!(String::from_utf8(dump.stdout).unwrap().lines().count(), 7);

    let verify = corrugate(
        &[
            "verify",
            v.to_str().unwrap(),
            f.to_str().unwrap(),
            "--tests",
            "3",
            "--json",
        ],
        &[],
    );
    assert_eq!(verify.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&verify.stdout).unwrap();
    assert_eq!(report["entries"].as_array().unwrap().len(), 3);

    fs::write(dir.path().join("junk.cigrid"), b"not a field\n").unwrap();
    let junk = dir.path().join("junk.cigrid");
    assert_eq!(
        corrugate(&["info", junk.to_str().unwrap()], &[])
            .status
            .code(),
        Some(4)
    );
}
