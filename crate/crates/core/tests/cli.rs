use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ddlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddlab")).args(args).current_dir(cwd).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const SINE: &str = r#"
final_time = 0.4
epsilon = 0.05
delta = 0.0025
[flux]
kind = "burgers"
[viscosity]
kind = "von_neumann"
[initial]
kind = "sine"
amplitude = 1.0
periods = 1
[domain]
x_left = 0.0
x_right = 6.283185307179586
cells = 600
[diagnostics]
stored_states = 12
"#;

#[test]
fn run_prints_one_row_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sine.toml", SINE);
    let out = ddlab(&["run", cfg.to_str().unwrap(), "--output", "out"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 2);
    assert!(stdout.starts_with("epsilon,delta,h,dt,"));
    assert!(dir.path().join("out/final.csv").exists());
    assert!(dir.path().join("out/summary.csv").exists());
}

#[test]
fn resolution_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "coarse.toml", &SINE.replace("cells = 600", "cells = 50"));
    let out = ddlab(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("override_resolution"));
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &SINE.replace("[flux]", "bogus = 1\n[flux]"));
    assert_eq!(code(&ddlab(&["run", cfg.to_str().unwrap()], dir.path())), 2);
    let cfg = write_config(dir.path(), "neg.toml", &SINE.replace("epsilon = 0.05", "epsilon = -0.05"));
    assert_eq!(code(&ddlab(&["run", cfg.to_str().unwrap()], dir.path())), 2);
}

#[test]
fn blow_up_exits_3_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let body = SINE
        .replace(
            "final_time = 0.4",
            "final_time = 200.0\nsafety = 1.0\noverride_resolution = true\nsnapshot_times = [1.0]",
        )
        .replace("epsilon = 0.05", "epsilon = 0.0")
        .replace("delta = 0.0025", "delta = 1e-12")
        .replace("cells = 600", "cells = 64");
    let cfg = write_config(dir.path(), "blow.toml", &body);
    let out = ddlab(&["run", cfg.to_str().unwrap(), "--output", "partial"], dir.path());
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("partial").read_dir().unwrap().next().is_some());
}

#[test]
fn sweep_writes_table_and_figures() {
    let dir = tempfile::tempdir().unwrap();
    let body = SINE
        .replace("cells = 600", "cells = 100\ncells_per_epsilon = 2.0")
        .replace("final_time = 0.4", "final_time = 0.4\noverride_resolution = true")
        .replace("[diagnostics]", "[diagnostics]\nentropy = false");
    let cfg = write_config(dir.path(), "sweep.toml", &body);
    let out = ddlab(
        &[
            "sweep",
            cfg.to_str().unwrap(),
            "--theorem",
            "43",
            "--coupling-constant",
            "0.1",
            "--epsilons",
            "0.1,0.05,0.025",
            "--output",
            "sw",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(dir.path().join("sw/l1_error.svg").exists());
    assert!(dir.path().join("sw/overlay.svg").exists());

    let out = ddlab(&["plot", "sw/sweep.csv", "--output", "again.svg"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(std::fs::read_to_string(dir.path().join("again.svg")).unwrap().contains("L1 error"));
}

#[test]
fn sweep_rejects_bad_epsilons() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sine.toml", SINE);
    let out = ddlab(&["sweep", cfg.to_str().unwrap(), "--theorem", "43", "--epsilons", "0.1,0.2,0.05"], dir.path());
    assert_eq!(code(&out), 2);
    let out = ddlab(&["sweep", cfg.to_str().unwrap(), "--theorem", "free", "--epsilons", "0.1,0.05,0.02"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn reference_writes_entropy_solution() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
final_time = 0.5
epsilon = 0.0
delta = 0.0
godunov_fallback = true
[flux]
kind = "burgers"
[viscosity]
kind = "linear"
[initial]
kind = "riemann"
u_l = 1.0
u_r = 0.0
[domain]
x_left = -1.0
x_right = 1.0
cells = 200
"#;
    let cfg = write_config(dir.path(), "riemann.toml", body);
    let out = ddlab(&["reference", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("x,u\n"));
    let values: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let (x, u) = l.split_once(',').unwrap();
            (x.parse().unwrap(), u.parse().unwrap())
        })
        .collect();
    assert!(values.len() >= 200);
    // Shock at x = t/2 = 0.25.
    assert!(values.iter().filter(|(x, _)| *x > 0.0 && *x < 0.2).all(|(_, u)| (u - 1.0).abs() < 1e-12));
    assert!(values.iter().filter(|(x, _)| *x > 0.3).all(|(_, u)| u.abs() < 1e-12));
}

#[test]
fn verify_assumptions_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = SINE.replace("kind = \"burgers\"", "kind = \"power\"\nm = 2.0");
    let cfg = write_config(dir.path(), "good.toml", &good);
    let out = ddlab(&["verify-assumptions", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));

    let bad = SINE.replace("kind = \"von_neumann\"", "kind = \"linear\"\n[viscosity.constants]\nr = 1.0");
    let cfg = write_config(dir.path(), "bad.toml", &bad);
    let out = ddlab(&["verify-assumptions", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8(out.stdout).unwrap().contains("FAIL"));
}
