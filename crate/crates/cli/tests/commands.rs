use std::fs;
use std::path::Path;
use std::process::Command as Process;

use vfd_cli::{config_hash, parse_config, run, Command, RunError, RunOptions};

const SMALL: &str = "\
m = -0.5
mu = 1.0

[domain]
R_list = [5.0, 10.0]
h = 0.1
dt = 4e-3

[window]
L = 2.0
a = 0.1
b = 0.5
x_probes = 21
";

fn run_in(dir: &Path, text: &str, command: Command, dump_kernels: bool) -> vfd_cli::Manifest {
    let cfg = parse_config(text, command).unwrap();
    let options = RunOptions {
        out_dir: dir.to_path_buf(),
        dump_kernels,
    };
    run(&cfg, text, &options).unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn converge_writes_artifacts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = run_in(dir.path(), SMALL, Command::Converge, false);
    for f in [
        "report.json",
        "dk.csv",
        "mass.csv",
        "slope.csv",
        "manifest.json",
    ] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
        assert!(manifest.files.iter().any(|g| g == f));
    }
    let written = read_json(&dir.path().join("manifest.json"));
    assert_eq!(written["command"], "converge");
    assert_eq!(written["config_hash"], config_hash(SMALL));
    assert_eq!(written["passed"], manifest.passed);
    assert_eq!(manifest.exit_code(), if manifest.passed { 0 } else { 1 });
    let failures = written["failures"].as_array().unwrap();
    assert_eq!(failures.is_empty(), manifest.passed);
    let dk = fs::read_to_string(dir.path().join("dk.csv")).unwrap();
    assert_eq!(dk.lines().next(), Some("k,R,d_k"));
    assert_eq!(dk.lines().count(), 2);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_in(a.path(), SMALL, Command::Compare, false);
    run_in(b.path(), SMALL, Command::Compare, false);
    for f in ["dk.csv", "mass.csv", "report.json", "manifest.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn green_check_dumps_kernels_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let text = "m = -0.5\n[green]\ncells = [16, 32, 64]\ntriples = 20\n";
    let manifest = run_in(dir.path(), text, Command::GreenCheck, true);
    assert!(manifest.passed, "{:?}", manifest.failures);
    let kernels = fs::read_to_string(dir.path().join("kernels.csv")).unwrap();
    assert_eq!(kernels.lines().next(), Some("x,y,G"));
    assert_eq!(kernels.lines().count(), 1 + 17 * 17);
    let green = fs::read_to_string(dir.path().join("green.csv")).unwrap();
    assert_eq!(green.lines().count(), 4);
}

#[test]
fn solve_writes_trajectory_and_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let text = "m = -0.5\n[domain]\nR = 5.0\nh = 0.1\ndt = 4e-3\nt_end = 0.2\n";
    let manifest = run_in(dir.path(), text, Command::Solve, false);
    assert!(manifest.passed, "{:?}", manifest.failures);
    let ledger = fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
    assert!(ledger.starts_with("t,mass,flux_left,flux_right,ab_residual,newton_iters\n"));
    assert!(dir.path().join("trajectory.csv").is_file());
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = parse_config("m = -0.5\n", Command::Profile).unwrap();
    let options = RunOptions {
        out_dir: blocker.join("out"),
        dump_kernels: false,
    };
    let err = run(&cfg, "m = -0.5\n", &options).unwrap_err();
    assert!(matches!(err, RunError::Io { .. }));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_vfd");

    let good = dir.path().join("good.toml");
    fs::write(&good, "m = -0.5\n").unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let status = Process::new(exe)
        .args(["profile", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(blocker.join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "m = 0.5\n").unwrap();
    let status = Process::new(exe)
        .args(["profile", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("o1"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));

    let out = dir.path().join("o2");
    let output = Process::new(exe)
        .args(["profile", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(out.join("profile.csv").is_file());
    assert_eq!(read_json(&out.join("manifest.json"))["passed"], true);

    let missing = Process::new(exe)
        .args(["profile", "--config"])
        .arg(dir.path().join("nope.toml"))
        .status()
        .unwrap();
    assert_eq!(missing.code(), Some(2));
}
