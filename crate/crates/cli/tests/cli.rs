use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polyshape"))
}

fn scratch(name: &str) -> PathBuf {
    let p = std::env::temp_dir().join(format!("polyshape-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&p);
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

const COARSE: &str = "seed = 4
[mesh]
hmax = 0.05
grading = 0.5
levels = 4
[verify]
refinements = 1
forward_levels = [0.08, 0.04]
basis_modes = 6
deltas = [0.2, 0.1]
";

#[test]
fn gamma_prints_the_right_angle_root() {
    let o = run(&["gamma", "--alpha", "1.5707963", "--k", "2"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha,k,gamma1,gamma2"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((row[2] - 0.8934).abs() < 1e-4, "{row:?}");
    assert!((row[2] + row[3] - 2.0).abs() < 1e-9);
}

#[test]
fn gamma_without_contrast_is_a_usage_error() {
    assert_eq!(run(&["gamma", "--alpha", "1.0"]).status.code(), Some(2));
    assert_eq!(run(&["gamma", "--alpha", "1.0", "--k", "-1"]).status.code(), Some(2));
}

#[test]
fn missing_config_exits_2_without_outputs() {
    let out = scratch("missing");
    let o = run(&["--config", "/definitely/not/here.toml", "--out", out.to_str().unwrap(), "verify"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = scratch("unknown");
    let cfg = write_config(&dir, "seed = 1\nmesh_size = 0.1\n");
    let out = dir.join("out");
    let o = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "forward"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
}

#[test]
fn forward_writes_traces_and_plot() {
    let dir = scratch("forward");
    let cfg = write_config(&dir, &format!("{COARSE}[current]\nmodes = [\"cos1\", \"sin2\"]\n"));
    let out = dir.join("out");
    let o = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--svg", "forward"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trace_cos1.csv", "trace_sin2.csv", "traces.svg"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("trace_cos1.csv")).unwrap();
    assert!(csv.starts_with("arc_length,value\n"));
}

#[test]
fn run_dispatches_on_experiment() {
    let dir = scratch("experiment");
    let cfg = write_config(&dir, &format!("experiment = \"corner-fit\"\n{COARSE}"));
    let out = dir.join("out");
    let o = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "run"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("corner_fit.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn verify_reports_are_byte_identical() {
    let dir = scratch("determinism");
    let cfg = write_config(&dir, COARSE);
    let mut reports = Vec::new();
    let mut codes = Vec::new();
    for (run_id, threads) in [("a", "1"), ("b", "2")] {
        let out = dir.join(run_id);
        let o = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads, "verify"]);
        codes.push(o.status.code());
        reports.push(std::fs::read(out.join("report.txt")).unwrap());
    }
    assert!(codes.iter().all(|c| matches!(c, Some(0) | Some(1))), "{codes:?}");
    assert_eq!(codes[0], codes[1]);
    assert_eq!(reports[0], reports[1]);
}
