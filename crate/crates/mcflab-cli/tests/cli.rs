//! End-to-end runs of the installed binary: every subcommand, the file
//! formats they exchange, and the three exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mcflab"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("mcflab-cli-tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output {
        status,
        stdout,
        stderr,
    } = cmd.output().unwrap();
    (
        status.code().unwrap(),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

fn flow_circle(dir: &Path) -> PathBuf {
    let out = dir.join("flow.jsonl");
    let (code, stdout, stderr) = run(bin().args([
        "flow",
        "--shape",
        "circle",
        "--flow-m",
        "64",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("T_hat = 0.50000000"), "{stdout}");
    out
}

fn rescale(dir: &Path, traj: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut cmd = bin();
    cmd.args([
        "rescale",
        "--traj",
        traj.to_str().unwrap(),
        "--sphere-m",
        "32",
        "--out",
        out.to_str().unwrap(),
    ]);
    cmd.args(extra);
    let (code, _, stderr) = run(&mut cmd);
    assert_eq!(code, 0, "{stderr}");
    out
}

#[test]
fn spectrum_prints_the_eigenvalue_table() {
    let (code, stdout, _) = run(bin().args(["spectrum", "--l-max", "4"]));
    assert_eq!(code, 0);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(
        lines,
        [
            "l,nu,lambda",
            "0,0,-1",
            "1,0.5,-0.5",
            "2,2,1",
            "3,4.5,3.5",
            "4,8,7"
        ]
    );
}

#[test]
fn flow_rescale_verify_chain_certifies_the_circle() {
    let dir = scratch("chain");
    let traj = flow_circle(&dir);
    let graph = rescale(&dir, &traj, "graph.jsonl", &[]);
    let reports = dir.join("reports");
    let (code, _, stderr) = run(bin().args([
        "verify",
        "certificate",
        "--graph",
        graph.to_str().unwrap(),
        "--out-dir",
        reports.to_str().unwrap(),
    ]));
    assert_eq!(code, 0, "{stderr}");
    assert!(stderr.contains("rigid"), "{stderr}");
    assert!(reports.join("certificate.json").exists());
}

#[test]
fn verify_exit_code_flags_a_failing_check() {
    let dir = scratch("verify-fail");
    let traj = flow_circle(&dir);
    let graph = rescale(&dir, &traj, "bad.jsonl", &["--delta-t", "0.05"]);
    // the identity holds on mis-gauged runs too; force a failure by
    // demanding a tolerance below the quadrature error
    let (code, _, stderr) = run(bin().args([
        "verify",
        "duhamel",
        "--graph",
        graph.to_str().unwrap(),
        "--tol",
        "1e-9",
        "--out-dir",
        dir.join("reports").to_str().unwrap(),
    ]));
    assert_eq!(code, 1, "{stderr}");
    assert!(stderr.contains("fail"), "{stderr}");
}

#[test]
fn rescale_exact_gauge_requires_a_circle() {
    let dir = scratch("exact-gauge");
    let traj = dir.join("ellipse.jsonl");
    let (code, _, stderr) = run(bin().args([
        "flow",
        "--shape",
        "ellipse",
        "--flow-m",
        "64",
        "--out",
        traj.to_str().unwrap(),
    ]));
    assert_eq!(code, 0, "{stderr}");
    let (code, _, stderr) = run(bin().args([
        "rescale",
        "--traj",
        traj.to_str().unwrap(),
        "--gauge",
        "exact",
        "--out",
        dir.join("graph.jsonl").to_str().unwrap(),
    ]));
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("exact gauge"), "{stderr}");
}

#[test]
fn arrival_writes_field_and_header() {
    let dir = scratch("arrival");
    let csv = dir.join("t.csv");
    let header = dir.join("t.json");
    let (code, stdout, stderr) = run(bin().args([
        "arrival",
        "--shape",
        "circle",
        "--flow-m",
        "96",
        "--n",
        "48",
        "--out-csv",
        csv.to_str().unwrap(),
        "--out-header",
        header.to_str().unwrap(),
    ]));
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("T_hat"), "{stdout}");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("x,y,t\n"));
    let meta: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(&header).unwrap()).unwrap();
    assert_eq!(meta["nx"], 48);
    let t_hat = meta["T_hat"].as_f64().unwrap();
    assert!((t_hat - 0.5).abs() < 2e-2, "t_hat = {t_hat}");
}

#[test]
fn pipeline_runs_from_a_config_file() {
    let dir = scratch("pipe-config");
    let out = dir.join("out");
    let config = dir.join("config.toml");
    std::fs::write(
        &config,
        format!(
            r#"
seed = 3
checks = ["certificate"]
output_dir = "{}"

[shape]
kind = "circle"
radius = 1.0

[grid]
flow_m = 64
sphere_m = 32
"#,
            out.display()
        ),
    )
    .unwrap();
    let (code, stdout, stderr) = run(bin().args(["pipeline", "--config", config.to_str().unwrap()]));
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("verdict: rigid"), "{stdout}");
    for name in [
        "config.toml",
        "flow.jsonl",
        "graph.jsonl",
        "decay.csv",
        "summary.csv",
        "manifest.json",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }
    let manifest: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(out.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest
        .as_object()
        .unwrap()
        .contains_key("reports/certificate.json"));
}

#[test]
fn pipeline_missing_config_is_a_usage_error() {
    let dir = scratch("pipe-missing");
    let (code, _, stderr) = run(bin().args([
        "pipeline",
        "--config",
        dir.join("nope.toml").to_str().unwrap(),
    ]));
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.starts_with("error:"), "{stderr}");
}

#[test]
fn pipeline_inline_needs_shape_and_output_dir() {
    let (code, _, stderr) = run(bin().arg("pipeline"));
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("--config or --shape"), "{stderr}");

    let (code, _, stderr) = run(bin().args(["pipeline", "--shape", "circle"]));
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("--output-dir"), "{stderr}");
}

#[test]
fn verify_unknown_check_is_a_usage_error() {
    let (code, _, stderr) = run(bin().args(["verify", "nonsense", "--graph", "missing.jsonl"]));
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.starts_with("error:"), "{stderr}");
}

#[test]
fn sweep_tabulates_one_row_per_seed() {
    let dir = scratch("sweep");
    let runs = dir.join("runs");
    let config = dir.join("base.toml");
    std::fs::write(
        &config,
        format!(
            r#"
checks = ["certificate"]
output_dir = "{}"

[shape]
kind = "perturbed-circle"
radius = 1.0
amplitude = 0.05
max_mode = 6

[grid]
flow_m = 64
sphere_m = 32
"#,
            runs.display()
        ),
    )
    .unwrap();
    let table = dir.join("sweep.csv");
    let (code, _, stderr) = run(bin().args([
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--seeds",
        "3",
        "--out",
        table.to_str().unwrap(),
    ]));
    assert_eq!(code, 0, "{stderr}");
    let text = std::fs::read_to_string(&table).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "label,shape,seed,rate,verdict,min_margin,error");
    assert_eq!(lines.len(), 4);
    for (i, line) in lines[1..].iter().enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 7, "{line}");
        assert_eq!(cols[0], format!("perturbed-circle-seed{i}"));
        assert_eq!(cols[2], i.to_string());
        assert!(cols[4] == "rigid" || cols[4] == "quantized", "{line}");
        assert_eq!(cols[6], "", "failed row: {line}");
    }
    for i in 0..3 {
        assert!(runs.join(format!("seed-{i:04}")).join("manifest.json").exists());
    }
}
