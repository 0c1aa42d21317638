use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dpo-bcd"))
}

fn run(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_build_solve_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("prices.csv");
    let model = dir.path().join("model.txt");
    let solution = dir.path().join("solution.json");
    let trace = dir.path().join("trace.jsonl");

    run(bin().args(["synth", "--out", path(&prices)]));
    let text = fs::read_to_string(&prices).unwrap();
    assert_eq!(text.lines().count(), 530);

    run(bin().args(["build", "--prices", path(&prices), "--n-t", "2", "--n-r", "2", "--budget", "6", "--out", path(&model)]));
    assert!(fs::read_to_string(&model).unwrap().starts_with("dpo-bcd-model 1\n"));

    run(bin().args([
        "solve", "--model", path(&model), "--backend", "exhaustive", "--strategy", "Block-FP",
        "--out", path(&solution), "--trace", path(&trace),
    ]));
    let sol: serde_json::Value = serde_json::from_str(&fs::read_to_string(&solution).unwrap()).unwrap();
    assert_eq!(sol["assignment"].as_str().unwrap().len(), 24);
    assert_eq!(fs::read_to_string(&trace).unwrap().lines().count(), 6);

    let report = run(bin().args([
        "evaluate", "--solution", path(&solution), "--prices", path(&prices),
        "--n-t", "2", "--n-r", "2", "--budget", "6",
    ]));
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["feasibility"]["feasible"], true);
    assert_eq!(report["performance"]["net_returns"].as_array().unwrap().len(), 2);
}

#[test]
fn matrix_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run(bin().args(["matrix", "--seed", "5", "--out", path(out)]));
    }
    for file in ["summary.json", "summary.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap());
    }
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 9);
    assert!(a.join("logs/timings.csv").exists());
}

#[test]
fn bad_inputs_are_reported() {
    let out = bin().args(["solve", "--model", "/nonexistent", "--out", "/tmp/x.json"]).output().unwrap();
    assert!(!out.status.success());
    let out = bin().args(["matrix", "--backends", "sa", "--strategies", "sideways", "--out", "/tmp/x"]).output().unwrap();
    assert!(!out.status.success());
}
