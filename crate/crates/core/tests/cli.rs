use std::process::Command;

fn gebo() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gebo"))
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = gebo()
        .args(["run", "--problem", "quad:2", "--method", "bo,bfgs", "--runs", "2", "--seed", "3", "--max-evals", "30"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(out.join("summary.csv").exists());
    assert!(out.join("runs.csv").exists());
    assert!(out.join("trace_bo_000.csv").exists());
    assert!(out.join("trace_bfgs_001.csv").exists());

    let report = gebo().arg("report").arg("--in").arg(&out).output().unwrap();
    assert!(report.status.success());
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("bfgs") && text.contains("quad:2"), "{text}");
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "[experiment]\nproblem = \"bowl:2\"\nruns = 1\nmethods = \"bfgs\"\n[qn]\nmax_evals = 15\n").unwrap();
    let out = dir.path().join("out");
    let status = gebo().arg("run").arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap().status;
    assert!(status.success());
    let rows = gebo::harness::read_trace_csv(&out.join("trace_bfgs_000.csv")).unwrap();
    assert!(rows.len() <= 15);
    assert!(!out.join("trace_bo_000.csv").exists());
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = gebo().args(["run", "--problem", "nope:3"]).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!bad.status.success());
    let empty = gebo().arg("report").arg("--in").arg(dir.path()).output().unwrap();
    assert!(!empty.status.success());
}
