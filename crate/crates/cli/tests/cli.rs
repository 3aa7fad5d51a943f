use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_stable-op-lab"));
    c.env_remove("STABLE_OP_LAB_THREADS");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn check_files(dir: &Path, m: &Value) {
    let files = m["files"].as_array().unwrap();
    assert!(!files.is_empty());
    for f in files {
        let bytes = fs::read(dir.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex(&bytes));
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
}

#[test]
fn verify_all_passes_with_defaults() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("verify");
    let o = run(&["verify", "--suite", "all", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "stderr: {}\nstdout: {}", stderr(&o), String::from_utf8_lossy(&o.stdout));
    let m = manifest(&out);
    assert_eq!(m["subcommand"], "verify");
    assert_eq!(m["passed"], true);
    let verdicts = m["verdicts"].as_array().unwrap();
    assert!(verdicts.len() >= 5, "{} verdicts", verdicts.len());
    assert!(verdicts.iter().all(|v| v["passed"] == true));
    for name in ["barriers", "liouville", "halfspace", "counterexample-interior", "counterexample-boundary"] {
        assert!(out.join(name).join("verdict.json").is_file(), "{name}/verdict.json missing");
    }
    check_files(&out, &m);
}

#[test]
fn malformed_operator_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let op = tmp.path().join("op.json");
    fs::write(&op, r#"{"s": 0.5, "dim": 2, "canonical": "axis_sum", "weights": [1, 2]}"#).unwrap();
    let out = tmp.path().join("out");
    let o = run(&["symbol", "--op", op.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("config error"), "{err}");
    assert!(err.contains("weights"), "{err}");
    assert!(!out.join("manifest.json").exists());

    fs::write(&op, r#"{"s": 1.5, "dim": 1, "canonical": "fractional_laplacian"}"#).unwrap();
    let o = run(&["symbol", "--op", op.to_str().unwrap(), "--out", tmp.path().join("out2").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("s = 1.5"), "{}", stderr(&o));
}

#[test]
fn degenerate_measure_is_rejected_by_solve() {
    let tmp = TempDir::new().unwrap();
    let problem = tmp.path().join("problem.json");
    fs::write(
        &problem,
        r#"{
  "operator": {"s": 0.5, "dim": 2, "measure": {"kind": "atomic", "atoms": [{"theta": [1, 0], "w": 1}]}},
  "domain": {"kind": "ball", "center": [0, 0], "radius": 1},
  "f": {"kind": "constant", "value": 1},
  "h": 0.1
}"#,
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = run(&["solve", "--problem", problem.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("degenerate"), "{}", stderr(&o));
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn heat_kernel_one_dimensional_artifacts() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("hk");
    let op = configs().join("op_fractional_1d.json");
    let o = run(&["heat-kernel", "--op", op.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("p.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,value"));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!((report["mass"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    let m = manifest(&out);
    assert_eq!(m["subcommand"], "heat-kernel");
    assert!(m["error_bounds"]["heat_kernel.tail_bound"].is_number());
    check_files(&out, &m);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let op = configs().join("op_atoms_2d.json");
    let dirs: Vec<PathBuf> = (0..2).map(|k| tmp.path().join(format!("run{k}"))).collect();
    for d in &dirs {
        let o = run(&["symbol", "--op", op.to_str().unwrap(), "--seed", "7", "--out", d.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for name in ["symbol.csv", "report.json"] {
        assert_eq!(fs::read(dirs[0].join(name)).unwrap(), fs::read(dirs[1].join(name)).unwrap(), "{name}");
    }
    let (a, b) = (manifest(&dirs[0]), manifest(&dirs[1]));
    assert_eq!(a["files"], b["files"]);
    assert_eq!(a["config_sha256"], b["config_sha256"]);
}

#[test]
fn solve_and_measure_round_trip() {
    let tmp = TempDir::new().unwrap();
    let solved = tmp.path().join("solve");
    let problem = configs().join("problem_getoor_1d.json");
    let o = run(&["solve", "--problem", problem.to_str().unwrap(), "--out", solved.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = manifest(&solved);
    assert!(m["verdicts"].as_array().unwrap().iter().any(|v| v["name"] == "residual"));

    let measured = tmp.path().join("measure");
    let u = solved.join("u.csv");
    let o = run(&[
        "measure", "--field", u.to_str().unwrap(), "--mode", "coefficient", "--z", "-1", "--nu", "1", "--s", "0.5",
        "--out", measured.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: Value = serde_json::from_str(&fs::read_to_string(measured.join("report.json")).unwrap()).unwrap();
    assert!(report["q"].as_f64().unwrap().is_finite());
    check_files(&measured, &manifest(&measured));
}

#[test]
fn non_empty_output_directory_is_refused() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("keep.txt"), "x").unwrap();
    let op = configs().join("op_axis_2d.json");
    let o = run(&["symbol", "--op", op.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("not empty"), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(tmp.path().join("keep.txt")).unwrap(), "x");
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&run(&["measure", "--no-such-flag"])), 1);
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["--version"])), 0);
    let op = configs().join("op_axis_2d.json");
    let tmp = TempDir::new().unwrap();
    let o = run(&["heat-checks", "--op", op.to_str().unwrap(), "--tol=0", "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("positive"), "{}", stderr(&o));
}

#[test]
fn invalid_thread_count_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let op = configs().join("op_axis_2d.json");
    let o = bin()
        .env("STABLE_OP_LAB_THREADS", "zero")
        .args(["symbol", "--op", op.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("STABLE_OP_LAB_THREADS"));
}
