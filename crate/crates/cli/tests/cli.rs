use std::path::Path;
use std::process::Command;

fn reference() -> serde_json::Value {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/reference.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn run(cfg: &serde_json::Value, args: &[&str]) -> (i32, String, String, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_deepwell"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap(), dir)
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn solve_limit_writes_one_row_per_signature() {
    let (code, stdout, _, dir) = run(&reference(), &["solve-limit"]);
    assert_eq!(code, 0, "{stdout}");
    let table = rows(&dir.path().join("out/solutions.csv"));
    assert_eq!(table.len(), 5);
    assert_eq!(table[0][..3], ["config_hash", "signature", "status"]);
    let hash = &table[1][0];
    assert_eq!(hash.len(), 64);
    assert!(table[1..].iter().all(|r| &r[0] == hash && r[2] == "ok"));
    assert!(dir.path().join("out/summary.json").exists());
}

#[test]
fn continue_one_signature_writes_the_branch_table() {
    let (code, stdout, _, dir) = run(&reference(), &["continue", "--signature", "0,0", "--plots"]);
    assert_eq!(code, 0, "{stdout}");
    let table = rows(&dir.path().join("out/branch_0_0_pp.csv"));
    assert_eq!(
        table[0][..9],
        ["config_hash", "signature", "lambda", "residual", "dist_to_limit", "exterior_mass", "J", "iterations", "method"]
    );
    assert_eq!(table.len(), 12);
    assert!(!dir.path().join("out/branch_1_0_pp.csv").exists());
    assert!(dir.path().join("out/snapshots/0_0_pp/rung_00.csv").exists());
    assert!(dir.path().join("out/plots/profiles_0_0_pp.svg").exists());
}

#[test]
fn config_errors_exit_2_and_list_every_field() {
    let mut cfg = reference();
    cfg["nonlinearity"]["p"] = serde_json::json!(1.0);
    cfg["tolerances"]["tol_limit"] = serde_json::json!(0.0);
    cfg["signatures"] = serde_json::json!(["0"]);
    let (code, _, stderr, _) = run(&cfg, &["solve-limit"]);
    assert_eq!(code, 2);
    for key in ["nonlinearity.p", "tol_limit", "signatures[0]"] {
        assert!(stderr.contains(key), "{key} missing from {stderr}");
    }
}

#[test]
fn verify_writes_checks_and_reports_failures_in_the_exit_code() {
    let mut cfg = reference();
    cfg["signatures"] = serde_json::json!(["0,0"]);
    cfg["verify"] = serde_json::json!({ "samples": 5, "fields": 10 });
    let (code, stdout, _, dir) = run(&cfg, &["verify"]);
    let table = rows(&dir.path().join("out/checks.csv"));
    assert_eq!(table[0][..4], ["config_hash", "check", "subject", "lambda"]);
    let any_fail = table[1..].iter().any(|r| r[5] == "fail");
    assert_eq!(code, if any_fail { 1 } else { 0 }, "{stdout}");
}
