use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use mpsoliton::config::RunConfig;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mpsoliton"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = repo_root().join("docs/schemas").join(name);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(validator: &jsonschema::Validator, path: &Path) {
    let instance: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(&instance)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{}: {errors:?}", path.display());
}

/// Coarse canonical config written into a fresh directory.
fn small_config(dir: &Path) -> PathBuf {
    let mut config = RunConfig::canonical();
    config.grid.nodes = 256;
    config.epsilons = vec![0.5, 0.25];
    config.output_dir = dir.join("out");
    let path = dir.join("run.toml");
    std::fs::write(&path, config.to_toml_string().unwrap()).unwrap();
    path
}

/// One coarse sweep shared by the artifact tests.
fn swept() -> &'static (TempDir, Output) {
    static SWEPT: OnceLock<(TempDir, Output)> = OnceLock::new();
    SWEPT.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path());
        let out = run(&["sweep", "--config", config.to_str().unwrap()]);
        (dir, out)
    })
}

#[test]
fn classify_canonical() {
    let out = run(&["classify"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(text(&out.stdout).trim(), "supercritical, 22*=12");
}

#[test]
fn classify_subcritical_power() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::canonical();
    config.problem.nonlinearity = mpsoliton::config::NonlinearityConfig::Power { p: 3.0 };
    let path = dir.path().join("p3.toml");
    std::fs::write(&path, config.to_toml_string().unwrap()).unwrap();
    let out = run(&["classify", "--config", path.to_str().unwrap()]);
    assert_eq!(text(&out.stdout).trim(), "subcritical, 22*=12");
}

#[test]
fn config_subcommand_matches_shipped_file() {
    let out = run(&["config"]);
    assert_eq!(out.status.code(), Some(0));
    let shipped = std::fs::read_to_string(repo_root().join("configs/canonical.toml")).unwrap();
    assert_eq!(text(&out.stdout), shipped);
    assert_eq!(
        RunConfig::from_toml_str(&shipped).unwrap(),
        RunConfig::canonical()
    );
}

#[test]
fn invalid_k_exits_one_with_validator_message() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::canonical();
    config.problem.k = 2.0;
    config.output_dir = dir.path().join("out");
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, config.to_toml_string().unwrap()).unwrap();
    let out = run(&[
        "solve",
        "--config",
        path.to_str().unwrap(),
        "--epsilon",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("k"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(run(&["solve", "--epsilon"]).status.code(), Some(64));
    assert_eq!(run(&["nonsense"]).status.code(), Some(64));
    assert_eq!(run(&[]).status.code(), Some(64));
}

#[test]
fn missing_files_name_the_path() {
    let out = run(&["verify", "/nonexistent/profile_eps0.1.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("/nonexistent/profile_eps0.1.csv"));
    let out = run(&["sweep", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("/nonexistent/run.toml"));
}

#[test]
fn sweep_writes_schema_valid_artifacts() {
    let (dir, out) = swept();
    let code = out.status.code().unwrap();
    assert!(code == 0 || code == 2, "{}", text(&out.stderr));
    let dir = dir.path().join("out");
    let report_schema = schema("run_report.schema.json");
    for eps in ["0.5", "0.25"] {
        assert!(dir.join(format!("profile_eps{eps}.csv")).exists());
        assert_valid(&report_schema, &dir.join(format!("report_eps{eps}.json")));
    }
    assert_valid(
        &schema("sweep_summary.schema.json"),
        &dir.join("sweep_summary.json"),
    );
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("sweep_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["entries"].as_array().unwrap().len(), 2);
    assert_eq!(summary["parallel"], Value::Bool(false));
}

#[test]
fn verify_accepts_stored_profile_and_writes_diagnostics() {
    let (dir, _) = swept();
    let work = tempfile::tempdir().unwrap();
    let config = small_config(work.path());
    let profile = dir.path().join("out/profile_eps0.25.csv");
    let out = run(&[
        "verify",
        profile.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        work.path().to_str().unwrap(),
    ]);
    let stdout = text(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}{}", text(&out.stderr));
    for check in [
        "profile_consistency",
        "decay",
        "boundedness",
        "compare_J_H",
        "geometry",
        "reported_residual",
    ] {
        assert!(stdout.contains(&format!("pass {check}")), "{stdout}");
    }
    assert_valid(
        &schema("diagnostics.schema.json"),
        &work.path().join("diagnostics.json"),
    );
}

#[test]
fn verify_rejects_tampered_edge_value() {
    let (dir, _) = swept();
    let work = tempfile::tempdir().unwrap();
    let config = small_config(work.path());
    let original = std::fs::read_to_string(dir.path().join("out/profile_eps0.25.csv")).unwrap();
    let mut lines: Vec<String> = original.lines().map(String::from).collect();
    let last = lines.last_mut().unwrap();
    let mut cols: Vec<String> = last.split(',').map(String::from).collect();
    cols[2] = "1.00000000000e-1".into();
    *last = cols.join(",");
    let tampered = work.path().join("profile_eps0.25.csv");
    std::fs::write(&tampered, lines.join("\n") + "\n").unwrap();
    let out = run(&[
        "verify",
        tampered.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    let stdout = text(&out.stdout);
    assert_ne!(out.status.code(), Some(0));
    assert!(stdout.contains("FAIL decay"), "{stdout}");
    assert_valid(
        &schema("diagnostics.schema.json"),
        &work.path().join("diagnostics.json"),
    );
}

#[test]
fn solve_writes_artifacts_and_reports_status() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--epsilon",
        "0.25",
    ]);
    let code = out.status.code().unwrap();
    let report: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/report_eps0.25.json")).unwrap(),
    )
    .unwrap();
    let expected = if report["status"] == "certified" {
        0
    } else {
        2
    };
    assert_eq!(code, expected, "{}", text(&out.stdout));
    assert!(text(&out.stdout).starts_with("eps=0.25 status="));
    assert_eq!(report["report"]["epsilon"], 0.25);
}
