use std::path::PathBuf;

use fim_harness::cli::main_with_args;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("fim-mimo").chain(args.iter().copied());
    let code = main_with_args(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_config(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fim-mimo-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const SMALL_SWEEP: &str = r#"
[experiment]
realizations = 6
schemes = ["FIM-WPA", "RAA-WPA"]

[sweep]
variable = "morphing_range"
values = [0.0, 0.25]
"#;

#[test]
fn run_without_config_is_a_config_error() {
    let (code, _, err) = run(&["run"]);
    assert_eq!(code, 1);
    assert!(err.contains("--config"));
}

#[test]
fn unreadable_or_invalid_config_exits_one() {
    assert_eq!(run(&["run", "--config", "/nonexistent/fim.toml"]).0, 1);
    let bad = write_config("bad.toml", "[arrays]\nshape = 2\n");
    assert_eq!(run(&["validate", "--config", bad.to_str().unwrap()]).0, 1);
}

#[test]
fn bad_flags_exit_one_and_help_exits_zero() {
    assert_eq!(run(&["run", "--format", "xml"]).0, 1);
    assert_eq!(run(&["frobnicate"]).0, 1);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("gradcheck"));
}

#[test]
fn gradcheck_reports_error_and_passes() {
    let (code, out, _) = run(&["gradcheck", "--realizations", "10"]);
    assert_eq!(code, 0, "{out}");
    let line = out.lines().find(|l| l.starts_with("max_rel_err=")).expect("max_rel_err line");
    let value: f64 = line.trim_start_matches("max_rel_err=").parse().unwrap();
    assert!(value <= 1e-5);
}

#[test]
fn validate_prints_config_hash() {
    let path = write_config("ok.toml", SMALL_SWEEP);
    let (code, out, _) = run(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.starts_with("ok config_hash="));
    assert_eq!(out.trim().len(), "ok config_hash=".len() + 64);
}

#[test]
fn demo_reports_all_schemes_and_dominance() {
    let (code, out, _) = run(&["demo", "--seed", "3"]);
    assert_eq!(code, 0, "{out}");
    for name in ["FIM-WPA", "FIM-EPA", "RAA-WPA", "RAA-EPA"] {
        assert!(out.contains(name));
    }
    assert!(out.contains("FIM-WPA >= RAA-WPA: ok"));
}

#[test]
fn run_writes_csv_and_json() {
    let path = write_config("sweep.toml", SMALL_SWEEP);
    let (code, csv, _) = run(&["run", "--config", path.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(code, 0);
    let mut lines = csv.lines();
    let meta: serde_json::Value = serde_json::from_str(lines.next().unwrap().strip_prefix('#').unwrap()).unwrap();
    assert_eq!(meta["realizations"], 6);
    assert!(lines.next().unwrap().starts_with("sweep_variable,sweep_value,scheme"));
    assert_eq!(lines.count(), 4);

    let out = std::env::temp_dir().join(format!("fim-mimo-cli-{}/out.json", std::process::id()));
    let (code, stdout, _) = run(&["run", "--config", path.to_str().unwrap(), "--format", "json", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(json["meta"]["seed"], 0);
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn zero_threads_is_rejected() {
    let path = write_config("threads.toml", SMALL_SWEEP);
    assert_eq!(run(&["run", "--config", path.to_str().unwrap(), "--threads", "0"]).0, 1);
}
