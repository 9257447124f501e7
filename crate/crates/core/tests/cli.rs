use std::process::Command;

use ewcheck::cli;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(std::iter::once("ewcheck").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn verdicts_map_to_exit_codes() {
    assert_eq!(run(&["check-ew", "--catalog", "dkp"]).0, cli::EXIT_PASS);
    assert_eq!(run(&["check-flat", "--catalog", "dkp"]).0, cli::EXIT_FAIL);
    assert_eq!(run(&["check-flat", "--catalog", "linear-wave"]).0, cli::EXIT_PASS);
    assert_eq!(run(&["check-lax", "--catalog", "dkp"]).0, cli::EXIT_PASS);
}

#[test]
fn input_errors_exit_with_two() {
    let (code, _, err) = run(&["check-ew", "--catalog", "no-such-entry"]);
    assert_eq!(code, cli::EXIT_INPUT);
    assert!(err.starts_with("error:"));
    assert_eq!(run(&["check-ew"]).0, cli::EXIT_INPUT);
    assert_eq!(run(&["frobnicate"]).0, cli::EXIT_INPUT);
    assert_eq!(run(&["check-ew", "--catalog", "dkp", "--representative", "sideways"]).0, cli::EXIT_INPUT);

    let dir = std::env::temp_dir().join(format!("ewcheck-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.ewd");
    std::fs::write(&bad, "name: broken\nequation:\n    u_tt = u_xx +\n").unwrap();
    let (code, _, err) = run(&["check-ew", "--input", bad.to_str().unwrap()]);
    assert_eq!(code, cli::EXIT_INPUT);
    assert!(err.contains("line 3"), "{err}");
    assert_eq!(run(&["check-ew", "--input", dir.join("missing.ewd").to_str().unwrap()]).0, cli::EXIT_INPUT);
}

#[test]
fn size_cap_exits_with_three() {
    assert_eq!(run(&["check-ew", "--catalog", "dkp", "--max-size", "2"]).0, cli::EXIT_LIMIT);
}

#[test]
fn catalog_documents_round_trip_through_input_files() {
    let dir = std::env::temp_dir().join(format!("ewcheck-cli-rt-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("dkp.ewd");
    std::fs::write(&path, ewcheck::catalog::source("dkp").unwrap()).unwrap();
    let from_file = run(&["check-ew", "--input", path.to_str().unwrap(), "--json"]);
    let from_catalog = run(&["check-ew", "--catalog", "dkp", "--json"]);
    assert_eq!(from_file, from_catalog);
}

#[test]
fn json_is_byte_stable() {
    let a = run(&["check-flat", "--catalog", "minimal-hypersurface", "--json"]);
    let b = run(&["check-flat", "--catalog", "minimal-hypersurface", "--json"]);
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a.1).unwrap();
    assert_eq!(v["command"], "check-flat");
    assert_eq!(v["checks"][0]["verdict"], "fail");
}

#[test]
fn catalog_commands() {
    let (code, out, _) = run(&["catalog-list", "--json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["catalog"].as_array().unwrap().len(), ewcheck::catalog::list().len());

    let (code, out, _) = run(&["catalog-run", "dkp", "linear-wave"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("expectations met"));
}

#[test]
fn numeric_command_writes_csv() {
    let dir = std::env::temp_dir().join(format!("ewcheck-cli-num-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("res.csv");
    let (code, out, err) = run(&[
        "numeric",
        "--catalog",
        "dkp",
        "--solution",
        "1",
        "--mode",
        "ew",
        "--grid",
        "1:2:9",
        "--csv",
        csv.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(code, 0, "{out}{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["numeric"]["vanishes"], true);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("x,y,t,residual"));
    assert_eq!(text.lines().count(), 1 + 5 * 5 * 5);

    // A solution index past the end is an input error.
    assert_eq!(run(&["numeric", "--catalog", "dkp", "--solution", "9"]).0, cli::EXIT_INPUT);
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_ewcheck");
    let pass = Command::new(bin).args(["check-ew", "--catalog", "dkp"]).output().unwrap();
    assert_eq!(pass.status.code(), Some(0));
    let fail = Command::new(bin).args(["check-flat", "--catalog", "dkp"]).output().unwrap();
    assert_eq!(fail.status.code(), Some(1));
    let bad = Command::new(bin).args(["check-flat"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
