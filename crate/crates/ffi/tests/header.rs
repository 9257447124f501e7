//! The generated header must expose the API and work from C.

use std::path::{Path, PathBuf};
use std::process::Command;

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(crate_dir().join("include/ewcheck.h")).unwrap();
    for f in [
        "ew_problem_parse",
        "ew_problem_from_catalog",
        "ew_check",
        "ew_report_verdict",
        "ew_report_json",
        "ew_last_error",
        "ew_string_free",
        "typedef struct EwProblem EwProblem",
        "EW_STATUS_LIMIT = 6",
    ] {
        assert!(h.contains(f), "header lacks {f}");
    }
}

/// Directory holding the cdylib built alongside this test binary.
fn lib_dir() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let dir = exe.parent()?.parent()?.to_path_buf();
    dir.join("libewcheck_ffi.so").exists().then_some(dir)
}

fn have(tool: &str) -> bool {
    Command::new(tool).arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn c_program_links_and_runs() {
    let Some(lib) = lib_dir() else {
        eprintln!("shared library not found next to the test binary; skipping");
        return;
    };
    if !have("cc") {
        eprintln!("no C compiler; skipping");
        return;
    }
    let out = std::env::temp_dir().join(format!("ewcheck-smoke-{}", std::process::id()));
    let dir = crate_dir();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg(dir.join("tests/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg("-L")
        .arg(&lib)
        .arg("-lewcheck_ffi")
        .arg("-o")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&out).env("LD_LIBRARY_PATH", Path::new(&lib)).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert_eq!(stdout.trim(), format!("{} 0 1", env!("CARGO_PKG_VERSION")));
}
