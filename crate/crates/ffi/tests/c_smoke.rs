//! Compiles a small C program against the generated header and the static
//! library. Skipped when no C compiler is on the PATH.

use std::path::{Path, PathBuf};
use std::process::Command;

/// Builds the static library with the profile this test runs under, since
/// `cargo test` does not refresh the uplifted archive.
fn static_lib() -> Option<PathBuf> {
    // target/<profile>/deps/c_smoke-* -> target/<profile>
    let profile_dir = std::env::current_exe().ok()?.parent()?.parent()?.to_path_buf();
    let target_dir = profile_dir.parent()?;
    let cargo = std::env::var("CARGO").ok()?;
    let mut cmd = Command::new(cargo);
    cmd.args(["build", "-p", "arraymp-ffi", "--lib", "--target-dir"]).arg(target_dir);
    if profile_dir.file_name()? == "release" {
        cmd.arg("--release");
    }
    assert!(cmd.status().ok()?.success(), "building the static library failed");
    let lib = profile_dir.join("libarraymp_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn c_program_links_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler, skipping");
        return;
    }
    let Some(lib) = static_lib() else {
        eprintln!("static library not built, skipping");
        return;
    };
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.trim(), format!("arraymp {}", env!("CARGO_PKG_VERSION")));
}
