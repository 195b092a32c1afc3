use std::path::{Path, PathBuf};
use std::process::Command;

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/rydweak.h")
}

#[test]
fn header_declares_public_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for sym in [
        "typedef struct RwMedium RwMedium",
        "typedef struct RwConfig RwConfig",
        "RW_STATUS_OK = 0",
        "RW_STATUS_CONFIG_VALIDATION = 12",
        "rw_medium_new",
        "rw_susceptibility",
        "rw_pointer_readout",
        "rw_run",
        "rw_last_error_message",
    ] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
}

// Integration tests only get the rlib, so build the static library into a
// separate target dir to avoid contending for the outer build lock.
fn static_lib() -> Option<PathBuf> {
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let target = root.join("../../target/c-link-test");
    let status = Command::new(cargo)
        .args(["build", "-q", "-p", "rydweak-ffi", "--lib", "--target-dir"])
        .arg(&target)
        .current_dir(root)
        .status()
        .ok()?;
    let lib = target.join("debug/librydweak_ffi.a");
    (status.success() && lib.exists()).then_some(lib)
}

#[test]
fn c_program_links_and_runs() {
    let Some(lib) = static_lib() else {
        eprintln!("static library not built; skipping");
        return;
    };
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "rydweak.h"
int main(void) {
    RwMedium *m = NULL;
    double re = 0, im = 0;
    if (rw_medium_new(true, &m) != RW_STATUS_OK) return 1;
    if (rw_susceptibility(m, 0.0, &re, &im) != RW_STATUS_OK) return 2;
    rw_medium_free(m);
    if (!(im > 0)) return 3;
    RwPointerReadout r;
    if (rw_pointer_readout(1e-3, 0.0, 0.7853981633974483, 8.0, 1.2e-3, &r) != RW_STATUS_OK) return 4;
    double x;
    if (rw_photon_shot_noise(-1.0, &x) != RW_STATUS_INVALID_ARGUMENT) return 5;
    char buf[256];
    if (rw_last_error_message(buf, sizeof buf) == 0) return 6;
    printf("%s %.6e\n", rw_version(), r.centroid);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "C smoke exited with {:?}",
        out.status.code()
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with(env!("CARGO_PKG_VERSION")));
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc);
        }
    }
    Err(())
}
