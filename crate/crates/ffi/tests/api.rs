use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use slhjb_ffi::*;

fn last_error() -> String {
    let p = slhjb_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn solve(json: &str) -> (SlhjbStatus, *mut SlhjbSolution) {
    let c = CString::new(json).unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { slhjb_solve_json(c.as_ptr(), &mut out) };
    (status, out)
}

#[test]
fn solve_and_query() {
    let (status, h) = solve(r#"{"problem": "test1", "k": 0.2}"#);
    assert_eq!(status, SlhjbStatus::Ok);
    assert!(!h.is_null());
    let mut info = SlhjbInfo::default();
    assert_eq!(unsafe { slhjb_solution_info(h, &mut info) }, SlhjbStatus::Ok);
    assert_eq!((info.dim, info.controls, info.nodes), (2, 2, 121));
    assert_eq!(info.counts, [11, 11, 1]);
    assert!(info.converged && info.sweeps > 0);

    let mut values = vec![0.0; info.nodes];
    assert_eq!(
        unsafe { slhjb_solution_values(h, values.as_mut_ptr(), values.len()) },
        SlhjbStatus::Ok
    );
    // Node 60 is the origin, where the value is smallest.
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(values[60], min);

    let mut controls = vec![0.0; info.nodes * 2];
    assert_eq!(
        unsafe { slhjb_solution_controls(h, controls.as_mut_ptr(), controls.len()) },
        SlhjbStatus::Ok
    );
    assert_eq!(
        unsafe { slhjb_solution_controls(h, controls.as_mut_ptr(), 3) },
        SlhjbStatus::BufferSize
    );
    assert!(last_error().contains("expected 242"));

    let x = [0.6, 0.0];
    let mut u = [0.0; 2];
    assert_eq!(
        unsafe { slhjb_feedback(h, x.as_ptr(), 2, u.as_mut_ptr(), 2) },
        SlhjbStatus::Ok
    );
    assert!(u[0] < 0.0 && u[1].abs() < 1e-6, "{u:?}");
    assert_eq!(
        unsafe { slhjb_feedback(h, x.as_ptr(), 3, u.as_mut_ptr(), 2) },
        SlhjbStatus::BufferSize
    );

    let dir = tempfile::tempdir().unwrap();
    let d = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { slhjb_write_solution(h, d.as_ptr()) }, SlhjbStatus::Ok);
    assert!(dir.path().join("value.csv").exists());
    unsafe { slhjb_solution_free(h) };
}

#[test]
fn errors_are_reported() {
    let (status, h) = solve(r#"{"problem": "test1", "nonsense": true}"#);
    assert_eq!(status, SlhjbStatus::Config);
    assert!(h.is_null());
    assert!(last_error().contains("nonsense"));

    let (status, _) = solve(r#"{"problem": "test9"}"#);
    assert_eq!(status, SlhjbStatus::Config);

    let (status, _) = solve(r#"{"problem": "test1", "k": -1}"#);
    assert_eq!(status, SlhjbStatus::InvalidProblem);

    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { slhjb_solve_json(ptr::null(), &mut out) },
        SlhjbStatus::NullPointer
    );
    let mut info = SlhjbInfo::default();
    assert_eq!(
        unsafe { slhjb_solution_info(ptr::null(), &mut info) },
        SlhjbStatus::NullPointer
    );
    unsafe { slhjb_solution_free(ptr::null_mut()) };
}

#[test]
fn nonconvergence_keeps_the_handle() {
    let (status, h) = solve(r#"{"problem": "test1", "k": 0.2, "max_sweeps": 2}"#);
    assert_eq!(status, SlhjbStatus::NotConverged);
    assert!(!h.is_null());
    let mut info = SlhjbInfo::default();
    assert_eq!(unsafe { slhjb_solution_info(h, &mut info) }, SlhjbStatus::Ok);
    assert!(!info.converged && info.sweeps == 2);
    unsafe { slhjb_solution_free(h) };
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(slhjb_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles a small C program against the generated header, links it with
/// the static library and runs it.
#[test]
fn c_program_uses_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include = manifest.join("include");
    assert!(include.join("slhjb.h").exists());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "slhjb.h"
int main(void) {
    SlhjbSolution *h = NULL;
    SlhjbStatus s = slhjb_solve_json("{\"problem\": \"test1\", \"k\": 0.25}", &h);
    if (s != SLHJB_STATUS_OK) { printf("%s\n", slhjb_last_error()); return 1; }
    SlhjbInfo info;
    if (slhjb_solution_info(h, &info) != SLHJB_STATUS_OK) return 2;
    double x[2] = {0.5, 0.0}, u[2];
    if (slhjb_feedback(h, x, 2, u, 2) != SLHJB_STATUS_OK) return 3;
    slhjb_solution_free(h);
    if (slhjb_solve_json("{", &h) != SLHJB_STATUS_CONFIG || h != NULL) return 4;
    printf("%zu %d %.3f\n", info.nodes, (int)info.converged, u[0]);
    return 0;
}
"#,
    )
    .unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let syntax = Command::new(&cc)
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .status();
    let Ok(syntax) = syntax else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(syntax.success());

    // Test builds do not produce the staticlib; build it for the profile
    // this test was compiled with.
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let mut build = Command::new(env!("CARGO"));
    build.args(["build", "--quiet", "-p", "slhjb-ffi", "--lib"]);
    if profile_dir.file_name().is_some_and(|n| n == "release") {
        build.arg("--release");
    }
    assert!(build.status().unwrap().success());
    let lib = profile_dir.join("libslhjb_ffi.a");
    let exe = dir.path().join("smoke");
    let link = Command::new(&cc)
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(link.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("81 1 -"), "{text}");
}
