use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use tightframe_ffi::*;

const SHANNON8: &str = r#"{"group":{"variant":"cyclic","params":{"modulus":8}},"family":{"charfun":{"mode":"shannon"}}}"#;
const LINEAR: &str = r#"{"group":{"variant":"integers"},"M":4,"family":{"bspline":{"order":2}}}"#;

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { tightframe_string_free(s) };
    out
}

fn last_error() -> Option<String> {
    let p = tightframe_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn build(json: &str) -> *mut TightframeSystem {
    let c = CString::new(json).unwrap();
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { tightframe_system_from_descriptor(c.as_ptr(), &mut sys) }, TIGHTFRAME_OK, "{:?}", last_error());
    sys
}

fn verify(sys: *const TightframeSystem, suite: &str) -> (i32, serde_json::Value) {
    let suite = CString::new(suite).unwrap();
    let mut report = ptr::null_mut();
    let code = unsafe { tightframe_verify(sys, suite.as_ptr(), ptr::null(), 0.0, &mut report) };
    (code, serde_json::from_str(&take(report)).unwrap())
}

#[test]
fn descriptor_round_trip_and_verify() {
    let sys = build(SHANNON8);
    let (code, report) = verify(sys, "all");
    assert_eq!(code, TIGHTFRAME_OK);
    assert_eq!(report["passed"], true);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { tightframe_system_to_json(sys, &mut json) }, TIGHTFRAME_OK);
    let json = take(json);
    let c = CString::new(json.clone()).unwrap();
    let mut again = ptr::null_mut();
    assert_eq!(unsafe { tightframe_system_from_artifact(c.as_ptr(), &mut again) }, TIGHTFRAME_OK);
    let mut json2 = ptr::null_mut();
    assert_eq!(unsafe { tightframe_system_to_json(again, &mut json2) }, TIGHTFRAME_OK);
    assert_eq!(json, take(json2));
    unsafe {
        tightframe_system_free(sys);
        tightframe_system_free(again);
    }
}

#[test]
fn zeroed_filter_reports_verification_failure() {
    let sys = build(SHANNON8);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { tightframe_system_to_json(sys, &mut json) }, TIGHTFRAME_OK);
    let mut art: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
    for piece in art["levels"][1]["g"][0]["pieces"].as_array_mut().unwrap() {
        piece["value"] = serde_json::json!([0.0, 0.0]);
    }
    let c = CString::new(art.to_string()).unwrap();
    let mut broken = ptr::null_mut();
    assert_eq!(unsafe { tightframe_system_from_artifact(c.as_ptr(), &mut broken) }, TIGHTFRAME_OK);
    let (code, report) = verify(broken, "uep");
    assert_eq!(code, TIGHTFRAME_VERIFICATION_FAILED);
    assert_eq!(report["passed"], false);
    unsafe {
        tightframe_system_free(sys);
        tightframe_system_free(broken);
    }
}

#[test]
fn generator_values_are_copied_out() {
    let sys = build(LINEAR);
    let mut count = 0usize;
    assert_eq!(unsafe { tightframe_generator_count(sys, &mut count) }, TIGHTFRAME_OK);
    assert_eq!(count, 1 + 2 * 4);

    let (mut start, mut len) = (0i64, 0usize);
    let code = unsafe { tightframe_generator_values(sys, 0, &mut start, ptr::null_mut(), ptr::null_mut(), 0, &mut len) };
    assert_eq!(code, TIGHTFRAME_OK);
    assert!(len > 0);
    let (mut re, mut im) = (vec![0.0; len], vec![0.0; len]);
    assert_eq!(
        unsafe { tightframe_generator_values(sys, 0, &mut start, re.as_mut_ptr(), im.as_mut_ptr(), len, &mut len) },
        TIGHTFRAME_OK
    );
    let direct = tightframe::descriptor::parse_descriptor(LINEAR).unwrap().build().unwrap();
    let expected = direct.time_generator(direct.generator_ids()[0]).unwrap();
    assert_eq!(start, expected.start);
    for (i, v) in expected.values.iter().enumerate() {
        assert_eq!((re[i], im[i]), (v.re, v.im));
    }

    assert_eq!(
        unsafe { tightframe_generator_values(sys, 0, &mut start, re.as_mut_ptr(), im.as_mut_ptr(), len - 1, &mut len) },
        TIGHTFRAME_INPUT
    );
    assert_eq!(
        unsafe { tightframe_generator_values(sys, count, &mut start, ptr::null_mut(), ptr::null_mut(), 0, &mut len) },
        TIGHTFRAME_INPUT
    );
    unsafe { tightframe_system_free(sys) };
}

#[test]
fn errors_set_status_and_message() {
    let mut sys = ptr::null_mut();
    let bad = CString::new("{ nope").unwrap();
    assert_eq!(unsafe { tightframe_system_from_descriptor(bad.as_ptr(), &mut sys) }, TIGHTFRAME_INPUT);
    assert!(sys.is_null());
    assert!(last_error().is_some());

    assert_eq!(unsafe { tightframe_system_from_descriptor(ptr::null(), &mut sys) }, TIGHTFRAME_NULL_POINTER);
    let mut count = 0usize;
    assert_eq!(unsafe { tightframe_generator_count(ptr::null(), &mut count) }, TIGHTFRAME_NULL_POINTER);

    let odd = CString::new(r#"{"group":{"variant":"integers"},"M":3,"family":{"bspline":{"order":3}}}"#).unwrap();
    assert_eq!(unsafe { tightframe_system_from_descriptor(odd.as_ptr(), &mut sys) }, TIGHTFRAME_UNSUPPORTED);

    let torus = build(r#"{"group":{"variant":"torus"},"M_seq":[2,3,2],"family":{"charfun":{"mode":"shannon"}}}"#);
    let (mut start, mut len) = (0i64, 0usize);
    assert_eq!(
        unsafe { tightframe_generator_values(torus, 0, &mut start, ptr::null_mut(), ptr::null_mut(), 0, &mut len) },
        TIGHTFRAME_UNSUPPORTED
    );

    let sys = build(SHANNON8);
    let suite = CString::new("nonsense").unwrap();
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { tightframe_verify(sys, suite.as_ptr(), ptr::null(), 0.0, &mut report) }, TIGHTFRAME_INPUT);
    assert!(report.is_null());

    // a successful call clears the message
    assert_eq!(unsafe { tightframe_generator_count(sys, &mut count) }, TIGHTFRAME_OK);
    assert!(last_error().is_none());
    unsafe {
        tightframe_system_free(sys);
        tightframe_system_free(torus);
        tightframe_system_free(ptr::null_mut());
        tightframe_string_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(tightframe_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles and runs a C program against the generated header and the static library.
#[test]
fn c_program_links_against_the_header() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libtightframe_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "tightframe.h"

int main(void) {
    const char *desc = "{\"group\":{\"variant\":\"integers\"},\"M\":3,\"family\":{\"bspline\":{\"order\":1}}}";
    TightframeSystem *sys = NULL;
    if (tightframe_system_from_descriptor(desc, &sys) != TIGHTFRAME_OK) return 10;
    size_t n = 0;
    if (tightframe_generator_count(sys, &n) != TIGHTFRAME_OK || n != 4) return 11;
    char *report = NULL;
    int code = tightframe_verify(sys, "all", NULL, 0.0, &report);
    if (code != TIGHTFRAME_OK || report == NULL || strstr(report, "\"passed\": true") == NULL) return 12;
    tightframe_string_free(report);
    TightframeSystem *none = NULL;
    if (tightframe_system_from_descriptor("{", &none) != TIGHTFRAME_INPUT) return 13;
    if (tightframe_last_error() == NULL) return 14;
    tightframe_system_free(sys);
    printf("ok %s\n", tightframe_version());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
