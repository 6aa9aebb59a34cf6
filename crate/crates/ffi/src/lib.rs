//! C interface to `tightframe`.
//!
//! Every fallible call returns a status code. On failure a message is kept in a
//! thread-local slot readable through [`tightframe_last_error`]. Strings handed out
//! by the library must be released with [`tightframe_string_free`]; systems with
//! [`tightframe_system_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tightframe::descriptor::{parse_descriptor, sha256_hex, SystemArtifact};
use tightframe::frame::FrameSystem;
use tightframe::verify::{verify_system, Suite, VerifyOptions, DEFAULT_TOLERANCE, DEFAULT_TRIALS};
use tightframe::{Error, GroupSpec};

pub const TIGHTFRAME_OK: i32 = 0;
/// The call succeeded but at least one verification check failed.
pub const TIGHTFRAME_VERIFICATION_FAILED: i32 = 1;
/// Malformed JSON, bad parameters or inconsistent filters.
pub const TIGHTFRAME_INPUT: i32 = 2;
pub const TIGHTFRAME_PRECONDITION: i32 = 3;
pub const TIGHTFRAME_NULL_POINTER: i32 = 4;
/// A panic or an unexpected internal failure.
pub const TIGHTFRAME_INTERNAL: i32 = 5;
/// The request is outside what the library computes, e.g. time-side values on the torus.
pub const TIGHTFRAME_UNSUPPORTED: i32 = 6;

/// Opaque handle to a constructed system.
pub struct TightframeSystem {
    system: FrameSystem,
    artifact: SystemArtifact,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> i32 {
    match e {
        Error::Precondition { .. } => TIGHTFRAME_PRECONDITION,
        Error::Unsupported(_) | Error::InterpolationUnsupported | Error::Resource(_) => TIGHTFRAME_UNSUPPORTED,
        _ => TIGHTFRAME_INPUT,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<i32, (i32, String)>) -> i32 {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(code)) => code,
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            TIGHTFRAME_INTERNAL
        }
    }
}

fn lib(e: Error) -> (i32, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (i32, String) {
    (TIGHTFRAME_NULL_POINTER, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (i32, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (TIGHTFRAME_INPUT, format!("{what} is not UTF-8")))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("no interior nul").into_raw()
}

unsafe fn handle<'a>(p: *const TightframeSystem) -> Result<&'a TightframeSystem, (i32, String)> {
    p.as_ref().ok_or_else(|| null("system"))
}

/// Builds a system from a descriptor JSON string.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tightframe_system_from_descriptor(json: *const c_char, out: *mut *mut TightframeSystem) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = read_str(json, "json")?;
        let d = parse_descriptor(text).map_err(lib)?;
        let system = d.build().map_err(lib)?;
        let artifact = SystemArtifact::from_system(&system, &d, &sha256_hex(text.as_bytes())).map_err(lib)?;
        *out = Box::into_raw(Box::new(TightframeSystem { system, artifact }));
        Ok(TIGHTFRAME_OK)
    })
}

/// Loads a system from an artifact JSON string; the stored filters are used as given.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tightframe_system_from_artifact(json: *const c_char, out: *mut *mut TightframeSystem) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let artifact = SystemArtifact::parse(read_str(json, "json")?).map_err(lib)?;
        let system = artifact.to_system().map_err(lib)?;
        *out = Box::into_raw(Box::new(TightframeSystem { system, artifact }));
        Ok(TIGHTFRAME_OK)
    })
}

/// Releases a system. Null is ignored.
///
/// # Safety
/// `system` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tightframe_system_free(system: *mut TightframeSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Writes the system artifact JSON to `*out`.
///
/// # Safety
/// `system` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tightframe_system_to_json(system: *const TightframeSystem, out: *mut *mut c_char) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let h = handle(system)?;
        *out = to_c_string(h.artifact.to_json());
        Ok(TIGHTFRAME_OK)
    })
}

/// Runs a verification suite ("uep", "refinement", "fiber", "telescope", "parseval" or "all").
///
/// `seed` may be null to use the system's own seed; a non-positive `tolerance` selects the
/// default. The JSON report is written to `*report` even when checks fail, in which case
/// the return value is `TIGHTFRAME_VERIFICATION_FAILED`.
///
/// # Safety
/// Pointers must be valid; `suite` must be nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn tightframe_verify(
    system: *const TightframeSystem,
    suite: *const c_char,
    seed: *const u64,
    tolerance: f64,
    report: *mut *mut c_char,
) -> i32 {
    guard(|| {
        if report.is_null() {
            return Err(null("report"));
        }
        *report = ptr::null_mut();
        let h = handle(system)?;
        let suite: Suite = read_str(suite, "suite")?.parse().map_err(lib)?;
        let seed = match seed.as_ref() {
            Some(s) => *s,
            None => h.artifact.seed_value().map_err(lib)?,
        };
        let tolerance = if tolerance > 0.0 { tolerance } else { DEFAULT_TOLERANCE };
        let opts = VerifyOptions { suite, samples: None, trials: DEFAULT_TRIALS, seed, tolerance };
        let r = verify_system(&h.system, &opts, &h.artifact.descriptor_sha256).map_err(lib)?;
        let json = serde_json::to_string_pretty(&r).map_err(|e| (TIGHTFRAME_INTERNAL, e.to_string()))?;
        *report = to_c_string(json);
        Ok(if r.passed { TIGHTFRAME_OK } else { TIGHTFRAME_VERIFICATION_FAILED })
    })
}

/// Number of generators: the scaling function followed by the wavelets of every level.
///
/// # Safety
/// `system` must be a live handle and `count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tightframe_generator_count(system: *const TightframeSystem, count: *mut usize) -> i32 {
    guard(|| {
        if count.is_null() {
            return Err(null("count"));
        }
        *count = handle(system)?.system.generator_ids().len();
        Ok(TIGHTFRAME_OK)
    })
}

/// Time-domain values of generator `index` on Z or Z_N.
///
/// Sets `*len` to the number of values and `*start` to the index of the first one. When
/// `re` and `im` are non-null and `capacity >= *len`, the values are copied into them;
/// call with null buffers first to size them.
///
/// # Safety
/// `re` and `im`, when non-null, must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn tightframe_generator_values(
    system: *const TightframeSystem,
    index: usize,
    start: *mut i64,
    re: *mut f64,
    im: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> i32 {
    guard(|| {
        if start.is_null() || len.is_null() {
            return Err(null("start/len"));
        }
        let h = handle(system)?;
        if !matches!(h.system.group(), GroupSpec::Integers | GroupSpec::FiniteCyclic { .. }) {
            return Err((TIGHTFRAME_UNSUPPORTED, "time-side values exist only on Z and Z_N".into()));
        }
        let ids = h.system.generator_ids();
        let id = *ids.get(index).ok_or_else(|| (TIGHTFRAME_INPUT, format!("generator index {index} >= {}", ids.len())))?;
        let seq = h.system.time_generator(id).map_err(lib)?;
        *start = seq.start;
        *len = seq.values.len();
        if re.is_null() || im.is_null() {
            return Ok(TIGHTFRAME_OK);
        }
        if capacity < seq.values.len() {
            return Err((TIGHTFRAME_INPUT, format!("capacity {capacity} < {}", seq.values.len())));
        }
        for (i, v) in seq.values.iter().enumerate() {
            *re.add(i) = v.re;
            *im.add(i) = v.im;
        }
        Ok(TIGHTFRAME_OK)
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tightframe_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn tightframe_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn tightframe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
