//! C ABI for embedding the simulator from other languages. Scenarios and
//! finished runs are opaque handles; every entry point returns an
//! [`F5gStatus`] and the last error message is retrievable as a C string.
//! The header `include/frugal5g.h` is generated by cbindgen at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use frugal5g::sim::{self, MetricsReport, Scenario, Trace};

/// Status codes returned by every `f5g_*` call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum F5gStatus {
    Ok = 0,
    /// A pointer argument was null.
    NullArgument = 1,
    /// Input text was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The scenario failed to parse or validate.
    InvalidScenario = 3,
    /// An internal error; see `f5g_last_error`.
    Internal = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("error").expect("static"));
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Opaque parsed scenario.
pub struct F5gScenario {
    inner: Scenario,
}

/// Opaque finished run: trace plus metrics.
pub struct F5gRun {
    trace: Trace,
    metrics: MetricsReport,
}

/// Last error message for this thread, or null if none. The pointer stays
/// valid until the next failing `f5g_*` call on the same thread.
#[no_mangle]
pub extern "C" fn f5g_last_error() -> *const c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map(|c| c.as_ptr())
            .unwrap_or(ptr::null())
    })
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn f5g_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Parse and validate a scenario from TOML text.
///
/// # Safety
/// `text` must be a valid NUL-terminated C string; `out` must be a valid
/// pointer. On `Ok` the handle must be released with
/// [`f5g_scenario_free`].
#[no_mangle]
pub unsafe extern "C" fn f5g_scenario_load(
    text: *const c_char,
    out: *mut *mut F5gScenario,
) -> F5gStatus {
    if text.is_null() || out.is_null() {
        return F5gStatus::NullArgument;
    }
    let Ok(text) = CStr::from_ptr(text).to_str() else {
        return F5gStatus::InvalidUtf8;
    };
    match sim::load_scenario(text) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(F5gScenario { inner }));
            F5gStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            F5gStatus::InvalidScenario
        }
    }
}

/// Release a scenario handle. Null is ignored.
///
/// # Safety
/// `scenario` must have come from [`f5g_scenario_load`] and not have been
/// freed before.
#[no_mangle]
pub unsafe extern "C" fn f5g_scenario_free(scenario: *mut F5gScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Run a scenario. `override_seed` replaces the file's seed when
/// `has_override` is true.
///
/// # Safety
/// `scenario` must be a live handle from [`f5g_scenario_load`]; `out` must
/// be a valid pointer. On `Ok` the run must be released with
/// [`f5g_run_free`].
#[no_mangle]
pub unsafe extern "C" fn f5g_run(
    scenario: *const F5gScenario,
    has_override: bool,
    override_seed: u64,
    out: *mut *mut F5gRun,
) -> F5gStatus {
    if scenario.is_null() || out.is_null() {
        return F5gStatus::NullArgument;
    }
    let scenario = &(*scenario).inner;
    let seed = has_override.then_some(override_seed);
    let (trace, metrics) = sim::run(scenario, seed);
    *out = Box::into_raw(Box::new(F5gRun { trace, metrics }));
    F5gStatus::Ok
}

/// Release a run handle. Null is ignored.
///
/// # Safety
/// `run` must have come from [`f5g_run`] and not have been freed before.
#[no_mangle]
pub unsafe extern "C" fn f5g_run_free(run: *mut F5gRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

unsafe fn text_out(s: String, out: *mut *mut c_char) -> F5gStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            F5gStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            F5gStatus::Internal
        }
    }
}

/// The run's full trace as text, one record per line. Free the string with
/// [`f5g_string_free`].
///
/// # Safety
/// `run` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn f5g_run_trace_text(
    run: *const F5gRun,
    out: *mut *mut c_char,
) -> F5gStatus {
    if run.is_null() || out.is_null() {
        return F5gStatus::NullArgument;
    }
    text_out((*run).trace.to_text(), out)
}

/// The run's metrics report as structured text. Free the string with
/// [`f5g_string_free`].
///
/// # Safety
/// `run` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn f5g_run_metrics_text(
    run: *const F5gRun,
    out: *mut *mut c_char,
) -> F5gStatus {
    if run.is_null() || out.is_null() {
        return F5gStatus::NullArgument;
    }
    text_out((*run).metrics.to_text(), out)
}

/// Number of trace records in the run.
///
/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn f5g_run_trace_len(run: *const F5gRun) -> u64 {
    if run.is_null() {
        return 0;
    }
    (*run).trace.records.len() as u64
}

/// Free a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must have been returned by an `f5g_*` text function and not freed
/// before.
#[no_mangle]
pub unsafe extern "C" fn f5g_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
