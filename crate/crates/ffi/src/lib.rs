//! C ABI for the spectrum-share simulator.
//!
//! Scenarios and reports are opaque handles owned by the caller and released
//! with their `_free` function. Every fallible call returns a
//! [`SpshareStatus`]; the message of the last failure on the calling thread
//! is available from [`spshare_last_error_message`]. Metrics that are
//! undefined for a run (no calls, no owned channels) are reported as NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use spectrum_share::engine::RunOptions;
use spectrum_share::report::run_csv;
use spectrum_share::sbac::{channel_utility, SbacWeights};
use spectrum_share::{Error, MetricsReport, ProviderReport, Scenario};

/// Status codes. Simulator errors use the same values as the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpshareStatus {
    Ok = 0,
    Io = 1,
    Config = 2,
    Invariant = 3,
    NullArgument = 4,
    InvalidArgument = 5,
    Panic = 6,
}

/// Opaque scenario handle.
pub struct SpshareScenario {
    inner: Scenario,
}

/// Opaque result of one run.
pub struct SpshareReport {
    scenario_id: String,
    seed: u64,
    report: MetricsReport,
}

/// Metrics of one provider, or of all providers pooled.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpshareProviderMetrics {
    pub n_blocked: u64,
    pub n_processed: u64,
    pub n_channels: u64,
    pub eta_s: f64,
    pub eta_s_user_weighted: f64,
    pub c_e: f64,
    pub active_users_mean: f64,
    pub traffic_load_offered: f64,
}

impl From<&ProviderReport> for SpshareProviderMetrics {
    fn from(p: &ProviderReport) -> Self {
        SpshareProviderMetrics {
            n_blocked: p.n_blocked,
            n_processed: p.n_processed,
            n_channels: p.n_channels as u64,
            eta_s: p.eta_s.unwrap_or(f64::NAN),
            eta_s_user_weighted: p.eta_s_user_weighted.unwrap_or(f64::NAN),
            c_e: p.c_e.unwrap_or(f64::NAN),
            active_users_mean: p.active_users_mean,
            traffic_load_offered: p.traffic_load_offered,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(SpshareStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Config(_) => SpshareStatus::Config,
            Error::Invariant(_) => SpshareStatus::Invariant,
            Error::Io(_) | Error::Csv(_) => SpshareStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(SpshareStatus::NullArgument, format!("`{name}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SpshareStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpshareStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SpshareStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn get_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn spshare_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a scenario from a NUL-terminated UTF-8 JSON document.
///
/// # Safety
/// `json` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn spshare_scenario_from_json(json: *const c_char, out: *mut *mut SpshareScenario) -> SpshareStatus {
    guard(|| {
        let out = get_mut(out, "out")?;
        *out = ptr::null_mut();
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(SpshareStatus::InvalidArgument, format!("json is not UTF-8: {e}")))?;
        let inner = Scenario::from_json(text)?;
        *out = Box::into_raw(Box::new(SpshareScenario { inner }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spshare_scenario_free(scenario: *mut SpshareScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `scenario` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn spshare_scenario_set_seed(scenario: *mut SpshareScenario, seed: u64) -> SpshareStatus {
    guard(|| {
        get_mut(scenario, "scenario")?.inner.seed = seed;
        Ok(())
    })
}

/// Runs the scenario to completion.
///
/// # Safety
/// `scenario` must be a live scenario handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn spshare_run(scenario: *const SpshareScenario, out: *mut *mut SpshareReport) -> SpshareStatus {
    guard(|| {
        let out = get_mut(out, "out")?;
        *out = ptr::null_mut();
        let s = &get(scenario, "scenario")?.inner;
        let result = spectrum_share::run(s, &RunOptions::default())?;
        *out = Box::into_raw(Box::new(SpshareReport { scenario_id: s.id.clone(), seed: s.seed, report: result.report }));
        Ok(())
    })
}

/// # Safety
/// `report` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spshare_report_free(report: *mut SpshareReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Global blocking rate; NaN when no call was decided.
///
/// # Safety
/// `report` must be a live report handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn spshare_report_blocking_rate(report: *const SpshareReport, out: *mut f64) -> SpshareStatus {
    guard(|| {
        let r = get(report, "report")?;
        *get_mut(out, "out")? = r.report.blocking_rate.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// # Safety
/// `report` must be a live report handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn spshare_report_provider_count(report: *const SpshareReport, out: *mut usize) -> SpshareStatus {
    guard(|| {
        let r = get(report, "report")?;
        *get_mut(out, "out")? = r.report.providers.len();
        Ok(())
    })
}

/// Metrics of provider `index`.
///
/// # Safety
/// `report` must be a live report handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn spshare_report_provider(
    report: *const SpshareReport,
    index: usize,
    out: *mut SpshareProviderMetrics,
) -> SpshareStatus {
    guard(|| {
        let r = get(report, "report")?;
        let out = get_mut(out, "out")?;
        let p = r.report.providers.get(index).ok_or_else(|| {
            Failure(
                SpshareStatus::InvalidArgument,
                format!("provider index {index} out of range ({} providers)", r.report.providers.len()),
            )
        })?;
        *out = p.into();
        Ok(())
    })
}

/// Metrics pooled over all providers.
///
/// # Safety
/// `report` must be a live report handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn spshare_report_total(report: *const SpshareReport, out: *mut SpshareProviderMetrics) -> SpshareStatus {
    guard(|| {
        let r = get(report, "report")?;
        *get_mut(out, "out")? = (&r.report.total).into();
        Ok(())
    })
}

/// The report as CSV text, same layout as the command line tool. Release the
/// string with [`spshare_string_free`].
///
/// # Safety
/// `report` must be a live report handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn spshare_report_to_csv(report: *const SpshareReport, out: *mut *mut c_char) -> SpshareStatus {
    guard(|| {
        let out = get_mut(out, "out")?;
        *out = ptr::null_mut();
        let r = get(report, "report")?;
        let text = run_csv(&r.scenario_id, r.seed, &r.report)?;
        let c = CString::new(text).map_err(|e| Failure(SpshareStatus::InvalidArgument, e.to_string()))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spshare_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// SBAC utility of one channel. Returns NaN and sets the last error when the
/// weights are invalid.
#[no_mangle]
pub extern "C" fn spshare_channel_utility(
    prob: f64,
    inter_norm: f64,
    cost: f64,
    beta1: f64,
    beta2: f64,
    beta3: f64,
) -> f64 {
    let w = SbacWeights { beta1, beta2, beta3 };
    match w.validate() {
        Ok(()) => channel_utility(prob, inter_norm, cost, &w),
        Err(e) => {
            set_error(e.to_string());
            f64::NAN
        }
    }
}
