//! C ABI for the analysis pipeline: run a JSON configuration, inspect the
//! per-frequency results, serialize the full report. Reports are opaque
//! handles; every function returns an `NrStatus` code and the last error
//! message is kept per thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};

use netrobust::config::AnalysisConfig;
use netrobust::pipeline::run_pipeline;
use netrobust::report::AnalysisReport;
use netrobust::uncertainty::chi2_quantile;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NrStatus {
    NrOk = 0,
    NrNullArgument = 1,
    NrInvalidUtf8 = 2,
    NrConfigError = 3,
    NrAnalysisError = 4,
    NrIndexOutOfRange = 5,
    NrNoValue = 6,
}

/// Opaque analysis report handle.
pub struct NrReport {
    inner: AnalysisReport,
    exit_code: i32,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent error on this thread, or NULL.
#[no_mangle]
pub extern "C" fn nr_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// Run the analysis described by a JSON configuration string. On success the
/// report handle is stored in `out_report` and must be released with
/// `nr_report_free`.
///
/// # Safety
/// `config_json` must point to a NUL-terminated string; `out_report` must be
/// a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn nr_analyze(
    config_json: *const c_char,
    out_report: *mut *mut NrReport,
) -> NrStatus {
    if config_json.is_null() || out_report.is_null() {
        set_error("null argument".into());
        return NrStatus::NrNullArgument;
    }
    let text = match CStr::from_ptr(config_json).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("configuration is not valid UTF-8".into());
            return NrStatus::NrInvalidUtf8;
        }
    };
    let config = match AnalysisConfig::from_json(text) {
        Ok(c) => c,
        Err(e) => {
            set_error(e.to_string());
            return NrStatus::NrConfigError;
        }
    };
    match run_pipeline(&config) {
        Ok(outcome) => {
            let report = Box::new(NrReport {
                exit_code: outcome.exit.code(),
                inner: outcome.report,
            });
            *out_report = Box::into_raw(report);
            NrStatus::NrOk
        }
        Err(e) => {
            set_error(e.to_string());
            NrStatus::NrAnalysisError
        }
    }
}

/// Pipeline exit code of the analysis: 0 all frequencies pass the bound,
/// 2 some certified bound exceeds it, 1 partial/failed analysis.
#[no_mangle]
pub extern "C" fn nr_report_exit_code(report: *const NrReport) -> c_int {
    if report.is_null() {
        return 1;
    }
    unsafe { (*report).exit_code }
}

/// Number of frequency records.
#[no_mangle]
pub extern "C" fn nr_report_len(report: *const NrReport) -> usize {
    if report.is_null() {
        return 0;
    }
    unsafe { (*report).inner.records.len() }
}

unsafe fn record_field(
    report: *const NrReport,
    index: usize,
    out: *mut f64,
    f: impl Fn(&netrobust::report::ReportRecord) -> Option<f64>,
) -> NrStatus {
    if report.is_null() || out.is_null() {
        set_error("null argument".into());
        return NrStatus::NrNullArgument;
    }
    let records = &(*report).inner.records;
    let Some(rec) = records.get(index) else {
        set_error(format!("record index {index} out of range"));
        return NrStatus::NrIndexOutOfRange;
    };
    match f(rec) {
        Some(v) => {
            *out = v;
            NrStatus::NrOk
        }
        None => {
            set_error(format!("record {index} carries no value for this field"));
            NrStatus::NrNoValue
        }
    }
}

/// Frequency of record `index`, in Hz.
///
/// # Safety
/// `report` must be a live handle from `nr_analyze`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nr_report_freq_hz(
    report: *const NrReport,
    index: usize,
    out: *mut f64,
) -> NrStatus {
    record_field(report, index, out, |r| Some(r.freq_hz))
}

/// Certified upper bound at record `index`, in dB.
///
/// # Safety
/// As for `nr_report_freq_hz`.
#[no_mangle]
pub unsafe extern "C" fn nr_report_gamma_ub_db(
    report: *const NrReport,
    index: usize,
    out: *mut f64,
) -> NrStatus {
    record_field(report, index, out, |r| r.gamma_ub_db)
}

/// Sampled lower bound at record `index`, in dB.
///
/// # Safety
/// As for `nr_report_freq_hz`.
#[no_mangle]
pub unsafe extern "C" fn nr_report_gamma_lb_db(
    report: *const NrReport,
    index: usize,
    out: *mut f64,
) -> NrStatus {
    record_field(report, index, out, |r| r.gamma_lb_db)
}

/// Bound test at record `index`: 1 pass, 0 fail, -1 analysis failure.
#[no_mangle]
pub extern "C" fn nr_report_pass(report: *const NrReport, index: usize) -> c_int {
    if report.is_null() {
        return -1;
    }
    let records = unsafe { &(*report).inner.records };
    match records.get(index).and_then(|r| r.pass) {
        Some(true) => 1,
        Some(false) => 0,
        None => -1,
    }
}

/// Serialize the full report to JSON. The returned string must be released
/// with `nr_string_free`. Pass a nonzero `include_timings` to embed
/// wall-clock data (not byte-stable across runs).
#[no_mangle]
pub extern "C" fn nr_report_to_json(
    report: *const NrReport,
    include_timings: c_int,
) -> *mut c_char {
    if report.is_null() {
        set_error("null report".into());
        return std::ptr::null_mut();
    }
    let inner = unsafe { &(*report).inner };
    match inner.to_json(include_timings != 0) {
        Ok(json) => match CString::new(json) {
            Ok(c) => c.into_raw(),
            Err(_) => {
                set_error("report contains interior NUL".into());
                std::ptr::null_mut()
            }
        },
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Release a string returned by `nr_report_to_json`.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn nr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Release a report handle.
///
/// # Safety
/// `report` must come from `nr_analyze` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn nr_report_free(report: *mut NrReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Chi-squared quantile helper: the level for a probability and degrees of
/// freedom.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nr_chi2_quantile(
    probability: f64,
    dof: u32,
    out: *mut f64,
) -> NrStatus {
    if out.is_null() {
        set_error("null argument".into());
        return NrStatus::NrNullArgument;
    }
    match chi2_quantile(probability, dof) {
        Ok(v) => {
            *out = v;
            NrStatus::NrOk
        }
        Err(e) => {
            set_error(e.to_string());
            NrStatus::NrConfigError
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"{
        "scenario": {"platoon": {"n_mod": 1, "seed": 1, "dispersion": 0.0,
                     "controller": "improved"}},
        "ellipsoids": {"synthetic": {"relative_std": 0.05, "seed": 7}},
        "frequencies": {"list": {"hz": [0.15]}},
        "embeddings": "disc",
        "mc_samples": 20
    }"#;

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(nr_version()) };
        assert!(!v.to_str().unwrap().is_empty());
    }

    #[test]
    fn analyze_roundtrip_through_c_surface() {
        let cfg = CString::new(CONFIG).unwrap();
        let mut report: *mut NrReport = std::ptr::null_mut();
        let status = unsafe { nr_analyze(cfg.as_ptr(), &mut report) };
        assert_eq!(status, NrStatus::NrOk);
        assert!(!report.is_null());
        assert_eq!(nr_report_len(report), 1);
        let mut hz = 0.0;
        assert_eq!(
            unsafe { nr_report_freq_hz(report, 0, &mut hz) },
            NrStatus::NrOk
        );
        assert!((hz - 0.15).abs() < 1e-12);
        let mut ub = f64::NAN;
        assert_eq!(
            unsafe { nr_report_gamma_ub_db(report, 0, &mut ub) },
            NrStatus::NrOk
        );
        assert!(ub.is_finite());
        let mut lb = f64::NAN;
        assert_eq!(
            unsafe { nr_report_gamma_lb_db(report, 0, &mut lb) },
            NrStatus::NrOk
        );
        assert!(lb <= ub);
        let pass = nr_report_pass(report, 0);
        assert!(pass == 0 || pass == 1);
        assert_eq!(nr_report_exit_code(report), if pass == 1 { 0 } else { 2 });
        let json = nr_report_to_json(report, 0);
        assert!(!json.is_null());
        let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_string();
        assert!(text.contains("\"records\""));
        unsafe {
            nr_string_free(json);
            nr_report_free(report);
        }
    }

    #[test]
    fn bad_config_reports_error() {
        let cfg = CString::new("{not json").unwrap();
        let mut report: *mut NrReport = std::ptr::null_mut();
        let status = unsafe { nr_analyze(cfg.as_ptr(), &mut report) };
        assert_eq!(status, NrStatus::NrConfigError);
        assert!(report.is_null());
        let msg = unsafe { CStr::from_ptr(nr_last_error()) };
        assert!(!msg.to_str().unwrap().is_empty());
    }

    #[test]
    fn null_arguments_rejected() {
        let status = unsafe { nr_analyze(std::ptr::null(), std::ptr::null_mut()) };
        assert_eq!(status, NrStatus::NrNullArgument);
        let mut out = 0.0;
        assert_eq!(
            unsafe { nr_report_freq_hz(std::ptr::null(), 0, &mut out) },
            NrStatus::NrNullArgument
        );
    }

    #[test]
    fn chi2_helper_matches_library() {
        let mut out = 0.0;
        let status = unsafe { nr_chi2_quantile(0.95, 2, &mut out) };
        assert_eq!(status, NrStatus::NrOk);
        assert!((out - 5.991464547107982).abs() < 1e-6);
        assert_eq!(
            unsafe { nr_chi2_quantile(1.5, 2, &mut out) },
            NrStatus::NrConfigError
        );
    }
}
