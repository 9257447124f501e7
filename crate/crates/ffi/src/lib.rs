//! C ABI over the `ewcheck` engine.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns an [`EwStatus`];
//! on failure a description is available from [`ew_last_error`] on the same
//! thread. Strings returned as `char *` are owned by the caller and must be
//! released with [`ew_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ewcheck::analysis::{CheckOptions, Verdict};
use ewcheck::budget::DEFAULT_MAX_SIZE;
use ewcheck::catalog;
use ewcheck::dsl::{self, Problem};
use ewcheck::geometry::Representative;
use ewcheck::report::{CheckEntry, ReportDocument};
use ewcheck::runner::{self, CheckKind, RunError};

/// Result of an API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// The document failed to parse or compile.
    Parse = 3,
    NotFound = 4,
    /// The document lacks what the check needs, or the input is inconsistent.
    Input = 5,
    /// The expression-size cap was hit.
    Limit = 6,
    /// An internal panic was caught at the boundary.
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwVerdict {
    Pass = 0,
    Fail = 1,
    Degenerate = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwCheck {
    Flat = 0,
    Ew = 1,
    Lax = 2,
    Nullgeo = 3,
    Omega = 4,
    Constraints = 5,
    Gt = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwRepresentative {
    /// Whatever the document asks for.
    Document = 0,
    Adjugate = 1,
    Inverse = 2,
    Pinned = 3,
}

/// Overrides for a check. A null pointer means the document's own options.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EwOptions {
    pub representative: EwRepresentative,
    /// 0 keeps the document's value.
    pub base_order: u32,
    /// 0 means the engine default.
    pub max_size: u64,
    pub leading: bool,
    pub witness: bool,
}

/// A compiled problem document.
pub struct EwProblem(Problem);

/// The outcome of one check.
pub struct EwReport {
    verdict: Verdict,
    doc: ReportDocument,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: EwStatus, msg: impl Into<String>) -> EwStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> EwStatus) -> EwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(EwStatus::Internal, "internal error"),
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, EwStatus> {
    if p.is_null() {
        return Err(fail(EwStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(EwStatus::InvalidUtf8, "string is not UTF-8"))
}

fn owned(s: &str) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Engine version as a static string; never free it.
#[no_mangle]
pub extern "C" fn ew_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ew_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is accepted.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ew_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and compiles a problem document.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ew_problem_parse(text: *const c_char, out: *mut *mut EwProblem) -> EwStatus {
    guard(|| {
        if out.is_null() {
            return fail(EwStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let problem = match dsl::parse(text).and_then(|d| dsl::compile(&d)) {
            Ok(p) => p,
            Err(d) => return fail(EwStatus::Parse, d.to_string()),
        };
        *out = Box::into_raw(Box::new(EwProblem(problem)));
        EwStatus::Ok
    })
}

/// Loads a built-in catalog entry by name or alias.
///
/// # Safety
/// `name` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ew_problem_from_catalog(name: *const c_char, out: *mut *mut EwProblem) -> EwStatus {
    guard(|| {
        if out.is_null() {
            return fail(EwStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let name = match read_str(name) {
            Ok(t) => t,
            Err(s) => return s,
        };
        if catalog::source(name).is_none() {
            return fail(EwStatus::NotFound, format!("no catalog entry named '{name}'"));
        }
        match catalog::get(name) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(EwProblem(p)));
                EwStatus::Ok
            }
            Err(e) => fail(EwStatus::Parse, e.to_string()),
        }
    })
}

/// Name of the problem; free with [`ew_string_free`]. Null on a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ew_problem_name(p: *const EwProblem) -> *mut c_char {
    match p.as_ref() {
        Some(p) => owned(p.0.name()),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `p` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn ew_problem_free(p: *mut EwProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn kind(c: EwCheck) -> CheckKind {
    match c {
        EwCheck::Flat => CheckKind::Flat,
        EwCheck::Ew => CheckKind::Ew,
        EwCheck::Lax => CheckKind::Lax,
        EwCheck::Nullgeo => CheckKind::Nullgeo,
        EwCheck::Omega => CheckKind::Omega,
        EwCheck::Constraints => CheckKind::Constraints,
        EwCheck::Gt => CheckKind::Gt,
    }
}

fn apply(o: &mut CheckOptions, x: Option<&EwOptions>) {
    if let Some(x) = x {
        let rep = match x.representative {
            EwRepresentative::Document => None,
            EwRepresentative::Adjugate => Some(Representative::Adjugate),
            EwRepresentative::Inverse => Some(Representative::Inverse),
            EwRepresentative::Pinned => Some(Representative::Pinned),
        };
        if let Some(r) = rep {
            o.representative = Some(r);
            if r != Representative::Pinned {
                o.pinned_g = None;
            }
        }
        if x.base_order > 0 {
            o.base_order = Some(x.base_order as usize);
        }
        if x.max_size > 0 {
            o.max_size = Some(usize::try_from(x.max_size).unwrap_or(usize::MAX));
        }
        o.leading |= x.leading;
        o.witness |= x.witness;
    }
    o.max_size = Some(o.max_size.unwrap_or(DEFAULT_MAX_SIZE));
}

/// Runs one check. On success `*out` receives a report handle.
///
/// # Safety
/// `p` must be a live handle, `opts` null or valid, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ew_check(
    p: *const EwProblem,
    check: EwCheck,
    opts: *const EwOptions,
    out: *mut *mut EwReport,
) -> EwStatus {
    guard(|| {
        if out.is_null() {
            return fail(EwStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let Some(p) = p.as_ref() else {
            return fail(EwStatus::NullPointer, "null problem handle");
        };
        let mut o = p.0.check_options();
        apply(&mut o, opts.as_ref());
        let k = kind(check);
        match runner::run_check(&p.0, k, &o) {
            Ok(rep) => {
                let mut doc = ReportDocument::new(&format!("check-{}", k.as_str()));
                doc.checks.push(CheckEntry::from_report(&rep));
                *out = Box::into_raw(Box::new(EwReport { verdict: rep.verdict, doc }));
                EwStatus::Ok
            }
            Err(e @ RunError::Analysis(_)) if e.is_limit() => fail(EwStatus::Limit, e.to_string()),
            Err(e) => fail(EwStatus::Input, e.to_string()),
        }
    })
}

/// Verdict of a report; `Degenerate` for a null handle.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ew_report_verdict(r: *const EwReport) -> EwVerdict {
    match r.as_ref().map(|r| r.verdict) {
        Some(Verdict::Pass) => EwVerdict::Pass,
        Some(Verdict::Fail) => EwVerdict::Fail,
        Some(Verdict::Degenerate) | None => EwVerdict::Degenerate,
    }
}

/// Report as JSON; free with [`ew_string_free`].
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ew_report_json(r: *const EwReport) -> *mut c_char {
    r.as_ref().map_or(ptr::null_mut(), |r| owned(&r.doc.to_json()))
}

/// Report as markdown; free with [`ew_string_free`].
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ew_report_markdown(r: *const EwReport) -> *mut c_char {
    r.as_ref().map_or(ptr::null_mut(), |r| owned(&r.doc.to_markdown()))
}

/// # Safety
/// `r` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn ew_report_free(r: *mut EwReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

#[no_mangle]
pub extern "C" fn ew_catalog_len() -> usize {
    catalog::list().len()
}

/// Name of catalog entry `i`, or null past the end; free with
/// [`ew_string_free`].
#[no_mangle]
pub extern "C" fn ew_catalog_name(i: usize) -> *mut c_char {
    catalog::list().get(i).map_or(ptr::null_mut(), |n| owned(n))
}
