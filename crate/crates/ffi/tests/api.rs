use std::ffi::{CStr, CString};
use std::ptr;

use ewcheck_ffi::*;

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    ew_string_free(s);
    out
}

unsafe fn last_error() -> String {
    CStr::from_ptr(ew_last_error()).to_str().unwrap().to_string()
}

#[test]
fn catalog_entry_round_trip() {
    unsafe {
        let name = CString::new("dkp").unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(ew_problem_from_catalog(name.as_ptr(), &mut p), EwStatus::Ok);
        assert_eq!(take(ew_problem_name(p)), "dkp");

        let mut r = ptr::null_mut();
        assert_eq!(ew_check(p, EwCheck::Ew, ptr::null(), &mut r), EwStatus::Ok);
        assert_eq!(ew_report_verdict(r), EwVerdict::Pass);
        let json = take(ew_report_json(r));
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["checks"][0]["verdict"], "pass");
        assert!(take(ew_report_markdown(r)).contains("**pass**"));
        ew_report_free(r);

        let mut r = ptr::null_mut();
        assert_eq!(ew_check(p, EwCheck::Flat, ptr::null(), &mut r), EwStatus::Ok);
        assert_eq!(ew_report_verdict(r), EwVerdict::Fail);
        ew_report_free(r);
        ew_problem_free(p);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut p = ptr::null_mut();
        let missing = CString::new("nothing-here").unwrap();
        assert_eq!(ew_problem_from_catalog(missing.as_ptr(), &mut p), EwStatus::NotFound);
        assert!(p.is_null());
        assert!(last_error().contains("nothing-here"));

        let bad = CString::new("name: x\nequation:\n    u_tt = u_xx +\n").unwrap();
        assert_eq!(ew_problem_parse(bad.as_ptr(), &mut p), EwStatus::Parse);
        assert!(last_error().contains("line 3"));

        assert_eq!(ew_problem_parse(ptr::null(), &mut p), EwStatus::NullPointer);
        let mut r = ptr::null_mut();
        assert_eq!(ew_check(ptr::null(), EwCheck::Ew, ptr::null(), &mut r), EwStatus::NullPointer);

        // dKP carries no Gibbons-Tsarev data.
        let name = CString::new("dkp").unwrap();
        assert_eq!(ew_problem_from_catalog(name.as_ptr(), &mut p), EwStatus::Ok);
        assert_eq!(ew_check(p, EwCheck::Gt, ptr::null(), &mut r), EwStatus::Input);

        let tiny = EwOptions {
            representative: EwRepresentative::Document,
            base_order: 0,
            max_size: 2,
            leading: false,
            witness: false,
        };
        assert_eq!(ew_check(p, EwCheck::Ew, &tiny, &mut r), EwStatus::Limit);
        assert!(r.is_null());
        ew_problem_free(p);
    }
}

#[test]
fn parsed_documents_match_the_catalog() {
    unsafe {
        let src = CString::new(ewcheck::catalog::source("linear-wave").unwrap()).unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(ew_problem_parse(src.as_ptr(), &mut p), EwStatus::Ok);
        let mut r = ptr::null_mut();
        let opts = EwOptions {
            representative: EwRepresentative::Adjugate,
            base_order: 0,
            max_size: 0,
            leading: false,
            witness: true,
        };
        assert_eq!(ew_check(p, EwCheck::Flat, &opts, &mut r), EwStatus::Ok);
        assert_eq!(ew_report_verdict(r), EwVerdict::Pass);
        ew_report_free(r);
        ew_problem_free(p);
    }
}

#[test]
fn catalog_enumeration() {
    let n = ew_catalog_len();
    assert_eq!(n, ewcheck::catalog::list().len());
    unsafe {
        assert_eq!(take(ew_catalog_name(0)), ewcheck::catalog::list()[0]);
    }
    assert!(ew_catalog_name(n).is_null());
    let v = unsafe { CStr::from_ptr(ew_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_handles_are_harmless() {
    unsafe {
        ew_problem_free(ptr::null_mut());
        ew_report_free(ptr::null_mut());
        ew_string_free(ptr::null_mut());
        assert!(ew_report_json(ptr::null()).is_null());
        assert_eq!(ew_report_verdict(ptr::null()), EwVerdict::Degenerate);
    }
}
