use std::ffi::{CStr, CString};
use std::ptr;

use ykreg_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe {
        ykreg_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn load(name: &str) -> *mut YkScenario {
    let name = CString::new(name).unwrap();
    let mut sc = ptr::null_mut();
    let st = unsafe { ykreg_scenario_load(name.as_ptr(), &mut sc) };
    assert_eq!(st, YkStatus::Ok, "{}", last_error());
    sc
}

fn design(sc: *const YkScenario) -> *mut YkDesign {
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { ykreg_design(sc, &mut d) }, YkStatus::Ok, "{}", last_error());
    d
}

#[test]
fn design_round_trip() {
    let sc = load("example2");
    let d = design(sc);
    unsafe {
        let mut len = 0;
        assert_eq!(ykreg_design_gains(d, ptr::null_mut(), 0, &mut len), YkStatus::Ok);
        assert_eq!(len, 5);
        let mut small = [0.0; 2];
        assert_eq!(
            ykreg_design_gains(d, small.as_mut_ptr(), small.len(), &mut len),
            YkStatus::BufferTooSmall
        );
        assert!(last_error().contains("5 needed"));
        let mut gains = [0.0; 5];
        assert_eq!(ykreg_design_gains(d, gains.as_mut_ptr(), 5, ptr::null_mut()), YkStatus::Ok);
        assert!((gains[1] + 21.3792).abs() < 5e-4);
        assert!((gains[4] - 21.3792).abs() < 5e-4);

        let (mut res, mut rank, mut cond) = (0.0, 0, 0.0);
        assert_eq!(ykreg_design_summary(d, &mut res, &mut rank, &mut cond), YkStatus::Ok);
        assert_eq!(rank, 5);
        assert!(res < 1e-10 && cond >= 1.0);
        assert_eq!(ykreg_design_passes(d, 1e-8), 1);

        let mut s = [0.0; 8];
        assert_eq!(ykreg_design_sensitivity_at_harmonics(d, s.as_mut_ptr(), 8, &mut len), YkStatus::Ok);
        assert_eq!(len, 3);
        assert!(s[..3].iter().all(|v| *v <= 1e-8));

        let (mut re, mut im) = (1.0, 1.0);
        let w = 8.0 * std::f64::consts::PI;
        assert_eq!(ykreg_sensitivity_eval(sc, d, w, &mut re, &mut im), YkStatus::Ok);
        assert!(re.hypot(im) < 1e-8);
        assert_eq!(ykreg_sensitivity_eval(sc, ptr::null(), w, &mut re, &mut im), YkStatus::Ok);
        assert!(re.hypot(im) > 0.1);

        ykreg_design_free(d);
        ykreg_scenario_free(sc);
    }
}

#[test]
fn simulation_columns() {
    let sc = load("example1");
    let d = design(sc);
    unsafe {
        let mut ts = ptr::null_mut();
        assert_eq!(ykreg_simulate(sc, d, &mut ts), YkStatus::Ok);
        let n = ykreg_time_series_len(ts);
        assert_eq!(n, 40_001);
        let mut t = vec![0.0; n];
        let mut y = vec![0.0; n];
        assert_eq!(ykreg_time_series_copy(ts, YkColumn::Time, t.as_mut_ptr(), n, ptr::null_mut()), YkStatus::Ok);
        assert_eq!(ykreg_time_series_copy(ts, YkColumn::Output, y.as_mut_ptr(), n, ptr::null_mut()), YkStatus::Ok);
        assert_eq!(t[0], 0.0);
        assert!((t[n - 1] - 40.0).abs() < 1e-9);
        let tail = y[n - 500..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(tail < 1e-2, "{tail}");
        ykreg_time_series_free(ts);
        ykreg_design_free(d);
        ykreg_scenario_free(sc);
    }
}

#[test]
fn spectrum_roots() {
    let sc = load("example2");
    let d = design(sc);
    unsafe {
        let mut rs = ptr::null_mut();
        assert_eq!(ykreg_sensitivity_spectrum(sc, d, YkRootKind::Zeros, &mut rs), YkStatus::Ok);
        let n = ykreg_roots_len(rs);
        assert!(n >= 3);
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        let mut pole = vec![7; n];
        assert_eq!(
            ykreg_roots_copy(rs, re.as_mut_ptr(), im.as_mut_ptr(), ptr::null_mut(), pole.as_mut_ptr(), n, ptr::null_mut()),
            YkStatus::Ok
        );
        assert!(pole.iter().all(|p| *p == 0));
        let target = 16.0 * std::f64::consts::PI;
        assert!(re.iter().zip(&im).any(|(a, b)| a.hypot(b - target) < 1e-6));
        ykreg_roots_free(rs);
        ykreg_design_free(d);
        ykreg_scenario_free(sc);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut sc = ptr::null_mut();
        let bad = CString::new("no-such-preset").unwrap();
        assert_eq!(ykreg_scenario_load(bad.as_ptr(), &mut sc), YkStatus::Scenario);
        assert!(sc.is_null());
        assert!(last_error().contains("no-such-preset"));

        assert_eq!(ykreg_scenario_load(ptr::null(), &mut sc), YkStatus::NullPointer);
        let text = CString::new("name = \"x\"\nbogus = 1\n").unwrap();
        assert_eq!(ykreg_scenario_from_toml(text.as_ptr(), &mut sc), YkStatus::Scenario);

        let mut d = ptr::null_mut();
        assert_eq!(ykreg_design(ptr::null(), &mut d), YkStatus::NullPointer);
        assert_eq!(ykreg_design_passes(ptr::null(), 1.0), 0);
        assert_eq!(ykreg_time_series_len(ptr::null()), 0);

        let mut buf = [0 as std::ffi::c_char; 4];
        let full = ykreg_last_error_message(buf.as_mut_ptr(), buf.len());
        assert!(full > 3);
        assert_eq!(buf[3], 0);

        ykreg_scenario_free(ptr::null_mut());
        ykreg_design_free(ptr::null_mut());
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(ykreg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
