//! C ABI for `ykreg`.
//!
//! Every object crosses the boundary as an opaque handle created by a
//! `ykreg_*` constructor and released by the matching `*_free` function.
//! Fallible calls return a [`YkStatus`]; on failure the message is kept per
//! thread and can be read with [`ykreg_last_error_message`].
//!
//! Array getters copy into caller-owned buffers. They always report the full
//! length through `len_out`, so a first call with a null buffer can size the
//! second one.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use ykreg::factorization::assemble_sensitivity;
use ykreg::scenario::Scenario;
use ykreg::simulator::{simulate_closed_loop, TimeSeries};
use ykreg::spectrum::{sensitivity_spectrum, Root, RootKind};
use ykreg::synthesis::DesignResult;
use ykreg::FirDelayParameter;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum YkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Scenario = 3,
    Design = 4,
    Spectrum = 5,
    Simulation = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Column selector for [`ykreg_time_series_copy`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum YkColumn {
    Time = 0,
    Output = 1,
    Control = 2,
    Disturbance = 3,
    Error = 4,
}

/// Root selector for [`ykreg_sensitivity_spectrum`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum YkRootKind {
    Zeros = 0,
    Poles = 1,
    Both = 2,
}

pub struct YkScenario(Scenario);

pub struct YkDesign(DesignResult);

pub struct YkTimeSeries(TimeSeries);

pub struct YkRootSet(Vec<(Root, RootKind)>);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: YkStatus, msg: impl Into<String>) -> YkStatus {
    set_error(msg);
    status
}

fn guard(body: impl FnOnce() -> YkStatus) -> YkStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => {
            if status == YkStatus::Ok {
                set_error("");
            }
            status
        }
        Err(_) => fail(YkStatus::Panic, "internal panic"),
    }
}

unsafe fn cstr<'a>(p: *const c_char) -> Result<&'a str, YkStatus> {
    if p.is_null() {
        return Err(fail(YkStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(YkStatus::InvalidArgument, "string argument is not UTF-8"))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> YkStatus {
    *out = Box::into_raw(Box::new(value));
    YkStatus::Ok
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, cap: usize, len_out: *mut usize) -> YkStatus {
    if !len_out.is_null() {
        *len_out = src.len();
    }
    if buf.is_null() {
        return if cap == 0 {
            YkStatus::Ok
        } else {
            fail(YkStatus::NullPointer, "buffer is null")
        };
    }
    if cap < src.len() {
        return fail(
            YkStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", src.len()),
        );
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    YkStatus::Ok
}

macro_rules! deref {
    ($p:expr) => {
        match $p.as_ref() {
            Some(v) => v,
            None => return fail(YkStatus::NullPointer, concat!(stringify!($p), " is null")),
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ykreg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the untruncated length without the NUL.
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn ykreg_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Loads a built-in preset by name or a scenario file by path.
///
/// # Safety
/// `name_or_path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ykreg_scenario_load(
    name_or_path: *const c_char,
    out: *mut *mut YkScenario,
) -> YkStatus {
    guard(|| {
        if out.is_null() {
            return fail(YkStatus::NullPointer, "out is null");
        }
        let arg = match cstr(name_or_path) {
            Ok(s) => s,
            Err(st) => return st,
        };
        match Scenario::load(arg) {
            Ok(sc) => emit(out, YkScenario(sc)),
            Err(e) => fail(YkStatus::Scenario, e.to_string()),
        }
    })
}

/// Parses a scenario from TOML text.
///
/// # Safety
/// `text` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ykreg_scenario_from_toml(
    text: *const c_char,
    out: *mut *mut YkScenario,
) -> YkStatus {
    guard(|| {
        if out.is_null() {
            return fail(YkStatus::NullPointer, "out is null");
        }
        let src = match cstr(text) {
            Ok(s) => s,
            Err(st) => return st,
        };
        match Scenario::from_toml_str(src) {
            Ok(sc) => emit(out, YkScenario(sc)),
            Err(e) => fail(YkStatus::Scenario, e.to_string()),
        }
    })
}

/// # Safety
/// `sc` must be null or a handle from a scenario constructor, freed once.
#[no_mangle]
pub unsafe extern "C" fn ykreg_scenario_free(sc: *mut YkScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Designs the parameter gains, or evaluates the fixed gains of the scenario.
///
/// # Safety
/// `sc` must be a live scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ykreg_design(sc: *const YkScenario, out: *mut *mut YkDesign) -> YkStatus {
    guard(|| {
        let sc = deref!(sc);
        if out.is_null() {
            return fail(YkStatus::NullPointer, "out is null");
        }
        match sc.0.design() {
            Ok(d) => emit(out, YkDesign(d)),
            Err(e) => fail(YkStatus::Design, e.to_string()),
        }
    })
}

/// # Safety
/// `d` must be null or a handle from [`ykreg_design`], freed once.
#[no_mangle]
pub unsafe extern "C" fn ykreg_design_free(d: *mut YkDesign) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Copies the gains `a_0..a_N`.
///
/// # Safety
/// `d` must be a live design handle; `buf` null or valid for `cap` values;
/// `len_out` null or valid.
#[no_mangle]
pub unsafe extern "C" fn ykreg_design_gains(
    d: *const YkDesign,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> YkStatus {
    guard(|| copy_out(deref!(d).0.qm.gains(), buf, cap, len_out))
}

/// Copies `|S|` at DC (when targeted) followed by each harmonic.
///
/// # Safety
/// Same contract as [`ykreg_design_gains`].
#[no_mangle]
pub unsafe extern "C" fn ykreg_design_sensitivity_at_harmonics(
    d: *const YkDesign,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> YkStatus {
    guard(|| copy_out(&deref!(d).0.sensitivity_at_harmonics, buf, cap, len_out))
}

/// Residual, numerical rank and condition number of the solved system.
///
/// # Safety
/// `d` must be a live design handle; each output pointer null or valid.
#[no_mangle]
pub unsafe extern "C" fn ykreg_design_summary(
    d: *const YkDesign,
    residual_inf: *mut f64,
    rank: *mut usize,
    condition: *mut f64,
) -> YkStatus {
    guard(|| {
        let d = &deref!(d).0;
        if !residual_inf.is_null() {
            *residual_inf = d.residual_inf;
        }
        if !rank.is_null() {
            *rank = d.rank;
        }
        if !condition.is_null() {
            *condition = d.condition;
        }
        YkStatus::Ok
    })
}

/// 1 when every targeted `|S|` is at most `tol` and the system has full row
/// rank, 0 otherwise (including for a null handle).
///
/// # Safety
/// `d` must be null or a live design handle.
#[no_mangle]
pub unsafe extern "C" fn ykreg_design_passes(d: *const YkDesign, tol: f64) -> i32 {
    match d.as_ref() {
        Some(d) => i32::from(d.0.passes(tol) && !d.0.is_rank_deficient()),
        None => 0,
    }
}

fn parameter(sc: &Scenario, d: Option<&YkDesign>) -> Result<FirDelayParameter, YkStatus> {
    match d {
        Some(d) => Ok(d.0.qm.clone()),
        None => FirDelayParameter::zero(sc.spacing(), sc.count())
            .map_err(|e| fail(YkStatus::Design, e.to_string())),
    }
}

/// Evaluates the closed-loop sensitivity at `s = jω`. A null design uses the
/// zero parameter.
///
/// # Safety
/// `sc` must be a live scenario handle, `d` null or a live design handle,
/// `re` and `im` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ykreg_sensitivity_eval(
    sc: *const YkScenario,
    d: *const YkDesign,
    omega: f64,
    re: *mut f64,
    im: *mut f64,
) -> YkStatus {
    guard(|| {
        let sc = &deref!(sc).0;
        if re.is_null() || im.is_null() {
            return fail(YkStatus::NullPointer, "output pointer is null");
        }
        if !omega.is_finite() {
            return fail(YkStatus::InvalidArgument, "frequency must be finite");
        }
        let q = match parameter(sc, d.as_ref()) {
            Ok(q) => q,
            Err(st) => return st,
        };
        let s = match assemble_sensitivity(&sc.plant_factors, &sc.controller_factors, &q) {
            Ok(s) => s,
            Err(e) => return fail(YkStatus::Design, e.to_string()),
        };
        match s.eval(Complex64::new(0.0, omega)) {
            Ok(v) => {
                *re = v.re;
                *im = v.im;
                YkStatus::Ok
            }
            Err(e) => fail(YkStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Simulates the scenario's closed loop. A null design runs the plain
/// stabilizing controller.
///
/// # Safety
/// `sc` must be a live scenario handle, `d` null or a live design handle,
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ykreg_simulate(
    sc: *const YkScenario,
    d: *const YkDesign,
    out: *mut *mut YkTimeSeries,
) -> YkStatus {
    guard(|| {
        let sc = &deref!(sc).0;
        if out.is_null() {
            return fail(YkStatus::NullPointer, "out is null");
        }
        let q = match parameter(sc, d.as_ref()) {
            Ok(q) => q,
            Err(st) => return st,
        };
        match simulate_closed_loop(&sc.sim_scenario(q)) {
            Ok(ts) => emit(out, YkTimeSeries(ts)),
            Err(e) => fail(YkStatus::Simulation, e.to_string()),
        }
    })
}

/// Number of samples, 0 for a null handle.
///
/// # Safety
/// `ts` must be null or a live time-series handle.
#[no_mangle]
pub unsafe extern "C" fn ykreg_time_series_len(ts: *const YkTimeSeries) -> usize {
    ts.as_ref().map_or(0, |t| t.0.len())
}

/// Copies one column of the time series.
///
/// # Safety
/// `ts` must be a live time-series handle; `buf` null or valid for `cap`
/// values; `len_out` null or valid.
#[no_mangle]
pub unsafe extern "C" fn ykreg_time_series_copy(
    ts: *const YkTimeSeries,
    column: YkColumn,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> YkStatus {
    guard(|| {
        let ts = &deref!(ts).0;
        let src = match column {
            YkColumn::Time => &ts.t,
            YkColumn::Output => &ts.y,
            YkColumn::Control => &ts.u,
            YkColumn::Disturbance => &ts.d,
            YkColumn::Error => &ts.e,
        };
        copy_out(src, buf, cap, len_out)
    })
}

/// # Safety
/// `ts` must be null or a handle from [`ykreg_simulate`], freed once.
#[no_mangle]
pub unsafe extern "C" fn ykreg_time_series_free(ts: *mut YkTimeSeries) {
    if !ts.is_null() {
        drop(Box::from_raw(ts));
    }
}

/// Locates sensitivity zeros and/or poles in the scenario's spectrum region.
///
/// # Safety
/// `sc` must be a live scenario handle, `d` null or a live design handle,
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ykreg_sensitivity_spectrum(
    sc: *const YkScenario,
    d: *const YkDesign,
    kind: YkRootKind,
    out: *mut *mut YkRootSet,
) -> YkStatus {
    guard(|| {
        let sc = &deref!(sc).0;
        if out.is_null() {
            return fail(YkStatus::NullPointer, "out is null");
        }
        let q = match parameter(sc, d.as_ref()) {
            Ok(q) => q,
            Err(st) => return st,
        };
        let spec = match sensitivity_spectrum(&sc.plant_factors, &sc.controller_factors, &q, &sc.region) {
            Ok(s) => s,
            Err(e) => return fail(YkStatus::Spectrum, e.to_string()),
        };
        let mut roots = Vec::new();
        if kind != YkRootKind::Poles {
            roots.extend(spec.zeros.inside().map(|r| (*r, RootKind::Zero)));
        }
        if kind != YkRootKind::Zeros {
            roots.extend(spec.poles.inside().map(|r| (*r, RootKind::Pole)));
        }
        emit(out, YkRootSet(roots))
    })
}

/// Number of roots, 0 for a null handle.
///
/// # Safety
/// `roots` must be null or a live root-set handle.
#[no_mangle]
pub unsafe extern "C" fn ykreg_roots_len(roots: *const YkRootSet) -> usize {
    roots.as_ref().map_or(0, |r| r.0.len())
}

/// Copies root locations and residuals into parallel arrays. `is_pole`
/// receives 1 for poles and 0 for zeros. Any output array may be null.
///
/// # Safety
/// `roots` must be a live root-set handle; each non-null array must hold
/// `cap` elements; `len_out` null or valid.
#[no_mangle]
pub unsafe extern "C" fn ykreg_roots_copy(
    roots: *const YkRootSet,
    re: *mut f64,
    im: *mut f64,
    residual: *mut f64,
    is_pole: *mut i32,
    cap: usize,
    len_out: *mut usize,
) -> YkStatus {
    guard(|| {
        let rs = &deref!(roots).0;
        if !len_out.is_null() {
            *len_out = rs.len();
        }
        let any = !(re.is_null() && im.is_null() && residual.is_null() && is_pole.is_null());
        if any && cap < rs.len() {
            return fail(
                YkStatus::BufferTooSmall,
                format!("buffers hold {cap} roots, {} needed", rs.len()),
            );
        }
        for (i, (r, k)) in rs.iter().enumerate() {
            if !re.is_null() {
                *re.add(i) = r.s.re;
            }
            if !im.is_null() {
                *im.add(i) = r.s.im;
            }
            if !residual.is_null() {
                *residual.add(i) = r.residual;
            }
            if !is_pole.is_null() {
                *is_pole.add(i) = i32::from(*k == RootKind::Pole);
            }
        }
        YkStatus::Ok
    })
}

/// # Safety
/// `roots` must be null or a handle from [`ykreg_sensitivity_spectrum`],
/// freed once.
#[no_mangle]
pub unsafe extern "C" fn ykreg_roots_free(roots: *mut YkRootSet) {
    if !roots.is_null() {
        drop(Box::from_raw(roots));
    }
}
