//! C ABI surface for the tdho library.
//!
//! Conventions: every fallible call returns a `TdhoStatus`; on failure a
//! human-readable message is stored in thread-local state and can be read
//! back with `tdho_last_error`.  Profiles are opaque heap objects created
//! from the same JSON wire format the CLI scenarios use, and must be
//! released with `tdho_profile_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::os::raw::c_double;
use std::ptr;

use tdho::{
    bogoliubov, kernel, sample_solution, solve_fundamental, vacuum_persistence, Error,
    FrequencyProfile, ProfileSpec,
};

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let clean: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).unwrap());
}

/// Status codes shared with the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TdhoStatus {
    Ok = 0,
    /// Invalid input: null pointer, malformed JSON, out-of-domain request.
    Usage = 2,
    /// A numerical routine failed to converge.
    Numeric = 3,
    /// Evaluation at a singular (caustic) configuration.
    Singular = 4,
    /// A self-check invariant failed beyond tolerance.
    Invariant = 5,
}

fn status_of(e: &Error) -> TdhoStatus {
    match e.exit_code() {
        3 => TdhoStatus::Numeric,
        4 => TdhoStatus::Singular,
        5 => TdhoStatus::Invariant,
        _ => TdhoStatus::Usage,
    }
}

fn fail(e: Error) -> TdhoStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn usage(msg: &str) -> TdhoStatus {
    set_error(msg);
    TdhoStatus::Usage
}

/// Opaque frequency-profile handle.
pub struct TdhoProfile {
    inner: FrequencyProfile,
}

/// A complex number in Cartesian form.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct TdhoComplex {
    pub re: c_double,
    pub im: c_double,
}

impl From<num_complex::Complex64> for TdhoComplex {
    fn from(z: num_complex::Complex64) -> Self {
        TdhoComplex { re: z.re, im: z.im }
    }
}

/// Fundamental solution pair on `[t0, t]` together with its derivatives.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct TdhoPair {
    pub t0: c_double,
    pub t: c_double,
    pub c: c_double,
    pub s: c_double,
    pub c_dot: c_double,
    pub s_dot: c_double,
}

/// Copies the message of the most recent error on this thread into `buf`
/// (NUL-terminated, truncated to `len` bytes) and returns the full length
/// of the message, excluding the terminator.  `buf` may be null to query
/// the length only.
#[no_mangle]
pub unsafe extern "C" fn tdho_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            // Always terminate, even when truncating.
            *buf.add(n - 1) = 0;
        }
        bytes.len() - 1
    })
}

/// Builds a profile from its JSON description, e.g.
/// `{"kind": "mathieu", "a": 2.0, "b": 0.3}`.  On success `*out` owns the
/// new handle.
#[no_mangle]
pub unsafe extern "C" fn tdho_profile_from_json(
    json: *const c_char,
    out: *mut *mut TdhoProfile,
) -> TdhoStatus {
    if json.is_null() || out.is_null() {
        return usage("tdho_profile_from_json: null pointer");
    }
    let text = match CStr::from_ptr(json).to_str() {
        Ok(t) => t,
        Err(_) => return usage("profile JSON is not valid UTF-8"),
    };
    let spec: ProfileSpec = match serde_json::from_str(text) {
        Ok(s) => s,
        Err(e) => return fail(e.into()),
    };
    match FrequencyProfile::from_spec(&spec) {
        Ok(profile) => {
            *out = Box::into_raw(Box::new(TdhoProfile { inner: profile }));
            TdhoStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Releases a profile handle.  Passing null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn tdho_profile_free(profile: *mut TdhoProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

unsafe fn profile_ref<'a>(p: *const TdhoProfile) -> Option<&'a FrequencyProfile> {
    p.as_ref().map(|p| &p.inner)
}

/// Integrates the fundamental pair `(c, s)` from `t0` to `t`.
#[no_mangle]
pub unsafe extern "C" fn tdho_solve_fundamental(
    profile: *const TdhoProfile,
    t0: c_double,
    t: c_double,
    tol: c_double,
    out: *mut TdhoPair,
) -> TdhoStatus {
    let Some(p) = profile_ref(profile) else {
        return usage("tdho_solve_fundamental: null profile");
    };
    if out.is_null() {
        return usage("tdho_solve_fundamental: null output");
    }
    match solve_fundamental(p, t0, t, tol) {
        Ok(pair) => {
            *out = TdhoPair {
                t0: pair.t0,
                t: pair.t,
                c: pair.c,
                s: pair.s,
                c_dot: pair.c_dot,
                s_dot: pair.s_dot,
            };
            TdhoStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Number of zeros of `s` on `(t0, t]` (the branch index of the kernel).
#[no_mangle]
pub unsafe extern "C" fn tdho_branch_index(
    profile: *const TdhoProfile,
    t0: c_double,
    t: c_double,
    out: *mut i64,
) -> TdhoStatus {
    let Some(p) = profile_ref(profile) else {
        return usage("tdho_branch_index: null profile");
    };
    if out.is_null() {
        return usage("tdho_branch_index: null output");
    }
    let res = sample_solution(p, t0, t, false, 1e-12)
        .and_then(|samples| tdho::index_of(&samples, t0, t));
    match res {
        Ok(count) => {
            *out = count.m;
            TdhoStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Bogoliubov coefficients of the evolution relative to the frequency
/// `omega` reference oscillator; `|a|^2 - |b|^2 = 1`.
#[no_mangle]
pub unsafe extern "C" fn tdho_bogoliubov(
    profile: *const TdhoProfile,
    t0: c_double,
    t: c_double,
    omega: c_double,
    out_a: *mut TdhoComplex,
    out_b: *mut TdhoComplex,
) -> TdhoStatus {
    let Some(p) = profile_ref(profile) else {
        return usage("tdho_bogoliubov: null profile");
    };
    if out_a.is_null() || out_b.is_null() {
        return usage("tdho_bogoliubov: null output");
    }
    let res = solve_fundamental(p, t0, t, 1e-12).and_then(|pair| bogoliubov(&pair, omega));
    match res {
        Ok(bg) => {
            *out_a = bg.a.into();
            *out_b = bg.b.into();
            TdhoStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Pointwise propagator `K(q, t; q0, t0)`.  Returns `Singular` at a
/// caustic, where the kernel is a delta distribution.
#[no_mangle]
pub unsafe extern "C" fn tdho_kernel(
    profile: *const TdhoProfile,
    t0: c_double,
    t: c_double,
    q: c_double,
    q0: c_double,
    out: *mut TdhoComplex,
) -> TdhoStatus {
    let Some(p) = profile_ref(profile) else {
        return usage("tdho_kernel: null profile");
    };
    if out.is_null() {
        return usage("tdho_kernel: null output");
    }
    let res = solve_fundamental(p, t0, t, 1e-12).and_then(|pair| {
        let samples = sample_solution(p, t0, t, false, 1e-12)?;
        let m = tdho::index_of(&samples, t0, t)?.m;
        kernel(&pair, m, q, q0)
    });
    match res {
        Ok(k) => {
            *out = k.into();
            TdhoStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Transition amplitude between eigenstates `n1` (frequency `omega1`, at
/// `t0`) and `n2` (frequency `omega2`, at `t`).
#[no_mangle]
pub unsafe extern "C" fn tdho_transition_amplitude(
    profile: *const TdhoProfile,
    t0: c_double,
    t: c_double,
    omega1: c_double,
    n1: usize,
    omega2: c_double,
    n2: usize,
    out: *mut TdhoComplex,
) -> TdhoStatus {
    let Some(p) = profile_ref(profile) else {
        return usage("tdho_transition_amplitude: null profile");
    };
    if out.is_null() {
        return usage("tdho_transition_amplitude: null output");
    }
    let res = solve_fundamental(p, t0, t, 1e-12).and_then(|pair| {
        let samples = sample_solution(p, t0, t, false, 1e-12)?;
        let m = tdho::index_of(&samples, t0, t)?.m;
        tdho::amplitude(&pair, m, omega1, n1, omega2, n2)
    });
    match res {
        Ok(a) => {
            *out = a.into();
            TdhoStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Vacuum persistence amplitude `<0, t | 0, t0>` for the frequency
/// `omega` reference vacuum.
#[no_mangle]
pub unsafe extern "C" fn tdho_vacuum_persistence(
    profile: *const TdhoProfile,
    t0: c_double,
    t: c_double,
    omega: c_double,
    out: *mut TdhoComplex,
) -> TdhoStatus {
    let Some(p) = profile_ref(profile) else {
        return usage("tdho_vacuum_persistence: null profile");
    };
    if out.is_null() {
        return usage("tdho_vacuum_persistence: null output");
    }
    let res = solve_fundamental(p, t0, t, 1e-12).and_then(|pair| {
        let samples = sample_solution(p, t0, t, false, 1e-12)?;
        let m = tdho::index_of(&samples, t0, t)?.m;
        vacuum_persistence(&pair, m, omega)
    });
    match res {
        Ok(v) => {
            *out = v.into();
            TdhoStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Runs a JSON scenario (same schema as the CLI) and returns the run
/// manifest as a JSON string in `*out_manifest`.  Free the string with
/// `tdho_string_free`.
#[no_mangle]
pub unsafe extern "C" fn tdho_run_scenario(
    json: *const c_char,
    tol: c_double,
    out_manifest: *mut *mut c_char,
) -> TdhoStatus {
    if json.is_null() || out_manifest.is_null() {
        return usage("tdho_run_scenario: null pointer");
    }
    let text = match CStr::from_ptr(json).to_str() {
        Ok(t) => t,
        Err(_) => return usage("scenario JSON is not valid UTF-8"),
    };
    let res = tdho::scenario::parse_scenario(text)
        .and_then(|scenario| tdho::scenario::run(&scenario, tol));
    match res {
        Ok(output) => {
            let manifest = output.manifest.to_string();
            let cstr = CString::new(manifest).unwrap_or_default();
            *out_manifest = cstr.into_raw();
            TdhoStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Releases a string returned by this library.  Passing null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn tdho_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
