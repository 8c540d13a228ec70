//! C ABI for the qsample simulator.
//!
//! Objects are opaque handles created by `qs_*_new`-style functions and
//! released by the matching `qs_*_free`. Every fallible call returns a
//! `QsStatus`; on failure `qs_last_error_message` describes the error.
//! Strings handed out by the library must be released with
//! `qs_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qsample::filter::{synthesize_filter, ChebyshevFilter};
use qsample::fpaa::{make_schedule, PhaseSchedule, ProjectorMode};
use qsample::gadget::build_gadget;
use qsample::gibbs::{gibbs_qsample_run, GibbsModel};
use qsample::markov::{build_glauber_chain, ChainFile, IsingLadder, MarkovChain};
use qsample::walk::WalkSpectrum;
use qsample::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    NotStochastic = 3,
    NotReversible = 4,
    GapTooSmall = 5,
    SizeGuard = 6,
    Precondition = 7,
    Certification = 8,
    Parse = 9,
    Numeric = 10,
    BufferTooSmall = 11,
    Io = 12,
    Internal = 13,
}

/// Validated reversible Markov chain.
pub struct QsChain(MarkovChain);
/// Spectral data of the qubitized walk of a chain.
pub struct QsWalk(WalkSpectrum);
/// Chebyshev gap filter.
pub struct QsFilter(ChebyshevFilter);
/// Fixed-point phase schedule.
pub struct QsSchedule(PhaseSchedule);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QsStatus {
    match e {
        Error::InvalidParameter(_) | Error::Configuration(_) | Error::GapMismatch { .. } | Error::InvalidState(_) => {
            QsStatus::InvalidParameter
        }
        Error::NotStochastic(_) => QsStatus::NotStochastic,
        Error::ReversibilityViolation { .. } | Error::Structural(_) => QsStatus::NotReversible,
        Error::GapTooSmall { .. } => QsStatus::GapTooSmall,
        Error::SizeGuard { .. } => QsStatus::SizeGuard,
        Error::Precondition { .. } => QsStatus::Precondition,
        Error::Certification(_) => QsStatus::Certification,
        Error::Parse(_) => QsStatus::Parse,
        Error::NumericFailure(_) => QsStatus::Numeric,
        Error::Io(_) => QsStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (QsStatus, String)>) -> QsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            QsStatus::Ok
        }
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            QsStatus::Internal
        }
    }
}

fn lib<T>(r: qsample::Result<T>) -> Result<T, (QsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (QsStatus, String) {
    (QsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (QsStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), (QsStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), (QsStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = v;
    Ok(())
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), (QsStatus, String)> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < src.len() {
        return Err((
            QsStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

unsafe fn str_in<'a>(s: *const c_char, what: &str) -> Result<&'a str, (QsStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| (QsStatus::Parse, format!("{what} is not UTF-8: {e}")))
}

fn string_out(s: String) -> *mut c_char {
    CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Release with
/// `qs_string_free`.
#[no_mangle]
pub extern "C" fn qs_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(c) => c.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn qs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Chain from a row-major `n × n` transition matrix.
///
/// # Safety
/// `p` must point to `n * n` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn qs_chain_from_rows(p: *const f64, n: usize, out: *mut *mut QsChain) -> QsStatus {
    guard(|| {
        if p.is_null() {
            return Err(null("matrix"));
        }
        let flat = std::slice::from_raw_parts(p, n * n);
        let rows: Vec<Vec<f64>> = flat.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        put(out, QsChain(lib(MarkovChain::from_rows(&rows))?))
    })
}

/// Chain from the JSON chain format `{"n", "P", "pi"?}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qs_chain_from_json(json: *const c_char, out: *mut *mut QsChain) -> QsStatus {
    guard(|| {
        let text = str_in(json, "json")?;
        let chain = lib(ChainFile::from_json(text).and_then(ChainFile::into_chain))?;
        put(out, QsChain(chain))
    })
}

/// Heat-bath Glauber chain on the `2 × cols` Ising ladder.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_chain_ising_ladder(cols: usize, beta: f64, lazy: bool, out: *mut *mut QsChain) -> QsStatus {
    guard(|| {
        let ladder = lib(IsingLadder::new(cols))?;
        put(out, QsChain(lib(build_glauber_chain(&ladder, beta, lazy))?))
    })
}

/// # Safety
/// `chain` must be NULL or a handle from this library, released once.
#[no_mangle]
pub unsafe extern "C" fn qs_chain_free(chain: *mut QsChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Number of states, or 0 for a NULL handle.
///
/// # Safety
/// `chain` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qs_chain_n(chain: *const QsChain) -> usize {
    chain.as_ref().map_or(0, |c| c.0.n())
}

/// # Safety
/// `chain` must be a live handle and `lambda2`, `delta` writable.
#[no_mangle]
pub unsafe extern "C" fn qs_chain_spectral_gap(chain: *const QsChain, lambda2: *mut f64, delta: *mut f64) -> QsStatus {
    guard(|| {
        let c = deref(chain, "chain")?;
        write(lambda2, c.0.lambda2())?;
        write(delta, c.0.delta())
    })
}

/// Copies the stationary distribution into `buf` (`len ≥ n`).
///
/// # Safety
/// `chain` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qs_chain_stationary(chain: *const QsChain, buf: *mut f64, len: usize) -> QsStatus {
    guard(|| {
        let c = deref(chain, "chain")?;
        copy_out(c.0.stationary().as_slice(), buf, len)
    })
}

/// # Safety
/// `chain` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qs_walk_new(chain: *const QsChain, out: *mut *mut QsWalk) -> QsStatus {
    guard(|| {
        let c = deref(chain, "chain")?;
        put(out, QsWalk(lib(WalkSpectrum::new(&c.0))?))
    })
}

/// # Safety
/// `walk` must be NULL or a handle from this library, released once.
#[no_mangle]
pub unsafe extern "C" fn qs_walk_free(walk: *mut QsWalk) {
    if !walk.is_null() {
        drop(Box::from_raw(walk));
    }
}

/// # Safety
/// `walk` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qs_walk_phase_gap(walk: *const QsWalk, out: *mut f64) -> QsStatus {
    guard(|| write(out, deref(walk, "walk")?.0.phase_gap()))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_filter_new(delta: f64, eps: f64, out: *mut *mut QsFilter) -> QsStatus {
    guard(|| put(out, QsFilter(lib(synthesize_filter(delta, eps))?)))
}

/// # Safety
/// `filter` must be NULL or a handle from this library, released once.
#[no_mangle]
pub unsafe extern "C" fn qs_filter_free(filter: *mut QsFilter) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}

/// # Safety
/// `filter` must be a live handle; `degree` and `achieved_eps` writable.
#[no_mangle]
pub unsafe extern "C" fn qs_filter_info(filter: *const QsFilter, degree: *mut u32, achieved_eps: *mut f64) -> QsStatus {
    guard(|| {
        let f = deref(filter, "filter")?;
        write(degree, f.0.d)?;
        write(achieved_eps, f.0.achieved_eps)
    })
}

/// # Safety
/// `filter` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qs_filter_eval(filter: *const QsFilter, theta: f64, out: *mut f64) -> QsStatus {
    guard(|| write(out, deref(filter, "filter")?.0.eval(theta)))
}

/// Error norm of the selective-phase gadget built from `walk` and `filter`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qs_gadget_error_norm(
    walk: *const QsWalk,
    filter: *const QsFilter,
    phi: f64,
    out: *mut f64,
) -> QsStatus {
    guard(|| {
        let w = deref(walk, "walk")?;
        let f = deref(filter, "filter")?;
        let g = lib(build_gadget(&w.0, &f.0, phi))?;
        write(out, g.error_norm())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_schedule_new(p_lower: f64, eps_fp: f64, out: *mut *mut QsSchedule) -> QsStatus {
    guard(|| put(out, QsSchedule(lib(make_schedule(p_lower, eps_fp))?)))
}

/// # Safety
/// `schedule` must be NULL or a handle from this library, released once.
#[no_mangle]
pub unsafe extern "C" fn qs_schedule_free(schedule: *mut QsSchedule) {
    if !schedule.is_null() {
        drop(Box::from_raw(schedule));
    }
}

/// Odd schedule length `L`, or 0 for a NULL handle.
///
/// # Safety
/// `schedule` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qs_schedule_length(schedule: *const QsSchedule) -> usize {
    schedule.as_ref().map_or(0, |s| s.0.l)
}

/// Copies the `(L − 1)/2` source and target angles into `alphas` and `betas`.
///
/// # Safety
/// `schedule` must be a live handle and both buffers valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qs_schedule_angles(
    schedule: *const QsSchedule,
    alphas: *mut f64,
    betas: *mut f64,
    len: usize,
) -> QsStatus {
    guard(|| {
        let s = deref(schedule, "schedule")?;
        copy_out(&s.0.alphas, alphas, len)?;
        copy_out(&s.0.betas, betas, len)
    })
}

/// Anneals along Glauber chains of the `2 × cols` ladder at `betas` after
/// checking adjacent overlaps, and returns the report as JSON. Release `json_out` with `qs_string_free`.
///
/// # Safety
/// `betas` must point to `n_betas` doubles and `json_out` be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_anneal_ladder(
    cols: usize,
    betas: *const f64,
    n_betas: usize,
    eps: f64,
    exact: bool,
    json_out: *mut *mut c_char,
) -> QsStatus {
    guard(|| {
        if betas.is_null() {
            return Err(null("betas"));
        }
        if json_out.is_null() {
            return Err(null("output pointer"));
        }
        let betas = std::slice::from_raw_parts(betas, n_betas).to_vec();
        let model = lib(GibbsModel::new(cols, betas))?;
        let mode = if exact { ProjectorMode::Exact } else { ProjectorMode::Compiled };
        let report = lib(gibbs_qsample_run(&model, eps, mode))?;
        let text = serde_json::to_string(&report).map_err(|e| (QsStatus::Internal, e.to_string()))?;
        *json_out = string_out(text);
        Ok(())
    })
}
