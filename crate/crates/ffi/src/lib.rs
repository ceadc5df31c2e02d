//! C ABI for `passive-gd`.
//!
//! Objects are opaque handles created by `*_new`/`*_run` functions and
//! released by the matching `*_free`. Every fallible call returns a
//! [`PgdStatus`]; on failure `pgd_last_error_message` describes the error on
//! the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use passive_gd::functions::{by_name, SectorFunction};
use passive_gd::interconnect::loop_equivalence_report;
use passive_gd::optim::{gd_run, gsgd_run, ArmijoParams, RunTrace, StepSchedule, StoppingRule, Termination};
use passive_gd::passivity::{certify_step_size, Classification, Verdict};
use passive_gd::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgdStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    Shape = 3,
    HorizonExceeded = 4,
    ContractionViolation = 5,
    DegenerateSector = 6,
    AlgebraicLoop = 7,
    NonConvergence = 8,
    Divergence = 9,
    LineSearchFailure = 10,
    Io = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgdVerdict {
    Strong = 0,
    Weak = 1,
    None = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgdClassification {
    Passive = 0,
    Isp = 1,
    Vsp = 2,
    None = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgdTermination {
    GradNorm = 0,
    PairedGrad = 1,
    MaxIter = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgdScheduleKind {
    FixedAlpha = 0,
    FixedS = 1,
    ArmijoAlpha = 2,
    ArmijoS = 3,
}

/// Step-size or scheduling rule.
///
/// `value` is the step for `FIXED_ALPHA`, the scheduling value for `FIXED_S`
/// and the cap for `ARMIJO_S` (ignored for `ARMIJO_ALPHA`). Non-positive
/// `armijo_*` fields select the library defaults.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PgdSchedule {
    pub kind: PgdScheduleKind,
    pub value: f64,
    pub armijo_initial: f64,
    pub armijo_shrink: f64,
    pub armijo_c: f64,
}

/// Stopping rules; a non-positive tolerance disables that rule and
/// `max_iter == 0` selects the default cap.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PgdStopping {
    pub grad_tol: f64,
    pub paired_tol: f64,
    pub max_iter: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PgdCertification {
    pub verdict: PgdVerdict,
    /// Candidate certificate scalar `1/alpha`.
    pub p: f64,
    pub lmi_feasible: bool,
    pub delta: f64,
    pub epsilon: f64,
    pub d: f64,
    /// False when the transformed indices are undefined.
    pub has_transformed: bool,
    pub delta_bar: f64,
    pub epsilon_bar: f64,
    pub transformed_class: PgdClassification,
}

/// Opaque sector-bounded objective.
pub struct PgdFunction(SectorFunction);

/// Opaque optimizer trace.
pub struct PgdTrace(RunTrace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PgdStatus {
    match e {
        Error::InvalidParameter(_) => PgdStatus::InvalidArgument,
        Error::Shape { .. } => PgdStatus::Shape,
        Error::HorizonExceeded { .. } => PgdStatus::HorizonExceeded,
        Error::ContractionViolation(_) => PgdStatus::ContractionViolation,
        Error::DegenerateSector(_) => PgdStatus::DegenerateSector,
        Error::AlgebraicLoop => PgdStatus::AlgebraicLoop,
        Error::NonConvergence { .. } => PgdStatus::NonConvergence,
        Error::Divergence { .. } => PgdStatus::Divergence,
        Error::LineSearchFailure { .. } => PgdStatus::LineSearchFailure,
        _ => PgdStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard<F>(body: F) -> PgdStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PgdStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer passed for {what}"));
            PgdStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".into());
            PgdStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: caller passes a pointer that is null or valid for reads.
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: caller guarantees `p` points to `n` readable doubles.
    Ok(unsafe { std::slice::from_raw_parts(p, n) })
}

unsafe fn slice_mut<'a>(p: *mut f64, n: usize, what: &'static str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: caller guarantees `p` points to `n` writable doubles.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, n) })
}

unsafe fn write<T>(p: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: caller guarantees `p` is valid for writes.
    unsafe { p.write(value) };
    Ok(())
}

/// Message for the last failed call on this thread, or null after a
/// successful call. Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn pgd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn pgd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a built-in function by name (`paper-oscillatory`, `quadratic`,
/// `diag-quadratic`).
///
/// # Safety
/// `name` must be a nul-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pgd_function_new(name: *const c_char, m: f64, l: f64, out: *mut *mut PgdFunction) -> PgdStatus {
    guard(|| {
        if name.is_null() {
            return Err(Failure::Null("name"));
        }
        // SAFETY: checked non-null; caller guarantees nul termination.
        let name = unsafe { CStr::from_ptr(name) }
            .to_str()
            .map_err(|_| Error::InvalidParameter("function name is not UTF-8".into()))?;
        let f = by_name(name, m, l)?;
        unsafe { write(out, Box::into_raw(Box::new(PgdFunction(f))), "out") }
    })
}

/// # Safety
/// `f` must be null or a handle from [`pgd_function_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pgd_function_free(f: *mut PgdFunction) {
    if !f.is_null() {
        // SAFETY: the handle was created by Box::into_raw.
        drop(unsafe { Box::from_raw(f) });
    }
}

/// Dimension of the function, 0 for a null handle.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pgd_function_dim(f: *const PgdFunction) -> usize {
    // SAFETY: caller contract.
    unsafe { f.as_ref() }.map_or(0, |f| f.0.dim())
}

/// # Safety
/// `f` must be a live handle, `x` must hold `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn pgd_function_value(f: *const PgdFunction, x: *const f64, n: usize, out: *mut f64) -> PgdStatus {
    guard(|| {
        let f = unsafe { as_ref(f, "function") }?;
        let x = unsafe { slice(x, n, "x") }?;
        let v = f.0.try_value(x)?;
        unsafe { write(out, v, "out") }
    })
}

/// Writes `∇f(x)` into `grad` (both of length `n`).
///
/// # Safety
/// `f` must be a live handle, `x` readable and `grad` writable for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pgd_function_gradient(f: *const PgdFunction, x: *const f64, n: usize, grad: *mut f64) -> PgdStatus {
    guard(|| {
        let f = unsafe { as_ref(f, "function") }?;
        let x = unsafe { slice(x, n, "x") }?;
        let g = f.0.try_gradient(x)?;
        unsafe { slice_mut(grad, n, "grad") }?.copy_from_slice(&g);
        Ok(())
    })
}

fn classification(c: Classification) -> PgdClassification {
    match c {
        Classification::Passive => PgdClassification::Passive,
        Classification::Isp => PgdClassification::Isp,
        Classification::Vsp => PgdClassification::Vsp,
        Classification::None => PgdClassification::None,
    }
}

/// Certifies step `alpha` for the sector class `(m, L)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pgd_certify_step_size(m: f64, l: f64, alpha: f64, out: *mut PgdCertification) -> PgdStatus {
    guard(|| {
        let v = certify_step_size(m, l, alpha)?;
        let t = v.transformed_indices;
        let cert = PgdCertification {
            verdict: match v.verdict {
                Verdict::Strong => PgdVerdict::Strong,
                Verdict::Weak => PgdVerdict::Weak,
                Verdict::None => PgdVerdict::None,
            },
            p: 1.0 / alpha,
            lmi_feasible: v.certificate.is_some(),
            delta: v.nabla_indices.delta,
            epsilon: v.nabla_indices.epsilon,
            d: v.d,
            has_transformed: t.is_some(),
            delta_bar: t.map_or(f64::NAN, |t| t.delta),
            epsilon_bar: t.map_or(f64::NAN, |t| t.epsilon),
            transformed_class: t.map_or(PgdClassification::None, |t| classification(t.classification)),
        };
        unsafe { write(out, cert, "out") }
    })
}

fn schedule(s: &PgdSchedule) -> StepSchedule {
    let mut params = ArmijoParams::default();
    if s.armijo_initial > 0.0 {
        params.initial = Some(s.armijo_initial);
    }
    if s.armijo_shrink > 0.0 {
        params.shrink = s.armijo_shrink;
    }
    if s.armijo_c > 0.0 {
        params.c = s.armijo_c;
    }
    match s.kind {
        PgdScheduleKind::FixedAlpha => StepSchedule::FixedAlpha(s.value),
        PgdScheduleKind::FixedS => StepSchedule::FixedS(s.value),
        PgdScheduleKind::ArmijoAlpha => StepSchedule::ArmijoAlpha(params),
        PgdScheduleKind::ArmijoS => StepSchedule::ArmijoS { params, cap: s.value },
    }
}

fn stopping(s: &PgdStopping) -> Vec<StoppingRule> {
    let mut rules = Vec::new();
    if s.grad_tol > 0.0 {
        rules.push(StoppingRule::GradNorm(s.grad_tol));
    }
    if s.paired_tol > 0.0 {
        rules.push(StoppingRule::PairedGrad(s.paired_tol));
    }
    if s.max_iter > 0 {
        rules.push(StoppingRule::MaxIter(s.max_iter));
    }
    rules
}

unsafe fn run_with(
    gsgd: bool,
    f: *const PgdFunction,
    x0: *const f64,
    n: usize,
    sched: *const PgdSchedule,
    stop: *const PgdStopping,
    out: *mut *mut PgdTrace,
) -> PgdStatus {
    guard(|| {
        let f = unsafe { as_ref(f, "function") }?;
        let x0 = unsafe { slice(x0, n, "x0") }?;
        let sched = schedule(unsafe { as_ref(sched, "schedule") }?);
        let stops = stopping(unsafe { as_ref(stop, "stopping") }?);
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let trace = if gsgd {
            gsgd_run(&f.0, x0, &sched, &stops)?
        } else {
            gd_run(&f.0, x0, &sched, &stops)?
        };
        unsafe { write(out, Box::into_raw(Box::new(PgdTrace(trace))), "out") }
    })
}

/// Runs gradient descent from `x0` (length `n`).
///
/// # Safety
/// Pointers must be live/readable as documented; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pgd_gd_run(
    f: *const PgdFunction,
    x0: *const f64,
    n: usize,
    schedule: *const PgdSchedule,
    stop: *const PgdStopping,
    out: *mut *mut PgdTrace,
) -> PgdStatus {
    unsafe { run_with(false, f, x0, n, schedule, stop, out) }
}

/// Runs gain-scheduled gradient descent from `x0` (length `n`).
///
/// # Safety
/// Same contract as [`pgd_gd_run`].
#[no_mangle]
pub unsafe extern "C" fn pgd_gsgd_run(
    f: *const PgdFunction,
    x0: *const f64,
    n: usize,
    schedule: *const PgdSchedule,
    stop: *const PgdStopping,
    out: *mut *mut PgdTrace,
) -> PgdStatus {
    unsafe { run_with(true, f, x0, n, schedule, stop, out) }
}

/// # Safety
/// `t` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn pgd_trace_free(t: *mut PgdTrace) {
    if !t.is_null() {
        // SAFETY: the handle was created by Box::into_raw.
        drop(unsafe { Box::from_raw(t) });
    }
}

/// Number of updates performed; the trace holds one more iterate.
///
/// # Safety
/// `t` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn pgd_trace_iterations(t: *const PgdTrace) -> usize {
    // SAFETY: caller contract.
    unsafe { t.as_ref() }.map_or(0, |t| t.0.iterations)
}

/// # Safety
/// `t` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn pgd_trace_dim(t: *const PgdTrace) -> usize {
    // SAFETY: caller contract.
    unsafe { t.as_ref() }.map_or(0, |t| t.0.iterates.dim())
}

/// # Safety
/// `t` must be a live trace handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pgd_trace_termination(t: *const PgdTrace, out: *mut PgdTermination) -> PgdStatus {
    guard(|| {
        let t = unsafe { as_ref(t, "trace") }?;
        let term = match t.0.termination {
            Termination::GradNormMet => PgdTermination::GradNorm,
            Termination::PairedGradMet => PgdTermination::PairedGrad,
            Termination::MaxIterHit => PgdTermination::MaxIter,
        };
        unsafe { write(out, term, "out") }
    })
}

unsafe fn copy_sample(t: *const PgdTrace, k: usize, out: *mut f64, n: usize, gradients: bool) -> PgdStatus {
    guard(|| {
        let t = unsafe { as_ref(t, "trace") }?;
        let sig = if gradients { &t.0.gradients } else { &t.0.iterates };
        let sample = sig.get(k).ok_or(Error::HorizonExceeded {
            requested: k,
            available: sig.horizon(),
        })?;
        if n != sample.len() {
            return Err(Error::Shape {
                expected: sample.len().to_string(),
                got: n.to_string(),
            }
            .into());
        }
        unsafe { slice_mut(out, n, "out") }?.copy_from_slice(sample);
        Ok(())
    })
}

/// Copies iterate `k` (0 ≤ k ≤ iterations) into `out` of length `n`.
///
/// # Safety
/// `t` must be a live trace handle and `out` writable for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pgd_trace_iterate(t: *const PgdTrace, k: usize, out: *mut f64, n: usize) -> PgdStatus {
    unsafe { copy_sample(t, k, out, n, false) }
}

/// Copies the gradient at iterate `k` into `out` of length `n`.
///
/// # Safety
/// Same contract as [`pgd_trace_iterate`].
#[no_mangle]
pub unsafe extern "C" fn pgd_trace_gradient(t: *const PgdTrace, k: usize, out: *mut f64, n: usize) -> PgdStatus {
    unsafe { copy_sample(t, k, out, n, true) }
}

/// Largest state deviation between plain GD and the loop-transformed
/// interconnection with `d = alpha/2` over `steps` steps.
///
/// # Safety
/// `f` must be a live handle, `x0` readable for `n` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pgd_loop_equivalence(
    f: *const PgdFunction,
    alpha: f64,
    x0: *const f64,
    n: usize,
    steps: usize,
    out: *mut f64,
) -> PgdStatus {
    guard(|| {
        let f = unsafe { as_ref(f, "function") }?;
        let x0 = unsafe { slice(x0, n, "x0") }?;
        let dev = loop_equivalence_report(&f.0, alpha, x0, steps)?;
        unsafe { write(out, dev, "out") }
    })
}
