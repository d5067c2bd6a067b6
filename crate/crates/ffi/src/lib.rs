//! C ABI over the `tricrit` solvers.
//!
//! Instances live behind an opaque handle; every result crosses the
//! boundary as a JSON string owned by the library and released with
//! [`tricrit_string_free`]. Functions return a [`TricritStatus`]; the text
//! of the most recent failure on the calling thread is available from
//! [`tricrit_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tricrit::cli::{self, Algo};
use tricrit::model::{beta, compute_c, Instance};
use tricrit::validate::validate;
use tricrit::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TricritStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidInstance = 4,
    Infeasible = 5,
    TooLarge = 6,
    InsufficientProcessors = 7,
    KindMismatch = 8,
    NotApplicable = 9,
    Internal = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TricritAlgorithm {
    ChainExact = 0,
    ChainFptas = 1,
    ChainFast = 2,
    /// Independent tasks; switches to the large-p variant when it applies.
    Indep = 3,
    IndepLargeP = 4,
    NoReplication = 5,
}

impl From<TricritAlgorithm> for Algo {
    fn from(a: TricritAlgorithm) -> Self {
        match a {
            TricritAlgorithm::ChainExact => Algo::ChainExact,
            TricritAlgorithm::ChainFptas => Algo::ChainFptas,
            TricritAlgorithm::ChainFast => Algo::ChainFast,
            TricritAlgorithm::Indep => Algo::Indep,
            TricritAlgorithm::IndepLargeP => Algo::IndepLargep,
            TricritAlgorithm::NoReplication => Algo::NoReplication,
        }
    }
}

/// Opaque instance handle.
pub struct TricritInstance {
    inner: Instance,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> TricritStatus {
    match err {
        Error::InvalidInstance(_) => TricritStatus::InvalidInstance,
        Error::InfeasibleDeadline(_) | Error::DegenerateDenominator => TricritStatus::Infeasible,
        Error::InstanceTooLarge { .. } => TricritStatus::TooLarge,
        Error::InsufficientProcessors { .. } => TricritStatus::InsufficientProcessors,
        Error::KindMismatch(_) => TricritStatus::KindMismatch,
        Error::NoRoot { .. } | Error::NotApplicable(_) => TricritStatus::NotApplicable,
    }
}

struct Failure(TricritStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn any_failure(e: anyhow::Error) -> Failure {
    let status = e.downcast_ref::<Error>().map_or(TricritStatus::Internal, status_of);
    Failure(status, format!("{e:#}"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TricritStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TricritStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TricritStatus::Internal
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(Failure(TricritStatus::NullPointer, "null string argument".into()));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Failure(TricritStatus::InvalidUtf8, e.to_string()))
}

unsafe fn instance_ref<'a>(inst: *const TricritInstance) -> Result<&'a Instance, Failure> {
    inst.as_ref()
        .map(|i| &i.inner)
        .ok_or_else(|| Failure(TricritStatus::NullPointer, "null instance handle".into()))
}

unsafe fn write_string(out: *mut *mut c_char, text: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(TricritStatus::NullPointer, "null output pointer".into()));
    }
    let c = CString::new(text).map_err(|e| Failure(TricritStatus::Internal, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

fn to_json(value: &impl serde::Serialize) -> Result<String, Failure> {
    serde_json::to_string(value).map_err(|e| Failure(TricritStatus::Internal, e.to_string()))
}

/// Parses an instance from JSON. On success `*out` owns a handle to be
/// released with [`tricrit_instance_free`].
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tricrit_instance_from_json(
    json: *const c_char,
    out: *mut *mut TricritInstance,
) -> TricritStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure(TricritStatus::NullPointer, "null output pointer".into()));
        }
        let text = read_str(json)?;
        serde_json::from_str::<serde_json::Value>(text)
            .map_err(|e| Failure(TricritStatus::ParseError, e.to_string()))?;
        let inner = Instance::from_json(text)?;
        *out = Box::into_raw(Box::new(TricritInstance { inner }));
        Ok(())
    })
}

/// # Safety
/// `inst` must be null or a handle from [`tricrit_instance_from_json`] not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn tricrit_instance_free(inst: *mut TricritInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Number of tasks, or 0 for a null handle.
///
/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tricrit_instance_task_count(inst: *const TricritInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.inner.n())
}

/// Runs `algorithm` and writes the solve document (algorithm, solution,
/// schedule, validation) to `*out`. `eps` is used by the chain FPTAS only.
///
/// # Safety
/// `inst` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tricrit_solve(
    inst: *const TricritInstance,
    algorithm: TricritAlgorithm,
    eps: f64,
    out: *mut *mut c_char,
) -> TricritStatus {
    guard(|| {
        let instance = instance_ref(inst)?;
        let (doc, _) = cli::solve_document(instance, algorithm.into(), eps).map_err(any_failure)?;
        write_string(out, to_json(&doc)?)
    })
}

/// Exhaustive reference solution for small instances.
///
/// # Safety
/// `inst` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tricrit_oracle(
    inst: *const TricritInstance,
    grid_steps: usize,
    out: *mut *mut c_char,
) -> TricritStatus {
    guard(|| {
        let instance = instance_ref(inst)?;
        let doc = cli::oracle_document(instance, grid_steps).map_err(any_failure)?;
        write_string(out, to_json(&doc)?)
    })
}

/// Checks a schedule (a record array or an object with a `schedule` field)
/// against `bound`; a non-positive or NaN bound means the instance deadline.
/// `*valid` receives the verdict and `*report` the full report.
///
/// # Safety
/// `inst` must be a live handle, `schedule_json` a NUL-terminated string,
/// `valid` and `report` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tricrit_validate(
    inst: *const TricritInstance,
    schedule_json: *const c_char,
    bound: f64,
    valid: *mut bool,
    report: *mut *mut c_char,
) -> TricritStatus {
    guard(|| {
        let instance = instance_ref(inst)?;
        let text = read_str(schedule_json)?;
        if valid.is_null() {
            return Err(Failure(TricritStatus::NullPointer, "null output pointer".into()));
        }
        let schedule =
            cli::parse_schedule(text).map_err(|e| Failure(TricritStatus::ParseError, format!("{e:#}")))?;
        let bound = if bound > 0.0 { bound } else { instance.deadline };
        let r = validate(instance, &schedule, bound);
        *valid = r.is_valid();
        write_string(report, to_json(&r)?)
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string produced by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn tricrit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tricrit_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Positive root of `7c^3 + 21c^2 - 3c - 1`.
#[no_mangle]
pub extern "C" fn tricrit_compute_c() -> f64 {
    compute_c()
}

/// Makespan stretch factor for `p` processors, NaN for `p = 0`.
#[no_mangle]
pub extern "C" fn tricrit_beta(p: usize) -> f64 {
    if p == 0 {
        f64::NAN
    } else {
        beta(p)
    }
}
