//! C ABI for `qnd-mite`.
//!
//! Every fallible function returns a [`QmStatus`]; on failure the message is
//! available from [`qm_last_error_message`] on the same thread. Objects are
//! opaque handles created by `*_new`-style functions and released with the
//! matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use qnd_mite::cfunc::{c_approx1, c_approx2, c_exact, gaussian_width, CFuncParams, PhotonOutcome};
use qnd_mite::config::RunConfig;
use qnd_mite::mite::{estimate_energy, trajectory_rng, CumulativeCounters};
use qnd_mite::output::trajectory_csv_string;
use qnd_mite::protocols::{
    cluster_state_c4, run_trajectory, stage_configs_c4, C4Options, InitialState, PreparedProtocol,
    ProtocolRun,
};
use qnd_mite::statevec::StateVector;
use qnd_mite::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Parse = 4,
    Unsupported = 5,
    Numerical = 6,
    Io = 7,
    BufferTooSmall = 8,
    NotFound = 9,
    Panic = 10,
}

/// A normalized state vector.
pub struct QmState(StateVector);

/// A diagonalized protocol plan with its trackers.
pub struct QmPlan(PreparedProtocol);

/// The records of one protocol trajectory.
pub struct QmRun(ProtocolRun);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(QmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::DimensionMismatch { .. } | Error::TooManyQubits { .. } | Error::MismatchedStages => {
                QmStatus::DimensionMismatch
            }
            Error::InvalidPauli(_) | Error::InvalidParameter(_) => QmStatus::InvalidArgument,
            Error::Parse(_) => QmStatus::Parse,
            Error::Unsupported(_) => QmStatus::Unsupported,
            Error::Annihilated { .. } | Error::EmptyDistribution | Error::TruncationExceeded { .. } => {
                QmStatus::Numerical
            }
            Error::Io { .. } => QmStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QmStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {}", message));
            QmStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(QmStatus::NullPointer, format!("{} is null", what))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn in_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(QmStatus::InvalidArgument, format!("{} is not UTF-8: {}", what, e)))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn cfunc_value(
    alpha: f64,
    n_c: u32,
    n_d: u32,
    chi: f64,
    out: *mut f64,
    f: fn(&CFuncParams, f64) -> f64,
) -> QmStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out")? };
        let params = CFuncParams::new(alpha, PhotonOutcome::new(n_c, n_d))?;
        *out = f(&params, chi);
        Ok(())
    })
}

/// Exact C-function value.
///
/// # Safety
/// `out` must be a valid pointer to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn qm_c_exact(alpha: f64, n_c: u32, n_d: u32, chi: f64, out: *mut f64) -> QmStatus {
    cfunc_value(alpha, n_c, n_d, chi, out, c_exact)
}

/// Stirling (triangular-wave) Gaussian approximation.
///
/// # Safety
/// `out` must be a valid pointer to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn qm_c_approx1(alpha: f64, n_c: u32, n_d: u32, chi: f64, out: *mut f64) -> QmStatus {
    cfunc_value(alpha, n_c, n_d, chi, out, c_approx1)
}

/// `cos 2χ` Gaussian approximation.
///
/// # Safety
/// `out` must be a valid pointer to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn qm_c_approx2(alpha: f64, n_c: u32, n_d: u32, chi: f64, out: *mut f64) -> QmStatus {
    cfunc_value(alpha, n_c, n_d, chi, out, c_approx2)
}

/// Gaussian width `1/sqrt((1 + f) n)` of an outcome; fails for (0, 0).
///
/// # Safety
/// `out` must be a valid pointer to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn qm_gaussian_width(n_c: u32, n_d: u32, out: *mut f64) -> QmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = gaussian_width(PhotonOutcome::new(n_c, n_d))?;
        Ok(())
    })
}

/// Energy estimate from cumulative counts. `*defined` is false (and `*out`
/// untouched) when both counts are zero.
///
/// # Safety
/// `out` and `defined` must be valid writable pointers.
#[no_mangle]
pub unsafe extern "C" fn qm_estimate_energy(
    m_c: u64,
    m_d: u64,
    tau: f64,
    out: *mut f64,
    defined: *mut bool,
) -> QmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let defined = out_ref(defined, "defined")?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Failure(QmStatus::InvalidArgument, format!("tau must be positive, got {}", tau)));
        }
        match estimate_energy(CumulativeCounters { m_c, m_d }, tau) {
            Some(e) => {
                *out = e;
                *defined = true;
            }
            None => *defined = false,
        }
        Ok(())
    })
}

/// Haar-random state drawn from the stream seeded with `seed`.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to free
/// with [`qm_state_free`].
#[no_mangle]
pub unsafe extern "C" fn qm_state_random(num_qubits: usize, seed: u64, out: *mut *mut QmState) -> QmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let state = StateVector::random(num_qubits, &mut trajectory_rng(seed, 0))?;
        *out = boxed(QmState(state));
        Ok(())
    })
}

/// The four-qubit cluster state.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qm_state_cluster_c4(out: *mut *mut QmState) -> QmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = boxed(QmState(cluster_state_c4()));
        Ok(())
    })
}

/// State from `2^num_qubits` amplitudes split into real and imaginary
/// arrays; normalized on construction. `im` may be NULL for real input.
///
/// # Safety
/// `re` (and `im` when non-NULL) must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn qm_state_from_amplitudes(
    num_qubits: usize,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut QmState,
) -> QmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if re.is_null() {
            return Err(null("re"));
        }
        let re = std::slice::from_raw_parts(re, len);
        let amps: Vec<Complex64> = if im.is_null() {
            re.iter().map(|&r| Complex64::new(r, 0.0)).collect()
        } else {
            let im = std::slice::from_raw_parts(im, len);
            re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect()
        };
        *out = boxed(QmState(StateVector::new(num_qubits, amps)?));
        Ok(())
    })
}

/// Number of qubits, or 0 for a NULL handle.
///
/// # Safety
/// `state` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qm_state_num_qubits(state: *const QmState) -> usize {
    state.as_ref().map_or(0, |s| s.0.num_qubits())
}

/// Copies the amplitudes into caller buffers of length `len`, which must be
/// at least `2^num_qubits`.
///
/// # Safety
/// `re` and `im` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qm_state_amplitudes(
    state: *const QmState,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> QmStatus {
    guard(|| {
        let state = in_ref(state, "state")?;
        if re.is_null() || im.is_null() {
            return Err(null("output buffer"));
        }
        let amps = state.0.amplitudes();
        if len < amps.len() {
            return Err(Failure(
                QmStatus::BufferTooSmall,
                format!("need {} entries, buffer holds {}", amps.len(), len),
            ));
        }
        let re = std::slice::from_raw_parts_mut(re, amps.len());
        let im = std::slice::from_raw_parts_mut(im, amps.len());
        for (k, a) in amps.iter().enumerate() {
            re[k] = a.re;
            im[k] = a.im;
        }
        Ok(())
    })
}

/// `|<a|b>|²`.
///
/// # Safety
/// `a` and `b` must be live handles and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qm_state_fidelity(a: *const QmState, b: *const QmState, out: *mut f64) -> QmStatus {
    guard(|| {
        let (a, b) = (in_ref(a, "a")?, in_ref(b, "b")?);
        *out_ref(out, "out")? = a.0.fidelity(&b.0)?;
        Ok(())
    })
}

/// # Safety
/// `state` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qm_state_free(state: *mut QmState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// The four-stage cluster plan with default parameters.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qm_plan_cluster_c4(out: *mut *mut QmPlan) -> QmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let plan = stage_configs_c4(&C4Options::default())?.prepare()?;
        *out = boxed(QmPlan(plan));
        Ok(())
    })
}

/// Plan described by a TOML run configuration (same format as the CLI).
///
/// # Safety
/// `toml` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qm_plan_from_toml(toml: *const c_char, out: *mut *mut QmPlan) -> QmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let config = RunConfig::from_toml_str(in_str(toml, "toml")?)?;
        *out = boxed(QmPlan(config.build_plan()?.prepare()?));
        Ok(())
    })
}

/// Number of stages, or 0 for a NULL handle.
///
/// # Safety
/// `plan` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qm_plan_num_stages(plan: *const QmPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.0.stages().len())
}

/// # Safety
/// `plan` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qm_plan_free(plan: *mut QmPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Runs every stage of `plan`. A NULL `initial` draws a Haar-random start
/// from the same stream, matching trajectory 0 of the CLI for `seed`.
///
/// # Safety
/// `plan` must be a live handle, `initial` NULL or a live handle, `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qm_run_protocol(
    plan: *const QmPlan,
    initial: *const QmState,
    seed: u64,
    out: *mut *mut QmRun,
) -> QmStatus {
    guard(|| {
        let plan = in_ref(plan, "plan")?;
        let out = out_ref(out, "out")?;
        let start = match initial.as_ref() {
            Some(s) => InitialState::Fixed(s.0.clone()),
            None => InitialState::Random,
        };
        *out = boxed(QmRun(run_trajectory(&plan.0, &start, seed, 0)?));
        Ok(())
    })
}

/// Final value of the named tracker (for example `"F_C"`).
///
/// # Safety
/// `run` must be a live handle, `name` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qm_run_final_fidelity(run: *const QmRun, name: *const c_char, out: *mut f64) -> QmStatus {
    guard(|| {
        let run = in_ref(run, "run")?;
        let name = in_str(name, "name")?;
        let out = out_ref(out, "out")?;
        *out = run
            .0
            .final_fidelity(name)
            .ok_or_else(|| Failure(QmStatus::NotFound, format!("no tracker named '{}'", name)))?;
        Ok(())
    })
}

/// Total rounds over all stages, or 0 for a NULL handle.
///
/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qm_run_total_rounds(run: *const QmRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.total_rounds())
}

/// Copy of the final state as a new handle.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qm_run_final_state(run: *const QmRun, out: *mut *mut QmState) -> QmStatus {
    guard(|| {
        let run = in_ref(run, "run")?;
        *out_ref(out, "out")? = boxed(QmState(run.0.final_state.clone()));
        Ok(())
    })
}

/// Trajectory CSV (same layout as the CLI output) as a new string to release
/// with [`qm_string_free`].
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qm_run_to_csv(run: *const QmRun, out: *mut *mut c_char) -> QmStatus {
    guard(|| {
        let run = in_ref(run, "run")?;
        let out = out_ref(out, "out")?;
        let text = trajectory_csv_string(&run.0, 1)?;
        *out = CString::new(text)
            .map_err(|e| Failure(QmStatus::Parse, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `run` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qm_run_free(run: *mut QmRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
