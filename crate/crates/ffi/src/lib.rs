//! C ABI over `dynasep`.
//!
//! Every fallible function returns a [`DynasepStatus`] and writes its result
//! through an out pointer. On failure the message is available from
//! [`dynasep_last_error_message`] on the same thread. Handles are opaque and
//! must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dynasep::dualities::{family_duality_residual, DualityEvaluator, DualityParams, Family};
use dynasep::lattice::Configuration;
use dynasep::processes::{jump_rate, Direction, ProcessKind, ProcessSpec};
use dynasep::simulate::{gillespie_run, Trajectory};
use dynasep::suite::{self, SuiteConfig};
use dynasep::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynasepStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Pole, vanishing denominator or negative rate.
    Numerical = 3,
    OutOfRange = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Process kinds, in the order of the library's `ProcessKind`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynasepProcessKind {
    Asep = 0,
    AsepR = 1,
    AsepL = 2,
    Ssep = 3,
    SsepR = 4,
    SsepL = 5,
    TazrpRight = 6,
    TazrpLeft = 7,
}

/// Duality families.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynasepFamily {
    KR = 0,
    KL = 1,
    KLV = 2,
    RV = 3,
    RVSum = 4,
    PVR = 5,
    PPrimeR = 6,
    KQtm = 7,
    KAff = 8,
    DTri = 9,
    DTriPrime = 10,
    DTazrp = 11,
    RHat = 12,
    PHatR = 13,
    KHat = 14,
}

/// Jump direction on the lattice.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynasepDirection {
    Right = 0,
    Left = 1,
}

/// Opaque process handle.
pub struct DynasepProcess {
    spec: ProcessSpec,
}

/// Opaque duality function handle.
pub struct DynasepDuality {
    eval: DualityEvaluator,
}

/// Opaque trajectory handle.
pub struct DynasepTrajectory {
    traj: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> DynasepStatus {
    match e {
        Error::IndexOutOfRange { .. } => DynasepStatus::OutOfRange,
        e if e.is_numerical() => DynasepStatus::Numerical,
        _ => DynasepStatus::InvalidArgument,
    }
}

fn fail(status: DynasepStatus, msg: impl Into<String>) -> DynasepStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting library errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), DynasepStatus>>(f: F) -> DynasepStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DynasepStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(DynasepStatus::Panic, "internal panic"),
    }
}

fn lib<T>(r: dynasep::Result<T>) -> Result<T, DynasepStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), DynasepStatus> {
    if p.is_null() {
        Err(fail(DynasepStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null only when `n == 0`, otherwise valid for `n` reads.
unsafe fn slice<'a>(p: *const u32, n: usize, what: &str) -> Result<&'a [u32], DynasepStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, n))
}

fn kind_of(k: DynasepProcessKind) -> ProcessKind {
    ProcessKind::ALL[k as usize]
}

fn family_of(f: DynasepFamily) -> Family {
    Family::ALL[f as usize]
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dynasep_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dynasep_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a process on `n_sites` sites with the given capacities.
/// `boundary` is `rho` for right-dynamic kinds, `lambda` for left-dynamic
/// kinds and ignored otherwise.
///
/// # Safety
/// `capacities` must be valid for `n_sites` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dynasep_process_new(
    kind: DynasepProcessKind,
    q: f64,
    boundary: f64,
    capacities: *const u32,
    n_sites: usize,
    out: *mut *mut DynasepProcess,
) -> DynasepStatus {
    guard(|| {
        non_null(out, "out")?;
        let caps = slice(capacities, n_sites, "capacities")?.to_vec();
        let spec = lib(ProcessSpec::new(kind_of(kind), q, boundary, caps))?;
        *out = Box::into_raw(Box::new(DynasepProcess { spec }));
        Ok(())
    })
}

/// Releases a process; null is ignored.
///
/// # Safety
/// `p` must come from [`dynasep_process_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dynasep_process_free(p: *mut DynasepProcess) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Rate of one particle jumping from 1-based `site` in `direction`; zero
/// for an illegal move.
///
/// # Safety
/// `p` must be a live handle, `occupations` valid for `n_sites` reads and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dynasep_process_jump_rate(
    p: *const DynasepProcess,
    occupations: *const u32,
    n_sites: usize,
    site: usize,
    direction: DynasepDirection,
    out: *mut f64,
) -> DynasepStatus {
    guard(|| {
        non_null(p, "process")?;
        non_null(out, "out")?;
        let spec = &(*p).spec;
        let occ = slice(occupations, n_sites, "occupations")?.to_vec();
        let config = lib(Configuration::new(occ, spec.capacities.clone()))?;
        let dir = match direction {
            DynasepDirection::Right => Direction::Right,
            DynasepDirection::Left => Direction::Left,
        };
        *out = lib(jump_rate(spec, &config, site, dir))?;
        Ok(())
    })
}

/// Largest relative row sum of the generator; infinite if any rate is
/// negative or crosses particle-number sectors.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dynasep_process_generator_residual(p: *const DynasepProcess, out: *mut f64) -> DynasepStatus {
    guard(|| {
        non_null(p, "process")?;
        non_null(out, "out")?;
        *out = lib(suite::generator_sanity(&(*p).spec))?;
        Ok(())
    })
}

/// Detailed-balance residual of the process against its reversible measure.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dynasep_process_reversibility_residual(
    p: *const DynasepProcess,
    out: *mut f64,
) -> DynasepStatus {
    guard(|| {
        non_null(p, "process")?;
        non_null(out, "out")?;
        let spec = &(*p).spec;
        let mu = lib(suite::reversible_measure(spec.kind))?;
        *out = lib(suite::reversibility_residual(spec, mu))?;
        Ok(())
    })
}

/// Creates a duality function. Parameters not used by `family` are ignored.
///
/// # Safety
/// `capacities` must be valid for `n_sites` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dynasep_duality_new(
    family: DynasepFamily,
    q: f64,
    rho: f64,
    lambda: f64,
    v: f64,
    capacities: *const u32,
    n_sites: usize,
    out: *mut *mut DynasepDuality,
) -> DynasepStatus {
    guard(|| {
        non_null(out, "out")?;
        let caps = slice(capacities, n_sites, "capacities")?.to_vec();
        let params = DualityParams { q, rho, lambda, v, capacities: caps };
        let eval = lib(DualityEvaluator::new(family_of(family), params))?;
        *out = Box::into_raw(Box::new(DynasepDuality { eval }));
        Ok(())
    })
}

/// Releases a duality function; null is ignored.
///
/// # Safety
/// `d` must come from [`dynasep_duality_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dynasep_duality_free(d: *mut DynasepDuality) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Value of the duality function at two occupation vectors of length
/// `n_sites`.
///
/// # Safety
/// `d` must be a live handle, `left` and `right` valid for `n_sites` reads
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dynasep_duality_eval(
    d: *const DynasepDuality,
    left: *const u32,
    right: *const u32,
    n_sites: usize,
    out: *mut f64,
) -> DynasepStatus {
    guard(|| {
        non_null(d, "duality")?;
        non_null(out, "out")?;
        let eval = &(*d).eval;
        let a = slice(left, n_sites, "left")?;
        let b = slice(right, n_sites, "right")?;
        let caps = &eval.params().capacities;
        if eval.family() != Family::DTazrp {
            if n_sites != caps.len() {
                return Err(fail(DynasepStatus::InvalidArgument, "occupation length differs from capacities"));
            }
            if a.iter().chain(b).zip(caps.iter().chain(caps)).any(|(&o, &c)| o > c) {
                return Err(fail(DynasepStatus::OutOfRange, "occupation exceeds capacity"));
            }
        }
        *out = lib(eval.eval_raw(a, b))?;
        Ok(())
    })
}

/// Generator-level duality residual on the full state space.
///
/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dynasep_duality_residual(d: *const DynasepDuality, out: *mut f64) -> DynasepStatus {
    guard(|| {
        non_null(d, "duality")?;
        non_null(out, "out")?;
        *out = lib(family_duality_residual(&(*d).eval))?;
        Ok(())
    })
}

/// Simulates the process from `initial` up to `t_end` with a fixed seed.
///
/// # Safety
/// `p` must be a live handle, `initial` valid for `n_sites` reads and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn dynasep_simulate(
    p: *const DynasepProcess,
    initial: *const u32,
    n_sites: usize,
    t_end: f64,
    seed: u64,
    out: *mut *mut DynasepTrajectory,
) -> DynasepStatus {
    guard(|| {
        non_null(p, "process")?;
        non_null(out, "out")?;
        let spec = &(*p).spec;
        let occ = slice(initial, n_sites, "initial")?.to_vec();
        let config = lib(Configuration::new(occ, spec.capacities.clone()))?;
        let traj = lib(gillespie_run(spec, &config, t_end, seed))?;
        *out = Box::into_raw(Box::new(DynasepTrajectory { traj }));
        Ok(())
    })
}

/// Releases a trajectory; null is ignored.
///
/// # Safety
/// `t` must come from [`dynasep_simulate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dynasep_trajectory_free(t: *mut DynasepTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of recorded states, the initial one included; 0 for null.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dynasep_trajectory_len(t: *const DynasepTrajectory) -> usize {
    if t.is_null() {
        0
    } else {
        (*t).traj.len()
    }
}

/// Time and occupations of state `index`. `occupations` receives
/// `n_sites` entries and must match the process size.
///
/// # Safety
/// `t` must be a live handle, `time` writable and `occupations` valid for
/// `n_sites` writes.
#[no_mangle]
pub unsafe extern "C" fn dynasep_trajectory_state(
    t: *const DynasepTrajectory,
    index: usize,
    time: *mut f64,
    occupations: *mut u32,
    n_sites: usize,
) -> DynasepStatus {
    guard(|| {
        non_null(t, "trajectory")?;
        non_null(time, "time")?;
        let traj = &(*t).traj;
        if index >= traj.len() {
            return Err(fail(DynasepStatus::OutOfRange, format!("state {index} of {}", traj.len())));
        }
        let state = &traj.states()[index];
        if n_sites < state.len() {
            return Err(fail(DynasepStatus::BufferTooSmall, format!("need {} sites", state.len())));
        }
        non_null(occupations, "occupations")?;
        ptr::copy_nonoverlapping(state.as_ptr(), occupations, state.len());
        *time = traj.times()[index];
        Ok(())
    })
}

/// Writes the trajectory as CSV to `path`.
///
/// # Safety
/// `t` must be a live handle and `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn dynasep_trajectory_write_csv(
    t: *const DynasepTrajectory,
    path: *const c_char,
) -> DynasepStatus {
    guard(|| {
        non_null(t, "trajectory")?;
        non_null(path, "path")?;
        let path =
            CStr::from_ptr(path).to_str().map_err(|_| fail(DynasepStatus::InvalidArgument, "path is not UTF-8"))?;
        let file =
            std::fs::File::create(path).map_err(|e| fail(DynasepStatus::InvalidArgument, format!("{path}: {e}")))?;
        lib((*t).traj.write_csv(std::io::BufWriter::new(file)))
    })
}

/// Runs acceptance criterion `n` (1 to 10) with default settings and
/// reports how many of its checks passed.
///
/// # Safety
/// `passed` and `total` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dynasep_run_criterion(n: u32, passed: *mut u32, total: *mut u32) -> DynasepStatus {
    guard(|| {
        non_null(passed, "passed")?;
        non_null(total, "total")?;
        let reports = lib(suite::criterion(n as usize, &SuiteConfig::default()))?;
        *passed = reports.iter().filter(|r| r.pass).count() as u32;
        *total = reports.len() as u32;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enums_follow_library_order() {
        for (i, k) in ProcessKind::ALL.iter().enumerate() {
            let c: DynasepProcessKind = unsafe { std::mem::transmute(i as u32) };
            assert_eq!(kind_of(c), *k);
        }
        for (i, f) in Family::ALL.iter().enumerate() {
            let c: DynasepFamily = unsafe { std::mem::transmute(i as u32) };
            assert_eq!(family_of(c), *f);
        }
    }
}
