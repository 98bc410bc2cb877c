//! C ABI over the dosefind engine.
//!
//! Every fallible call returns a `DfStatus`; on failure a message for the
//! calling thread is available from `df_last_error`. Objects cross the
//! boundary as opaque handles that the caller releases with the matching
//! `*_free` function. Dose levels are one-based, with 0 meaning "none".

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dosefind::design::{decide, DoseGrid, DoseLevel, TrialDesign};
use dosefind::drm::{
    grid_posterior, CoefficientPrior, DoseData, DoseResponseModel, GridSpec, PointEstimate,
};
use dosefind::estimate::{Admissibility, DrmEstimator, MtdEstimator, PavaEstimator};
use dosefind::trial::{CohortOutcome, TrialState, TrialStatus};
use dosefind::{Action, Error, Link};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidDesign = 3,
    InvalidGrid = 4,
    InvalidOutcome = 5,
    NotRunning = 6,
    InvalidModel = 7,
    Numerical = 8,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfAction {
    Deescalate = -1,
    Retain = 0,
    Escalate = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfTrialStatus {
    Running = 0,
    Completed = 1,
    StoppedAllEliminated = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfLink {
    Logit = 0,
    LogLog = 1,
    CLogLog = 2,
}

/// Outcome of one cohort.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DfDecision {
    pub action: DfAction,
    pub next_dose: u32,
    /// Lowest dose newly eliminated by this cohort, or 0.
    pub first_eliminated: u32,
    pub status: DfTrialStatus,
}

pub struct DfDesign(TrialDesign);

pub struct DfTrial {
    design: TrialDesign,
    state: TrialState,
}

pub struct DfModel(DoseResponseModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(DfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidDesign(_) => DfStatus::InvalidDesign,
            Error::InvalidGrid(_) => DfStatus::InvalidGrid,
            Error::InvalidOutcome(_) => DfStatus::InvalidOutcome,
            Error::NotRunning(_) => DfStatus::NotRunning,
            Error::InvalidModel(_) => DfStatus::InvalidModel,
            Error::PosteriorUnderflow | Error::OptimizationFailed(_) => DfStatus::Numerical,
            _ => DfStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DfStatus::NullPointer, format!("{what} is null"))
}

fn bad(msg: impl Into<String>) -> Failure {
    Failure(DfStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DfStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            DfStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    let slot = get_mut(out, what)?;
    *slot = value;
    Ok(())
}

fn number(level: Option<DoseLevel>) -> u32 {
    level.map_or(0, |d| d.number() as u32)
}

fn action(a: Action) -> DfAction {
    match a {
        Action::Escalate => DfAction::Escalate,
        Action::Retain => DfAction::Retain,
        Action::Deescalate => DfAction::Deescalate,
    }
}

fn status(s: TrialStatus) -> DfTrialStatus {
    match s {
        TrialStatus::Running => DfTrialStatus::Running,
        TrialStatus::Completed => DfTrialStatus::Completed,
        TrialStatus::StoppedAllEliminated => DfTrialStatus::StoppedAllEliminated,
    }
}

/// Message for the last failed call on this thread, or NULL after a
/// success. Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn df_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn df_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version string"),
        };
    VERSION.as_ptr()
}

/// Creates a design. Pass `phi1 = phi2 = 0` for the default probes
/// (0.6 and 1.4 times `phi`).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn df_design_new(
    phi: f64,
    phi1: f64,
    phi2: f64,
    cohort_size: u32,
    n_cohorts: u32,
    out: *mut *mut DfDesign,
) -> DfStatus {
    guard(|| {
        let mut b = TrialDesign::builder(phi).cohorts(cohort_size, n_cohorts);
        if phi1 != 0.0 || phi2 != 0.0 {
            b = b.probes(phi1, phi2);
        }
        let design = b.build()?;
        put(out, Box::into_raw(Box::new(DfDesign(design))), "out")
    })
}

/// # Safety
/// `design` must be NULL or a handle from `df_design_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn df_design_free(design: *mut DfDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// # Safety
/// `design` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_design_boundaries(
    design: *const DfDesign,
    lambda_e: *mut f64,
    lambda_d: *mut f64,
) -> DfStatus {
    guard(|| {
        let b = get(design, "design")?.0.boundaries();
        put(lambda_e, b.escalate, "lambda_e")?;
        put(lambda_d, b.deescalate, "lambda_d")
    })
}

/// Decision for `m` DLTs among `n` patients at the current dose.
///
/// # Safety
/// `design` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_decide(
    design: *const DfDesign,
    n: u32,
    m: u32,
    out: *mut DfAction,
) -> DfStatus {
    guard(|| {
        let d = &get(design, "design")?.0;
        if m > n {
            return Err(bad(format!("{m} DLTs among {n} patients")));
        }
        put(out, action(decide(n, m, d)?), "out")
    })
}

/// Whether the elimination rule fires for `(n, m)`.
///
/// # Safety
/// `design` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_check_elimination(
    design: *const DfDesign,
    n: u32,
    m: u32,
    out: *mut bool,
) -> DfStatus {
    guard(|| {
        let d = &get(design, "design")?.0;
        if m > n {
            return Err(bad(format!("{m} DLTs among {n} patients")));
        }
        put(out, d.is_eliminated(n, m), "out")
    })
}

/// Starts a trial at dose 1. The design is copied.
///
/// # Safety
/// `design` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_trial_new(
    design: *const DfDesign,
    n_doses: usize,
    out: *mut *mut DfTrial,
) -> DfStatus {
    guard(|| {
        let design = get(design, "design")?.0.clone();
        let state = TrialState::new(n_doses)?;
        put(
            out,
            Box::into_raw(Box::new(DfTrial { design, state })),
            "out",
        )
    })
}

/// # Safety
/// `trial` must be NULL or a handle from `df_trial_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn df_trial_free(trial: *mut DfTrial) {
    if !trial.is_null() {
        drop(Box::from_raw(trial));
    }
}

/// Records a cohort at the current dose. On failure the trial is unchanged.
///
/// # Safety
/// `trial` must be a live handle not used concurrently; `out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn df_trial_apply_cohort(
    trial: *mut DfTrial,
    n: u32,
    dlt: u32,
    out: *mut DfDecision,
) -> DfStatus {
    guard(|| {
        let t = get_mut(trial, "trial")?;
        let mut next = t.state.clone();
        let decision = next.apply_cohort(&t.design, CohortOutcome { n, dlt })?;
        t.state = next;
        if !out.is_null() {
            *out = DfDecision {
                action: action(decision.action),
                next_dose: decision.next_dose.number() as u32,
                first_eliminated: number(decision.eliminations.first().copied()),
                status: status(t.state.status),
            };
        }
        Ok(())
    })
}

/// # Safety
/// `trial` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_trial_status(
    trial: *const DfTrial,
    out_status: *mut DfTrialStatus,
    out_dose: *mut u32,
) -> DfStatus {
    guard(|| {
        let t = get(trial, "trial")?;
        put(out_status, status(t.state.status), "out_status")?;
        put(out_dose, t.state.current_dose.number() as u32, "out_dose")
    })
}

/// Copies per-dose patients and DLTs into caller buffers of length `len`,
/// which must equal the number of doses.
///
/// # Safety
/// `n_out` and `m_out` must each point to `len` writable elements.
#[no_mangle]
pub unsafe extern "C" fn df_trial_counts(
    trial: *const DfTrial,
    n_out: *mut u32,
    m_out: *mut u32,
    len: usize,
) -> DfStatus {
    guard(|| {
        let t = get(trial, "trial")?;
        if len != t.state.n_doses() {
            return Err(bad(format!(
                "buffer length {len} but the trial has {} doses",
                t.state.n_doses()
            )));
        }
        slice_mut(n_out, len, "n_out")?.copy_from_slice(&t.state.n);
        slice_mut(m_out, len, "m_out")?.copy_from_slice(&t.state.m);
        Ok(())
    })
}

/// Isotonic MTD selection on the trial so far; writes 0 when none.
///
/// # Safety
/// `trial` must be a live handle; `out_mtd` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_trial_select_pava(
    trial: *const DfTrial,
    out_mtd: *mut u32,
) -> DfStatus {
    guard(|| {
        let t = get(trial, "trial")?;
        let sel = PavaEstimator.select(&t.state, &t.design)?;
        put(out_mtd, number(sel.mtd), "out_mtd")
    })
}

/// Weighted isotonic (nondecreasing) regression of `y` with weights `w`.
///
/// # Safety
/// `y`, `w` and `out` must each point to `len` elements; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn df_pava_fit(
    y: *const f64,
    w: *const f64,
    len: usize,
    out: *mut f64,
) -> DfStatus {
    guard(|| {
        let y = slice(y, len, "y")?;
        let w = slice(w, len, "w")?;
        if y.iter().chain(w).any(|v| !v.is_finite()) || w.iter().any(|&v| v <= 0.0) {
            return Err(bad("values must be finite and weights positive"));
        }
        let fit = dosefind::pava::pava_fit(y, w);
        slice_mut(out, len, "out")?.copy_from_slice(&fit);
        Ok(())
    })
}

/// Dose-response model `g(pi) = b0 + exp(b1) log(d / d*)` with independent
/// normal priors on `b0` and `b1`. `ref_index` is one-based.
///
/// # Safety
/// `doses` must point to `n_doses` values; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn df_model_new(
    link: DfLink,
    doses: *const f64,
    n_doses: usize,
    ref_index: u32,
    gamma0: f64,
    var0: f64,
    gamma1: f64,
    var1: f64,
    out: *mut *mut DfModel,
) -> DfStatus {
    guard(|| {
        let link = match link {
            DfLink::Logit => Link::Logit,
            DfLink::LogLog => Link::LogLog,
            DfLink::CLogLog => Link::CLogLog,
        };
        let doses = slice(doses, n_doses, "doses")?.to_vec();
        let reference = DoseLevel::from_number(ref_index as usize)
            .ok_or_else(|| bad("ref_index is one-based"))?;
        let grid = DoseGrid::new(doses, reference)?;
        let prior = CoefficientPrior::new(gamma0, var0, gamma1, var1)?;
        put(
            out,
            Box::into_raw(Box::new(DfModel(DoseResponseModel::new(link, grid, prior)))),
            "out",
        )
    })
}

/// # Safety
/// `model` must be NULL or a handle from `df_model_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn df_model_free(model: *mut DfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Posterior mean DLT probability per dose given counts, by grid quadrature.
///
/// # Safety
/// `n`, `m` and `out` must each point to `len` elements; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn df_model_posterior_mean(
    model: *const DfModel,
    n: *const u32,
    m: *const u32,
    len: usize,
    out: *mut f64,
) -> DfStatus {
    guard(|| {
        let model = &get(model, "model")?.0;
        let data = DoseData::new(slice(n, len, "n")?.to_vec(), slice(m, len, "m")?.to_vec())?;
        let summary = grid_posterior(model, &data, GridSpec::default(), PointEstimate::Mean)?;
        slice_mut(out, len, "out")?.copy_from_slice(&summary.estimates);
        Ok(())
    })
}

/// Dose-response MTD selection for a trial; writes 0 when none. With
/// `treated_only` false, eliminated doses are excluded; with true, every
/// treated dose is eligible unless the trial stopped early.
///
/// # Safety
/// `model` and `trial` must be live handles; `out_mtd` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_model_select(
    model: *const DfModel,
    trial: *const DfTrial,
    treated_only: bool,
    out_mtd: *mut u32,
) -> DfStatus {
    guard(|| {
        let model = &get(model, "model")?.0;
        let t = get(trial, "trial")?;
        if model.grid().len() != t.state.n_doses() {
            return Err(bad("model and trial have different numbers of doses"));
        }
        let admissibility = if treated_only {
            Admissibility::Treated
        } else {
            Admissibility::NotEliminated
        };
        let sel = DrmEstimator::new(model.clone())
            .with_admissibility(admissibility)
            .select(&t.state, &t.design)?;
        put(out_mtd, number(sel.mtd), "out_mtd")
    })
}
