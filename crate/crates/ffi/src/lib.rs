//! C ABI over the conflictsim orchestrator.
//!
//! Sessions live behind an opaque [`CsOrchestrator`] handle. Structured values
//! cross the boundary as UTF-8 JSON using the same field names as the HTTP API.
//! Strings returned through `out` pointers are owned by the caller and must be
//! released with [`cs_string_free`]. Every fallible call returns a
//! [`CsStatus`]; on failure [`cs_last_error`] describes what went wrong.
//!
//! The pure conflict functions ([`cs_conflict_start`], [`cs_apply_turn`],
//! [`cs_classify_style`]) use plain structs and need no handle.

use conflictsim::acts::ModalityEvent;
use conflictsim::affect::AffectCue;
use conflictsim::bus::{EventLog, FragmentParams};
use conflictsim::conflict::{
    self, ConflictError, ConflictLevel, ConflictPhase, ConflictState, EvaluationSource, Outcome, RegulationStyle,
    TeacherEvaluation,
};
use conflictsim::orchestrator::{
    verify_log, ErrorClass, Orchestrator, OrchestratorError, RatingRequest, SessionConfig,
};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A JSON argument did not parse into the expected shape.
    InvalidJson = 3,
    /// Unknown session id.
    NotFound = 4,
    /// Well-formed input the model rejects (bad level, phase regression, ...).
    Invalid = 5,
    /// The request clashes with session state (ended, wrong mode, duplicate).
    Conflict = 6,
    /// I/O or other internal failure.
    Internal = 7,
    /// A panic was caught at the boundary.
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStyle {
    ProblemSolve = 0,
    Force = 1,
    Smooth = 2,
    Withdraw = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsOutcome {
    None = 0,
    Escalation = 1,
    Resolution = 2,
}

/// Conflict state by value. Levels run 1..=7 (1 is optimal), phases 1..=4.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsConflictState {
    pub task_level: u8,
    pub rel_level: u8,
    pub phase: u8,
    pub cumulative_potential: i32,
    pub turn_count: u32,
    pub outcome: CsOutcome,
}

/// Opaque orchestrator handle. Safe to share across threads.
pub struct CsOrchestrator {
    inner: Orchestrator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let mut msg = msg.into();
    msg.retain(|c| c != '\0');
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(msg).ok());
}

struct Failure(CsStatus, String);

impl Failure {
    fn new(status: CsStatus, msg: impl Into<String>) -> Self {
        Failure(status, msg.into())
    }
}

impl From<OrchestratorError> for Failure {
    fn from(e: OrchestratorError) -> Self {
        let status = match e.class() {
            ErrorClass::NotFound => CsStatus::NotFound,
            ErrorClass::Invalid => CsStatus::Invalid,
            ErrorClass::Conflict => CsStatus::Conflict,
            ErrorClass::Internal => CsStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

impl From<ConflictError> for Failure {
    fn from(e: ConflictError) -> Self {
        let status = match e {
            ConflictError::Terminal(_) => CsStatus::Conflict,
            _ => CsStatus::Invalid,
        };
        Failure(status, e.to_string())
    }
}

/// Runs `f`, translating errors and panics into a status and the last-error slot.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            CsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {msg}"));
            CsStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(CsStatus::NullArgument, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(CsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn optional_text<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(Some)
    }
}

fn parse<T: for<'de> Deserialize<'de>>(json: &str, what: &str) -> Result<T, Failure> {
    serde_json::from_str(json).map_err(|e| Failure::new(CsStatus::InvalidJson, format!("{what}: {e}")))
}

unsafe fn orchestrator<'a>(p: *const CsOrchestrator) -> Result<&'a Orchestrator, Failure> {
    p.as_ref()
        .map(|h| &h.inner)
        .ok_or_else(|| Failure::new(CsStatus::NullArgument, "orchestrator handle is NULL"))
}

unsafe fn emit_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(CsStatus::NullArgument, "out is NULL"));
    }
    let c = CString::new(s).map_err(|_| Failure::new(CsStatus::Internal, "output contains NUL"))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn emit_json(out: *mut *mut c_char, value: &impl Serialize) -> Result<(), Failure> {
    let s = serde_json::to_string(value).map_err(|e| Failure::new(CsStatus::Internal, e.to_string()))?;
    emit_string(out, s)
}

/// Checks `out` up front so no work is done for a call that cannot report back.
unsafe fn clear_out(out: *mut *mut c_char) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(CsStatus::NullArgument, "out is NULL"));
    }
    *out = ptr::null_mut();
    Ok(())
}

/// Message for the most recent failed call on this thread, or NULL.
///
/// The pointer stays valid until the next call into this library on the same
/// thread. Do not free it.
#[no_mangle]
pub extern "C" fn cs_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from an `out` parameter of this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn cs_orchestrator_new() -> *mut CsOrchestrator {
    Box::into_raw(Box::new(CsOrchestrator {
        inner: Orchestrator::new(),
    }))
}

/// Creates an orchestrator that also persists each session log under `log_dir`.
/// Returns NULL if `log_dir` is NULL or not UTF-8.
///
/// # Safety
/// `log_dir` must be NULL or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cs_orchestrator_with_log_dir(log_dir: *const c_char) -> *mut CsOrchestrator {
    let mut result = ptr::null_mut();
    guard(|| {
        let dir = text(log_dir, "log_dir")?;
        result = Box::into_raw(Box::new(CsOrchestrator {
            inner: Orchestrator::new().with_log_dir(dir),
        }));
        Ok(())
    });
    result
}

/// # Safety
/// `handle` must be NULL or come from `cs_orchestrator_new*`, and no other
/// call may be using it.
#[no_mangle]
pub unsafe extern "C" fn cs_orchestrator_free(handle: *mut CsOrchestrator) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Creates a session from a JSON session config (NULL means defaults) and
/// writes the session snapshot JSON to `out`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cs_session_create(
    handle: *const CsOrchestrator,
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        clear_out(out)?;
        let orch = orchestrator(handle)?;
        let config: SessionConfig = match optional_text(config_json, "config_json")? {
            Some(json) => parse(json, "session config")?,
            None => SessionConfig::default(),
        };
        emit_json(out, &orch.create_session(config)?)
    })
}

/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cs_session_snapshot(
    handle: *const CsOrchestrator,
    session_id: *const c_char,
    out: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        clear_out(out)?;
        let orch = orchestrator(handle)?;
        emit_json(out, &orch.snapshot(text(session_id, "session_id")?)?)
    })
}

/// Submits a wizard rating (`{"taskFocus":..,"relationship":..,"phase":..}`)
/// and writes the turn report JSON to `out`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cs_session_rating(
    handle: *const CsOrchestrator,
    session_id: *const c_char,
    rating_json: *const c_char,
    out: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        clear_out(out)?;
        let orch = orchestrator(handle)?;
        let id = text(session_id, "session_id")?;
        let req: RatingRequest = parse(text(rating_json, "rating_json")?, "rating")?;
        emit_json(out, &orch.submit_rating_request(id, req)?)
    })
}

/// Submits an affect cue and writes the input acknowledgement JSON to `out`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cs_session_cue(
    handle: *const CsOrchestrator,
    session_id: *const c_char,
    cue_json: *const c_char,
    out: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        clear_out(out)?;
        let orch = orchestrator(handle)?;
        let id = text(session_id, "session_id")?;
        let cue: AffectCue = parse(text(cue_json, "cue_json")?, "cue")?;
        emit_json(out, &orch.submit_cue(id, cue)?)
    })
}

/// Submits a gaze, distance or utterance event and writes the input
/// acknowledgement JSON to `out`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cs_session_modality(
    handle: *const CsOrchestrator,
    session_id: *const c_char,
    event_json: *const c_char,
    out: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        clear_out(out)?;
        let orch = orchestrator(handle)?;
        let id = text(session_id, "session_id")?;
        let event: ModalityEvent = parse(text(event_json, "event_json")?, "modality event")?;
        emit_json(out, &orch.submit_modality(id, event)?)
    })
}

/// Ends the session and writes the signal summary JSON to `out`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cs_session_end(
    handle: *const CsOrchestrator,
    session_id: *const c_char,
    out: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        clear_out(out)?;
        let orch = orchestrator(handle)?;
        emit_json(out, &orch.end_session(text(session_id, "session_id")?)?)
    })
}

/// Writes the session log as NDJSON (header line, then one event per line).
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cs_session_log(
    handle: *const CsOrchestrator,
    session_id: *const c_char,
    out: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        clear_out(out)?;
        let orch = orchestrator(handle)?;
        emit_string(out, orch.log(text(session_id, "session_id")?)?.to_ndjson())
    })
}

/// Writes the demanding-affect fragments as a JSON array. `params_json` may be
/// NULL for the defaults, or `{"pleasureMax":..,"arousalMin":..,"minDurationMs":..}`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cs_session_fragments(
    handle: *const CsOrchestrator,
    session_id: *const c_char,
    params_json: *const c_char,
    out: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        clear_out(out)?;
        let orch = orchestrator(handle)?;
        let id = text(session_id, "session_id")?;
        let params: FragmentParams = match optional_text(params_json, "params_json")? {
            Some(json) => parse(json, "fragment params")?,
            None => FragmentParams::default(),
        };
        emit_json(out, &orch.fragments(id, &params)?)
    })
}

/// Re-runs a recorded NDJSON log and writes the comparison report JSON to
/// `out`. `catalog_path` may be NULL to use the catalog named in the log.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cs_verify_log(
    log_ndjson: *const c_char,
    catalog_path: *const c_char,
    out: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        clear_out(out)?;
        let log = EventLog::from_ndjson(text(log_ndjson, "log_ndjson")?)
            .map_err(|e| Failure::new(CsStatus::InvalidJson, e.to_string()))?;
        let catalog = optional_text(catalog_path, "catalog_path")?.map(Path::new);
        let report = verify_log(&log, catalog)?;
        emit_json(
            out,
            &serde_json::json!({
                "recorded": report.recorded,
                "replayed": report.replayed,
                "firstMismatch": report.first_mismatch,
                "identical": report.identical(),
            }),
        )
    })
}

impl From<RegulationStyle> for CsStyle {
    fn from(s: RegulationStyle) -> Self {
        match s {
            RegulationStyle::ProblemSolve => CsStyle::ProblemSolve,
            RegulationStyle::Force => CsStyle::Force,
            RegulationStyle::Smooth => CsStyle::Smooth,
            RegulationStyle::Withdraw => CsStyle::Withdraw,
        }
    }
}

impl From<CsStyle> for RegulationStyle {
    fn from(s: CsStyle) -> Self {
        match s {
            CsStyle::ProblemSolve => RegulationStyle::ProblemSolve,
            CsStyle::Force => RegulationStyle::Force,
            CsStyle::Smooth => RegulationStyle::Smooth,
            CsStyle::Withdraw => RegulationStyle::Withdraw,
        }
    }
}

impl From<&ConflictState> for CsConflictState {
    fn from(s: &ConflictState) -> Self {
        CsConflictState {
            task_level: s.task_level.index(),
            rel_level: s.rel_level.index(),
            phase: s.phase.index(),
            cumulative_potential: s.cumulative_potential,
            turn_count: s.turn_count,
            outcome: match s.outcome {
                None => CsOutcome::None,
                Some(Outcome::Escalation) => CsOutcome::Escalation,
                Some(Outcome::Resolution) => CsOutcome::Resolution,
            },
        }
    }
}

impl TryFrom<&CsConflictState> for ConflictState {
    type Error = ConflictError;

    fn try_from(s: &CsConflictState) -> Result<Self, ConflictError> {
        Ok(ConflictState {
            task_level: ConflictLevel::new(s.task_level)?,
            rel_level: ConflictLevel::new(s.rel_level)?,
            phase: ConflictPhase::new(s.phase)?,
            cumulative_potential: s.cumulative_potential,
            turn_count: s.turn_count,
            outcome: match s.outcome {
                CsOutcome::None => None,
                CsOutcome::Escalation => Some(Outcome::Escalation),
                CsOutcome::Resolution => Some(Outcome::Resolution),
            },
        })
    }
}

#[no_mangle]
pub extern "C" fn cs_classify_style(task_focus: bool, relationship: bool) -> CsStyle {
    conflict::classify_style(task_focus, relationship).into()
}

#[no_mangle]
pub extern "C" fn cs_style_potential(style: CsStyle) -> i32 {
    conflict::style_potential(style.into())
}

/// Builds a start state, already marked terminal if it meets an end condition.
///
/// # Safety
/// `out` must point to writable memory for one `CsConflictState`.
#[no_mangle]
pub unsafe extern "C" fn cs_conflict_start(
    task_level: u8,
    rel_level: u8,
    phase: u8,
    turn_budget: u32,
    out: *mut CsConflictState,
) -> CsStatus {
    guard(|| {
        let out = out
            .as_mut()
            .ok_or_else(|| Failure::new(CsStatus::NullArgument, "out is NULL"))?;
        let state = ConflictState::at(task_level, rel_level, phase)?.settled(turn_budget);
        *out = (&state).into();
        Ok(())
    })
}

/// Applies one evaluated teacher turn. `out` may alias `state`.
///
/// # Safety
/// `state` and `out` must point to valid `CsConflictState` memory.
#[no_mangle]
pub unsafe extern "C" fn cs_apply_turn(
    state: *const CsConflictState,
    task_focus: bool,
    relationship: bool,
    phase: u8,
    turn_budget: u32,
    out: *mut CsConflictState,
) -> CsStatus {
    guard(|| {
        if state.is_null() || out.is_null() {
            return Err(Failure::new(CsStatus::NullArgument, "state or out is NULL"));
        }
        let current = ConflictState::try_from(&*state)?;
        let eval = TeacherEvaluation {
            task_focus,
            relationship,
            phase: ConflictPhase::new(phase)?,
            source: EvaluationSource::Wizard,
            timestamp: 0,
        };
        let (next, _) = conflict::apply_turn(&current, &eval, turn_budget)?;
        *out = (&next).into();
        Ok(())
    })
}
