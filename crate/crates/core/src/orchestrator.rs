//! Session service.
//!
//! A session runs in one of two modes. In `woz` mode a human wizard (or a
//! scripted policy) posts ratings; in `auto` mode teacher utterances are
//! turned into evaluations by the interaction-act pipeline and the affect
//! engine. Either way each evaluation advances the conflict state machine,
//! a student behavior is selected from the catalog, and everything is
//! published on the session bus in causal order.
//!
//! All mutations of one session happen under that session's lock, so the
//! session has a single logical writer and its log order is its causal order.

use crate::acts::{
    derive_evaluation, evaluate_norms, segment_acts, ActsError, ModalityEvent, NormSet, PhaseTracker, SpeechActRules,
    DEFAULT_TURNS_PER_PHASE,
};
use crate::affect::{lead_affect, AffectConfig, AffectCue, AffectEngine, AffectError, TagTable};
use crate::bus::payload::{
    AffectStatePayload, ControlAction, ControlPayload, NormEvalPayload, OutcomePayload, RatingPayload,
    StudentCommandPayload, TeacherActPayload, TeacherInput,
};
use crate::bus::{
    extract_fragments, summarize_signals, BusError, EventDraft, EventLog, Fragment, FragmentParams, LogHeader,
    ResumePoint, SessionBus, SessionEvent, SignalSummary, Subscription, Topic, TopicFilter,
};
use crate::catalog::{sample_catalog, BehaviorSpec, Catalog, CatalogError, HeterogeneityTags, SpecialTag};
use crate::conflict::{
    apply_turn, ConflictError, ConflictLevel, ConflictPhase, ConflictState, EvaluationSource, Outcome, RegulationStyle,
    StudentReactionKey, TeacherEvaluation, DEFAULT_TURN_BUDGET,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use thiserror::Error;

/// Samples older than this (relative to the newest utterance end) are dropped.
const SAMPLE_RETENTION_MS: u64 = 600_000;
const HETEROGENEITY_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SessionMode {
    #[default]
    Woz,
    Auto,
}

impl SessionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionMode::Woz => "woz",
            SessionMode::Auto => "auto",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InitialState {
    pub task_level: ConflictLevel,
    pub rel_level: ConflictLevel,
    pub phase: ConflictPhase,
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState {
            task_level: ConflictLevel::MIDPOINT,
            rel_level: ConflictLevel::MIDPOINT,
            phase: ConflictPhase::OPENING,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SessionConfig {
    pub mode: SessionMode,
    /// Behavior catalog; the bundled sample scenario when absent.
    pub catalog_path: Option<PathBuf>,
    pub norm_set_path: Option<PathBuf>,
    pub rule_set_path: Option<PathBuf>,
    pub tag_table_path: Option<PathBuf>,
    pub seed: u64,
    pub turn_budget: u32,
    pub turns_per_phase: u32,
    #[serde(flatten)]
    pub affect: AffectConfig,
    pub heterogeneity_seed: Option<u64>,
    pub initial_state: InitialState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_path: Option<PathBuf>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            mode: SessionMode::Woz,
            catalog_path: None,
            norm_set_path: None,
            rule_set_path: None,
            tag_table_path: None,
            seed: 0,
            turn_budget: DEFAULT_TURN_BUDGET,
            turns_per_phase: DEFAULT_TURNS_PER_PHASE,
            affect: AffectConfig::default(),
            heterogeneity_seed: None,
            initial_state: InitialState::default(),
            session_id: None,
            log_path: None,
        }
    }
}

/// Validated data files a session runs on. Shareable between sessions.
#[derive(Debug, Clone)]
pub struct SessionResources {
    pub catalog: Arc<Catalog>,
    pub norms: Arc<NormSet>,
    pub rules: Arc<SpeechActRules>,
    pub tags: TagTable,
}

impl SessionResources {
    pub fn load(config: &SessionConfig) -> Result<Self, OrchestratorError> {
        let catalog = match &config.catalog_path {
            Some(path) => Catalog::load(path)?,
            None => sample_catalog(),
        };
        let norms = match &config.norm_set_path {
            Some(path) => NormSet::load(path)?,
            None => NormSet::shipped(),
        };
        let rules = match &config.rule_set_path {
            Some(path) => SpeechActRules::load(path)?,
            None => SpeechActRules::default(),
        };
        let tags = match &config.tag_table_path {
            Some(path) => TagTable::load(path)?,
            None => TagTable::default(),
        };
        Ok(SessionResources {
            catalog: Arc::new(catalog),
            norms: Arc::new(norms),
            rules: Arc::new(rules),
            tags,
        })
    }
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("session {0:?} already exists")]
    DuplicateSession(String),
    #[error("session {0:?} has ended")]
    SessionEnded(String),
    #[error("conflict already ended with {0:?}")]
    ConflictOver(Outcome),
    #[error("{operation} is not available in {mode} mode")]
    WrongMode {
        operation: &'static str,
        mode: &'static str,
    },
    #[error("input at {got} ms arrives after session time {last} ms")]
    OutOfOrder { last: u64, got: u64 },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Conflict(#[from] ConflictError),
    #[error("catalog validation failed: {0}")]
    Catalog(#[from] CatalogError),
    #[error("interaction-act input rejected: {0}")]
    Acts(#[from] ActsError),
    #[error("affect input rejected: {0}")]
    Affect(#[from] AffectError),
    #[error(transparent)]
    Bus(#[from] BusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    NotFound,
    Invalid,
    Conflict,
    Internal,
}

impl OrchestratorError {
    pub fn class(&self) -> ErrorClass {
        use OrchestratorError::*;
        match self {
            UnknownSession(_) => ErrorClass::NotFound,
            DuplicateSession(_) | SessionEnded(_) | ConflictOver(_) | WrongMode { .. } => ErrorClass::Conflict,
            Conflict(ConflictError::Terminal(_)) => ErrorClass::Conflict,
            OutOfOrder { .. } | Config(_) | Conflict(_) | Catalog(_) | Acts(_) | Affect(_) => ErrorClass::Invalid,
            Bus(BusError::UnknownSession(_)) => ErrorClass::NotFound,
            Bus(BusError::SessionClosed(_)) => ErrorClass::Conflict,
            Bus(_) => ErrorClass::Internal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SessionStatus {
    Created,
    Running,
    Ended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionSnapshot {
    pub session_id: String,
    pub created_at_ms: u64,
    pub mode: SessionMode,
    pub status: SessionStatus,
    pub state: ConflictState,
    /// Phase the next automatically derived evaluation will carry.
    pub tracked_phase: ConflictPhase,
    pub heterogeneity: HeterogeneityTags,
    pub scenario_id: String,
}

/// Result of one evaluated teacher turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TurnReport {
    pub turn: u32,
    pub style: RegulationStyle,
    pub state: ConflictState,
    /// Reaction for a non-terminal turn.
    pub behavior: Option<BehaviorSpec>,
    pub outcome: Option<Outcome>,
    /// Exit special played when the turn ended the conflict.
    pub exit_behavior: Option<BehaviorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InputAck {
    pub topic: Topic,
    pub seq: u64,
    pub media_time_ms: u64,
    /// Present when the input completed an auto-mode turn.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub turn: Option<TurnReport>,
}

/// A wizard rating as posted by a client; the timestamp defaults to the
/// current session time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RatingRequest {
    pub task_focus: bool,
    pub relationship: bool,
    pub phase: ConflictPhase,
    #[serde(default)]
    pub timestamp: Option<u64>,
    #[serde(default)]
    pub source: Option<EvaluationSource>,
}

struct Session {
    id: String,
    created_at_ms: u64,
    config: SessionConfig,
    resources: Arc<SessionResources>,
    status: SessionStatus,
    state: ConflictState,
    affect: AffectEngine,
    tracker: PhaseTracker,
    samples: Vec<ModalityEvent>,
    last_media_ms: u64,
    last_eval_ms: u64,
    rng: ChaCha8Rng,
    heterogeneity: HeterogeneityTags,
}

impl Session {
    fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            session_id: self.id.clone(),
            created_at_ms: self.created_at_ms,
            mode: self.config.mode,
            status: self.status,
            state: self.state,
            tracked_phase: self.tracker.phase,
            heterogeneity: self.heterogeneity.clone(),
            scenario_id: self.resources.catalog.scenario_id().to_string(),
        }
    }

    fn ensure_running(&self) -> Result<(), OrchestratorError> {
        if self.status == SessionStatus::Running {
            Ok(())
        } else {
            Err(OrchestratorError::SessionEnded(self.id.clone()))
        }
    }

    fn ensure_in_order(&self, media_ms: u64) -> Result<(), OrchestratorError> {
        if media_ms < self.last_media_ms {
            return Err(OrchestratorError::OutOfOrder {
                last: self.last_media_ms,
                got: media_ms,
            });
        }
        Ok(())
    }

    fn emit<T: Serialize>(
        &mut self,
        bus: &SessionBus,
        topic: Topic,
        media_ms: u64,
        payload: &T,
    ) -> Result<SessionEvent, BusError> {
        let event = bus.publish(EventDraft::new(&self.id, topic, media_ms, payload))?;
        self.last_media_ms = self.last_media_ms.max(media_ms);
        Ok(event)
    }

    fn publish_affect(&mut self, bus: &SessionBus, media_ms: u64) -> Result<(), BusError> {
        self.affect.advance_to(media_ms);
        let fused = self.affect.fused(media_ms);
        let pad = self.affect.expressed(media_ms);
        let payload = AffectStatePayload {
            pad,
            fused: fused.pad,
            no_data: fused.no_data,
            mood: self.affect.mood().current,
            lead: lead_affect(pad),
        };
        self.emit(bus, Topic::AffectState, media_ms, &payload)?;
        Ok(())
    }

    /// Publishes the student's reaction (or the exit special) for an applied turn.
    fn finish_turn(
        &mut self,
        bus: &SessionBus,
        style: RegulationStyle,
        next: ConflictState,
        key: Option<StudentReactionKey>,
        media_ms: u64,
    ) -> Result<TurnReport, BusError> {
        self.state = next;
        let catalog = self.resources.catalog.clone();
        let behavior = key.map(|k| catalog.select(k, &mut self.rng));
        let exit = next.outcome.map(|o| catalog.exit_for(o).clone());
        let shown = behavior
            .clone()
            .or_else(|| exit.clone())
            .expect("turn yields a behavior");
        let command = StudentCommandPayload {
            turn: next.turn_count,
            state: next,
            behavior: shown,
        };
        self.emit(bus, Topic::StudentCommand, media_ms, &command)?;
        if let Some(outcome) = next.outcome {
            self.emit(bus, Topic::Outcome, media_ms, &OutcomePayload { outcome, state: next })?;
        }
        Ok(TurnReport {
            turn: next.turn_count,
            style,
            state: next,
            behavior,
            outcome: next.outcome,
            exit_behavior: exit,
        })
    }

    fn rating(&mut self, bus: &SessionBus, eval: TeacherEvaluation) -> Result<TurnReport, OrchestratorError> {
        self.ensure_running()?;
        if self.config.mode != SessionMode::Woz || eval.source == EvaluationSource::Auto {
            return Err(OrchestratorError::WrongMode {
                operation: "rating",
                mode: self.config.mode.as_str(),
            });
        }
        if let Some(outcome) = self.state.outcome {
            return Err(OrchestratorError::ConflictOver(outcome));
        }
        if eval.timestamp < self.last_eval_ms {
            return Err(ConflictError::TimestampRegression {
                last: self.last_eval_ms,
                got: eval.timestamp,
            }
            .into());
        }
        self.ensure_in_order(eval.timestamp)?;
        let (next, key) = apply_turn(&self.state, &eval, self.config.turn_budget)?;
        let style = eval.style();
        self.last_eval_ms = eval.timestamp;
        self.emit(
            bus,
            Topic::WizardRating,
            eval.timestamp,
            &RatingPayload {
                evaluation: eval,
                style,
            },
        )?;
        let report = self.finish_turn(bus, style, next, key, eval.timestamp)?;
        self.tracker.observe(&next);
        Ok(report)
    }

    fn cue(&mut self, bus: &SessionBus, cue: AffectCue) -> Result<InputAck, OrchestratorError> {
        self.ensure_running()?;
        cue.validate()?;
        self.ensure_in_order(cue.timestamp)?;
        self.affect.add_cue(cue)?;
        let event = self.emit(bus, Topic::TeacherCue, cue.timestamp, &TeacherInput::Cue(cue))?;
        self.publish_affect(bus, cue.timestamp)?;
        Ok(InputAck {
            topic: event.topic,
            seq: event.seq,
            media_time_ms: event.media_time_ms,
            turn: None,
        })
    }

    fn modality(&mut self, bus: &SessionBus, input: ModalityEvent) -> Result<InputAck, OrchestratorError> {
        self.ensure_running()?;
        input.validate()?;
        let t = input.time_key();
        self.ensure_in_order(t)?;
        let event = self.emit(bus, Topic::TeacherCue, t, &TeacherInput::Modality(input.clone()))?;
        let mut ack = InputAck {
            topic: event.topic,
            seq: event.seq,
            media_time_ms: event.media_time_ms,
            turn: None,
        };
        match input {
            ModalityEvent::Utterance { start_ms, end_ms, .. } => {
                if self.config.mode == SessionMode::Auto {
                    ack.turn = self.auto_turn(bus, input.clone(), start_ms, end_ms)?;
                }
                let horizon = end_ms.saturating_sub(SAMPLE_RETENTION_MS);
                self.samples.retain(|s| s.time_key() >= horizon);
            }
            sample => self.samples.push(sample),
        }
        Ok(ack)
    }

    /// Utterance → act → norms → appraisal → evaluation → turn.
    fn auto_turn(
        &mut self,
        bus: &SessionBus,
        utterance: ModalityEvent,
        start_ms: u64,
        end_ms: u64,
    ) -> Result<Option<TurnReport>, OrchestratorError> {
        let mut window: Vec<ModalityEvent> = self
            .samples
            .iter()
            .filter(|s| (start_ms..=end_ms).contains(&s.time_key()))
            .cloned()
            .collect();
        window.push(utterance);
        let resources = self.resources.clone();
        let act = segment_acts(&window, &resources.rules)?
            .pop()
            .expect("one utterance yields one act");
        let judged = evaluate_norms(&act, &resources.norms);
        let appraisal = judged.appraisal.expect("evaluate_norms sets the appraisal");
        self.affect.appraise(appraisal, end_ms);
        let lead = lead_affect(self.affect.expressed(end_ms));
        let norm_payload = NormEvalPayload {
            violated: judged.norms_violated.iter().cloned().collect(),
            adhered: judged.norms_adhered.iter().cloned().collect(),
            appraisal,
            proxemics_violations: resources.norms.proxemics_violations(&judged) as u32,
        };

        if self.state.is_terminal() {
            let payload = TeacherActPayload {
                act: judged,
                lead,
                evaluation: None,
                style: None,
            };
            self.emit(bus, Topic::TeacherAct, end_ms, &payload)?;
            self.emit(bus, Topic::NormEval, end_ms, &norm_payload)?;
            self.publish_affect(bus, end_ms)?;
            return Ok(None);
        }

        let eval = derive_evaluation(&judged, lead, self.tracker.phase, &resources.norms);
        let (next, key) = apply_turn(&self.state, &eval, self.config.turn_budget)?;
        let style = eval.style();
        self.last_eval_ms = eval.timestamp;
        let payload = TeacherActPayload {
            act: judged,
            lead,
            evaluation: Some(eval),
            style: Some(style),
        };
        self.emit(bus, Topic::TeacherAct, end_ms, &payload)?;
        self.emit(bus, Topic::NormEval, end_ms, &norm_payload)?;
        self.publish_affect(bus, end_ms)?;
        let report = self.finish_turn(bus, style, next, key, end_ms)?;
        self.tracker.observe(&next);
        Ok(Some(report))
    }
}

/// Owns all live sessions and the bus they publish on.
pub struct Orchestrator {
    bus: Arc<SessionBus>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    log_dir: Option<PathBuf>,
}

impl Default for Orchestrator {
    fn default() -> Self {
        Orchestrator::new()
    }
}

impl Orchestrator {
    pub fn new() -> Self {
        Orchestrator::with_bus(Arc::new(SessionBus::new()))
    }

    pub fn with_bus(bus: Arc<SessionBus>) -> Self {
        Orchestrator {
            bus,
            sessions: RwLock::new(HashMap::new()),
            log_dir: None,
        }
    }

    /// Mirrors every session log to `<dir>/<session id>.ndjson`.
    pub fn with_log_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.log_dir = Some(dir.into());
        self
    }

    pub fn bus(&self) -> &Arc<SessionBus> {
        &self.bus
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, OrchestratorError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| OrchestratorError::UnknownSession(id.to_string()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().unwrap().keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn create_session(&self, config: SessionConfig) -> Result<SessionSnapshot, OrchestratorError> {
        let resources = SessionResources::load(&config)?;
        self.create_session_with(config, Arc::new(resources))
    }

    /// Creates a session on already-loaded resources.
    pub fn create_session_with(
        &self,
        config: SessionConfig,
        resources: Arc<SessionResources>,
    ) -> Result<SessionSnapshot, OrchestratorError> {
        if config.turns_per_phase == 0 {
            return Err(OrchestratorError::Config("turnsPerPhase must be positive".into()));
        }
        let id = config
            .session_id
            .clone()
            .unwrap_or_else(|| format!("s-{}", uuid::Uuid::new_v4().simple()));
        let log_path = config
            .log_path
            .clone()
            .or_else(|| self.log_dir.as_ref().map(|d| d.join(format!("{id}.ndjson"))));

        let mut sessions = self.sessions.write().unwrap();
        if sessions.contains_key(&id) {
            return Err(OrchestratorError::DuplicateSession(id));
        }
        let config_snapshot = serde_json::to_value(&config).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        let header = LogHeader::new(&id, resources.catalog.scenario_id(), config_snapshot);
        self.bus.open(header, log_path.as_deref())?;

        let init = config.initial_state;
        let state = ConflictState::new(init.task_level, init.rel_level, init.phase).settled(config.turn_budget);
        let mut het_rng = ChaCha8Rng::seed_from_u64(
            config
                .heterogeneity_seed
                .unwrap_or(config.seed ^ HETEROGENEITY_SEED_SALT),
        );
        let heterogeneity = resources.catalog.heterogeneity().draw(&mut het_rng);
        let mut tracker = PhaseTracker::new(config.turns_per_phase);
        tracker.phase = init.phase;
        let mut session = Session {
            id: id.clone(),
            created_at_ms: self.bus.now_ms(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            affect: AffectEngine::new(config.affect, resources.tags.clone()),
            config,
            resources,
            status: SessionStatus::Created,
            state,
            tracker,
            samples: Vec::new(),
            last_media_ms: 0,
            last_eval_ms: 0,
            heterogeneity,
        };
        let start = ControlPayload {
            action: ControlAction::Start,
            mode: Some(session.config.mode.as_str().to_string()),
            state: Some(session.state),
            heterogeneity: Some(session.heterogeneity.clone()),
            opening: Some(session.resources.catalog.special(SpecialTag::Opening).clone()),
        };
        session.emit(&self.bus, Topic::SessionControl, 0, &start)?;
        if let Some(outcome) = session.state.outcome {
            let payload = OutcomePayload {
                outcome,
                state: session.state,
            };
            session.emit(&self.bus, Topic::Outcome, 0, &payload)?;
        }
        session.status = SessionStatus::Running;
        let snapshot = session.snapshot();
        sessions.insert(id, Arc::new(Mutex::new(session)));
        tracing::debug!(session = %snapshot.session_id, mode = ?snapshot.mode, "session created");
        Ok(snapshot)
    }

    pub fn snapshot(&self, id: &str) -> Result<SessionSnapshot, OrchestratorError> {
        Ok(self.session(id)?.lock().unwrap().snapshot())
    }

    pub fn submit_rating(&self, id: &str, eval: TeacherEvaluation) -> Result<TurnReport, OrchestratorError> {
        let session = self.session(id)?;
        let mut s = session.lock().unwrap();
        s.rating(&self.bus, eval)
    }

    /// Like [`Orchestrator::submit_rating`], filling in timestamp and source defaults.
    pub fn submit_rating_request(&self, id: &str, req: RatingRequest) -> Result<TurnReport, OrchestratorError> {
        let session = self.session(id)?;
        let mut s = session.lock().unwrap();
        let eval = TeacherEvaluation {
            task_focus: req.task_focus,
            relationship: req.relationship,
            phase: req.phase,
            source: req.source.unwrap_or(EvaluationSource::Wizard),
            timestamp: req.timestamp.unwrap_or(s.last_media_ms.max(s.last_eval_ms)),
        };
        s.rating(&self.bus, eval)
    }

    pub fn submit_cue(&self, id: &str, cue: AffectCue) -> Result<InputAck, OrchestratorError> {
        let session = self.session(id)?;
        let mut s = session.lock().unwrap();
        s.cue(&self.bus, cue)
    }

    pub fn submit_modality(&self, id: &str, event: ModalityEvent) -> Result<InputAck, OrchestratorError> {
        let session = self.session(id)?;
        let mut s = session.lock().unwrap();
        s.modality(&self.bus, event)
    }

    pub fn submit_input(&self, id: &str, input: TeacherInput) -> Result<InputAck, OrchestratorError> {
        match input {
            TeacherInput::Cue(cue) => self.submit_cue(id, cue),
            TeacherInput::Modality(event) => self.submit_modality(id, event),
        }
    }

    pub fn end_session(&self, id: &str) -> Result<SignalSummary, OrchestratorError> {
        let session = self.session(id)?;
        let mut s = session.lock().unwrap();
        s.ensure_running()?;
        let media = s.last_media_ms;
        let stop = ControlPayload {
            action: ControlAction::Stop,
            mode: None,
            state: Some(s.state),
            heterogeneity: None,
            opening: None,
        };
        s.emit(&self.bus, Topic::SessionControl, media, &stop)?;
        let log = self.bus.close(id)?;
        s.status = SessionStatus::Ended;
        Ok(summarize_signals(&log))
    }

    pub fn log(&self, id: &str) -> Result<EventLog, OrchestratorError> {
        self.session(id)?;
        Ok(self.bus.log(id)?)
    }

    pub fn fragments(&self, id: &str, params: &FragmentParams) -> Result<Vec<Fragment>, OrchestratorError> {
        Ok(extract_fragments(&self.log(id)?, params))
    }

    pub fn subscribe(
        &self,
        id: &str,
        filter: TopicFilter,
        resume: Option<ResumePoint>,
    ) -> Result<Subscription, OrchestratorError> {
        self.session(id)?;
        Ok(self.bus.subscribe_after(id, filter, resume)?)
    }

    /// Drops a session and its in-memory log.
    pub fn discard(&self, id: &str) -> Option<EventLog> {
        self.sessions.write().unwrap().remove(id)?;
        self.bus.remove(id)
    }
}

/// Outcome of re-feeding a recorded log through a fresh session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyReport {
    pub recorded: usize,
    pub replayed: usize,
    /// Index of the first differing student command, if any.
    pub first_mismatch: Option<usize>,
}

impl VerifyReport {
    pub fn identical(&self) -> bool {
        self.first_mismatch.is_none() && self.recorded == self.replayed
    }
}

pub fn student_commands(log: &EventLog) -> Vec<&str> {
    log.by_topic(Topic::StudentCommand).map(|e| e.payload.get()).collect()
}

/// Re-runs the recorded teacher inputs (and wizard ratings) of `log` through
/// a fresh session built from the log's config snapshot and compares the
/// student command payloads byte for byte.
pub fn verify_log(log: &EventLog, catalog_override: Option<&Path>) -> Result<VerifyReport, OrchestratorError> {
    let mut config: SessionConfig =
        serde_json::from_value(log.header.config.clone()).map_err(|e| OrchestratorError::Config(e.to_string()))?;
    config.session_id = Some(format!("{}-verify", log.header.session_id));
    config.log_path = None;
    if let Some(path) = catalog_override {
        config.catalog_path = Some(path.to_path_buf());
    }
    let orchestrator = Orchestrator::with_bus(Arc::new(SessionBus::with_clock(Arc::new(|| 0))));
    let id = orchestrator.create_session(config)?.session_id;
    for event in &log.records {
        match event.topic {
            Topic::TeacherCue => {
                let input: TeacherInput = event
                    .payload_as()
                    .map_err(|e| OrchestratorError::Config(format!("teacher.cue #{}: {e}", event.seq)))?;
                orchestrator.submit_input(&id, input)?;
            }
            Topic::WizardRating => {
                let rating: RatingPayload = event
                    .payload_as()
                    .map_err(|e| OrchestratorError::Config(format!("wizard.rating #{}: {e}", event.seq)))?;
                orchestrator.submit_rating(&id, rating.evaluation)?;
            }
            _ => {}
        }
    }
    let replayed_log = orchestrator.log(&id)?;
    let recorded = student_commands(log);
    let replayed = student_commands(&replayed_log);
    let first_mismatch = recorded
        .iter()
        .zip(&replayed)
        .position(|(a, b)| a != b)
        .or_else(|| (recorded.len() != replayed.len()).then(|| recorded.len().min(replayed.len())));
    Ok(VerifyReport {
        recorded: recorded.len(),
        replayed: replayed.len(),
        first_mismatch,
    })
}
