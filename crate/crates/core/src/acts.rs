//! Interaction acts: the automated stand-in for the wizard.
//!
//! Every teacher utterance anchors one act. Gaze and distance samples falling
//! inside the utterance interval enrich it, a rule table labels its speech
//! act, and a declarative norm set judges it. From the judged act and the
//! teacher's lead affect, a [`TeacherEvaluation`] is derived.

use crate::affect::{relationship_signal, AppraisalKind, AppraisalTag, LeadAffect};
use crate::conflict::{ConflictLevel, ConflictPhase, ConflictState, EvaluationSource, TeacherEvaluation};
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;
use thiserror::Error;

pub const RULES_SCHEMA_VERSION: u32 = 1;
pub const NORMS_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TURNS_PER_PHASE: u32 = 4;

#[derive(Debug, Error)]
pub enum ActsError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schemaVersion {got} (expected {expected})")]
    SchemaVersion { got: u32, expected: u32 },
    #[error("rule for {act:?}: bad pattern {pattern:?}: {source}")]
    Pattern {
        act: SpeechAct,
        pattern: String,
        #[source]
        source: regex::Error,
    },
    #[error("norm {id}: weight {weight} outside (0,1]")]
    NormWeight { id: String, weight: f64 },
    #[error("duplicate norm id {0:?}")]
    DuplicateNorm(String),
    #[error("negative distance {0} m")]
    NegativeDistance(f64),
    #[error("utterance interval [{start}, {end}] is inverted")]
    InvertedInterval { start: u64, end: u64 },
    #[error("event at {got} ms arrives after an event at {last} ms")]
    Unsorted { last: u64, got: u64 },
}

fn read_file(path: &Path) -> Result<String, ActsError> {
    std::fs::read_to_string(path).map_err(|source| ActsError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GazeTarget {
    Student,
    OtherStudent,
    Elsewhere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum ModalityEvent {
    #[serde(rename_all = "camelCase")]
    Utterance { text: String, start_ms: u64, end_ms: u64 },
    #[serde(rename_all = "camelCase")]
    GazeSample { target: GazeTarget, t_ms: u64 },
    #[serde(rename_all = "camelCase")]
    DistanceSample { meters: f64, t_ms: u64 },
}

impl ModalityEvent {
    /// Ordering key: an utterance is placed at its end, when it is complete.
    pub fn time_key(&self) -> u64 {
        match self {
            ModalityEvent::Utterance { end_ms, .. } => *end_ms,
            ModalityEvent::GazeSample { t_ms, .. } | ModalityEvent::DistanceSample { t_ms, .. } => *t_ms,
        }
    }

    pub fn validate(&self) -> Result<(), ActsError> {
        match *self {
            ModalityEvent::Utterance { start_ms, end_ms, .. } if start_ms > end_ms => {
                Err(ActsError::InvertedInterval {
                    start: start_ms,
                    end: end_ms,
                })
            }
            ModalityEvent::DistanceSample { meters, .. } if meters.is_nan() || meters < 0.0 => {
                Err(ActsError::NegativeDistance(meters))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ProxemicsZone {
    Intimate,
    Personal,
    Social,
    Public,
}

/// Hall distance bands; a boundary distance belongs to the outer zone.
pub fn proxemics_zone(meters: f64) -> Result<ProxemicsZone, ActsError> {
    if meters.is_nan() || meters < 0.0 {
        return Err(ActsError::NegativeDistance(meters));
    }
    Ok(if meters < 0.45 {
        ProxemicsZone::Intimate
    } else if meters < 1.2 {
        ProxemicsZone::Personal
    } else if meters < 3.6 {
        ProxemicsZone::Social
    } else {
        ProxemicsZone::Public
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SpeechAct {
    Instruction,
    Question,
    Reprimand,
    Praise,
    Empathy,
    Threat,
    Other,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RuleEntry {
    act: SpeechAct,
    patterns: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RuleFile {
    schema_version: u32,
    rules: Vec<RuleEntry>,
}

/// Ordered speech-act rules; the first matching pattern wins.
#[derive(Debug, Clone)]
pub struct SpeechActRules {
    rules: Vec<(SpeechAct, Regex)>,
}

impl SpeechActRules {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ActsError> {
        SpeechActRules::from_json(&read_file(path.as_ref())?)
    }

    pub fn from_json(text: &str) -> Result<Self, ActsError> {
        let file: RuleFile = serde_json::from_str(text)?;
        if file.schema_version != RULES_SCHEMA_VERSION {
            return Err(ActsError::SchemaVersion {
                got: file.schema_version,
                expected: RULES_SCHEMA_VERSION,
            });
        }
        let mut rules = Vec::new();
        for entry in file.rules {
            for pattern in entry.patterns {
                let regex = RegexBuilder::new(&pattern)
                    .case_insensitive(true)
                    .build()
                    .map_err(|source| ActsError::Pattern {
                        act: entry.act,
                        pattern: pattern.clone(),
                        source,
                    })?;
                rules.push((entry.act, regex));
            }
        }
        Ok(SpeechActRules { rules })
    }

    pub fn classify(&self, transcript: &str) -> SpeechAct {
        classify_speech_act(transcript, self)
    }
}

impl Default for SpeechActRules {
    fn default() -> Self {
        SpeechActRules::from_json(DEFAULT_RULES_JSON).expect("shipped speech-act rules are valid")
    }
}

pub const DEFAULT_RULES_JSON: &str = include_str!("../data/speech_acts.json");
pub const DEFAULT_NORMS_JSON: &str = include_str!("../data/norms.json");

pub fn classify_speech_act(transcript: &str, rules: &SpeechActRules) -> SpeechAct {
    rules
        .rules
        .iter()
        .find(|(_, re)| re.is_match(transcript))
        .map_or(SpeechAct::Other, |(act, _)| *act)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Interval {
    pub start_ms: u64,
    pub end_ms: u64,
}

impl Interval {
    pub fn contains(&self, t: u64) -> bool {
        self.start_ms <= t && t <= self.end_ms
    }

    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InteractionAct {
    pub interval: Interval,
    pub transcript: String,
    pub speech_act: SpeechAct,
    pub gaze_at_student_ratio: f64,
    pub zone: ProxemicsZone,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_distance_m: Option<f64>,
    #[serde(default)]
    pub norms_violated: BTreeSet<String>,
    #[serde(default)]
    pub norms_adhered: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appraisal: Option<AppraisalTag>,
}

/// Groups a time-ordered event stream into one act per utterance.
pub fn segment_acts(events: &[ModalityEvent], rules: &SpeechActRules) -> Result<Vec<InteractionAct>, ActsError> {
    let mut last = 0;
    for event in events {
        event.validate()?;
        let t = event.time_key();
        if t < last {
            return Err(ActsError::Unsorted { last, got: t });
        }
        last = t;
    }

    let mut acts = Vec::new();
    for event in events {
        let ModalityEvent::Utterance { text, start_ms, end_ms } = event else {
            continue;
        };
        let interval = Interval {
            start_ms: *start_ms,
            end_ms: *end_ms,
        };
        let (mut gaze_total, mut gaze_student) = (0u32, 0u32);
        let mut min_distance: Option<f64> = None;
        for sample in events {
            match *sample {
                ModalityEvent::GazeSample { target, t_ms } if interval.contains(t_ms) => {
                    gaze_total += 1;
                    if target == GazeTarget::Student {
                        gaze_student += 1;
                    }
                }
                ModalityEvent::DistanceSample { meters, t_ms } if interval.contains(t_ms) => {
                    min_distance = Some(min_distance.map_or(meters, |m| m.min(meters)));
                }
                _ => {}
            }
        }
        let ratio = if gaze_total == 0 {
            0.0
        } else {
            gaze_student as f64 / gaze_total as f64
        };
        let zone = match min_distance {
            Some(m) => proxemics_zone(m)?,
            None => ProxemicsZone::Public,
        };
        acts.push(InteractionAct {
            interval,
            transcript: text.clone(),
            speech_act: classify_speech_act(text, rules),
            gaze_at_student_ratio: ratio,
            zone,
            min_distance_m: min_distance,
            norms_violated: BTreeSet::new(),
            norms_adhered: BTreeSet::new(),
            appraisal: None,
        });
    }
    Ok(acts)
}

/// Conjunction of guards over act fields. Absent guards are vacuously true.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NormPredicate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speech_act_in: Option<Vec<SpeechAct>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone_in: Option<Vec<ProxemicsZone>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze_at_least: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze_below: Option<f64>,
}

impl NormPredicate {
    pub fn holds(&self, act: &InteractionAct) -> bool {
        self.speech_act_in
            .as_ref()
            .is_none_or(|acts| acts.contains(&act.speech_act))
            && self.zone_in.as_ref().is_none_or(|zones| zones.contains(&act.zone))
            && self.gaze_at_least.is_none_or(|g| act.gaze_at_student_ratio >= g)
            && self.gaze_below.is_none_or(|g| act.gaze_at_student_ratio < g)
    }

    pub fn concerns_zone(&self) -> bool {
        self.zone_in.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NormPolarity {
    MustHold,
    MustNotHold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SocialNorm {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub predicate: NormPredicate,
    pub polarity: NormPolarity,
    pub weight: f64,
    /// A violation of this norm means the turn did not keep the task in focus.
    #[serde(default)]
    pub blocks_task: bool,
}

impl SocialNorm {
    pub fn is_violated_by(&self, act: &InteractionAct) -> bool {
        let holds = self.predicate.holds(act);
        match self.polarity {
            NormPolarity::MustHold => !holds,
            NormPolarity::MustNotHold => holds,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct NormFile {
    schema_version: u32,
    norms: Vec<SocialNorm>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormSet {
    norms: Vec<SocialNorm>,
}

impl NormSet {
    pub fn new(norms: Vec<SocialNorm>) -> Result<Self, ActsError> {
        let mut ids = BTreeSet::new();
        for norm in &norms {
            if !(norm.weight > 0.0 && norm.weight <= 1.0) {
                return Err(ActsError::NormWeight {
                    id: norm.id.clone(),
                    weight: norm.weight,
                });
            }
            if !ids.insert(norm.id.as_str()) {
                return Err(ActsError::DuplicateNorm(norm.id.clone()));
            }
        }
        Ok(NormSet { norms })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ActsError> {
        NormSet::from_json(&read_file(path.as_ref())?)
    }

    pub fn from_json(text: &str) -> Result<Self, ActsError> {
        let file: NormFile = serde_json::from_str(text)?;
        if file.schema_version != NORMS_SCHEMA_VERSION {
            return Err(ActsError::SchemaVersion {
                got: file.schema_version,
                expected: NORMS_SCHEMA_VERSION,
            });
        }
        NormSet::new(file.norms)
    }

    pub fn shipped() -> Self {
        NormSet::from_json(DEFAULT_NORMS_JSON).expect("shipped norm set is valid")
    }

    pub fn norms(&self) -> &[SocialNorm] {
        &self.norms
    }

    pub fn get(&self, id: &str) -> Option<&SocialNorm> {
        self.norms.iter().find(|n| n.id == id)
    }

    /// Violated norms of `act` whose predicate tests the proxemics zone.
    pub fn proxemics_violations(&self, act: &InteractionAct) -> usize {
        act.norms_violated
            .iter()
            .filter(|id| self.get(id).is_some_and(|n| n.predicate.concerns_zone()))
            .count()
    }
}

/// Partitions the norm set into violated and adhered-to, and attaches the
/// resulting self-appraisal.
pub fn evaluate_norms(act: &InteractionAct, norms: &NormSet) -> InteractionAct {
    let mut out = act.clone();
    out.norms_violated.clear();
    out.norms_adhered.clear();
    let (mut violated_weight, mut adhered_weight) = (0.0, 0.0);
    for norm in &norms.norms {
        if norm.is_violated_by(act) {
            out.norms_violated.insert(norm.id.clone());
            violated_weight += norm.weight;
        } else {
            out.norms_adhered.insert(norm.id.clone());
            adhered_weight += norm.weight;
        }
    }
    out.appraisal = Some(if out.norms_violated.is_empty() {
        AppraisalTag::new(AppraisalKind::GoodActSelf, f64::min(1.0, adhered_weight))
    } else {
        AppraisalTag::new(AppraisalKind::BadActSelf, f64::min(1.0, violated_weight))
    });
    out
}

pub fn derive_evaluation(
    act: &InteractionAct,
    lead: LeadAffect,
    phase: ConflictPhase,
    norms: &NormSet,
) -> TeacherEvaluation {
    let task_blocked = act
        .norms_violated
        .iter()
        .any(|id| norms.get(id).is_some_and(|n| n.blocks_task));
    let task_focus = matches!(
        act.speech_act,
        SpeechAct::Instruction | SpeechAct::Question | SpeechAct::Praise
    ) && !task_blocked;
    let relationship = relationship_signal(lead) && act.zone != ProxemicsZone::Intimate;
    TeacherEvaluation {
        task_focus,
        relationship,
        phase,
        source: EvaluationSource::Auto,
        timestamp: act.interval.end_ms,
    }
}

const FAST_TRACK_LEVEL: u8 = 2;

/// Phase after the latest act, given how many acts the current phase has seen.
pub fn track_phase(
    acts_in_phase: u32,
    current: ConflictPhase,
    state: &ConflictState,
    turns_per_phase: u32,
) -> ConflictPhase {
    let fast_track = state.task_level <= ConflictLevel::new(FAST_TRACK_LEVEL).unwrap()
        && state.rel_level <= ConflictLevel::new(FAST_TRACK_LEVEL).unwrap();
    if acts_in_phase >= turns_per_phase || fast_track {
        current.advanced()
    } else {
        current
    }
}

/// Per-session phase bookkeeping around [`track_phase`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PhaseTracker {
    pub phase: ConflictPhase,
    pub acts_in_phase: u32,
    pub turns_per_phase: u32,
}

impl PhaseTracker {
    pub fn new(turns_per_phase: u32) -> Self {
        PhaseTracker {
            phase: ConflictPhase::OPENING,
            acts_in_phase: 0,
            turns_per_phase,
        }
    }

    /// Records one act whose turn produced `state`; returns the phase for the next turn.
    pub fn observe(&mut self, state: &ConflictState) -> ConflictPhase {
        self.phase = self.phase.max(state.phase);
        self.acts_in_phase += 1;
        let next = track_phase(self.acts_in_phase, self.phase, state, self.turns_per_phase);
        if next != self.phase {
            self.phase = next;
            self.acts_in_phase = 0;
        }
        self.phase
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn utter(text: &str, start: u64, end: u64) -> ModalityEvent {
        ModalityEvent::Utterance {
            text: text.into(),
            start_ms: start,
            end_ms: end,
        }
    }

    fn gaze(target: GazeTarget, t: u64) -> ModalityEvent {
        ModalityEvent::GazeSample { target, t_ms: t }
    }

    fn dist(m: f64, t: u64) -> ModalityEvent {
        ModalityEvent::DistanceSample { meters: m, t_ms: t }
    }

    fn act(speech_act: SpeechAct, zone: ProxemicsZone, gaze: f64) -> InteractionAct {
        InteractionAct {
            interval: Interval {
                start_ms: 0,
                end_ms: 1000,
            },
            transcript: String::new(),
            speech_act,
            gaze_at_student_ratio: gaze,
            zone,
            min_distance_m: None,
            norms_violated: BTreeSet::new(),
            norms_adhered: BTreeSet::new(),
            appraisal: None,
        }
    }

    fn norm(id: &str, predicate: NormPredicate, polarity: NormPolarity, weight: f64) -> SocialNorm {
        SocialNorm {
            id: id.into(),
            description: String::new(),
            predicate,
            polarity,
            weight,
            blocks_task: false,
        }
    }

    #[test]
    fn zones() {
        assert_eq!(proxemics_zone(0.30).unwrap(), ProxemicsZone::Intimate);
        assert_eq!(proxemics_zone(0.45).unwrap(), ProxemicsZone::Personal);
        assert_eq!(proxemics_zone(1.2).unwrap(), ProxemicsZone::Social);
        assert_eq!(proxemics_zone(3.6).unwrap(), ProxemicsZone::Public);
        assert_eq!(proxemics_zone(5.0).unwrap(), ProxemicsZone::Public);
        assert!(proxemics_zone(-0.1).is_err());
    }

    #[test]
    fn shipped_rules() {
        let rules = SpeechActRules::default();
        assert_eq!(rules.classify("Put the phone away now."), SpeechAct::Instruction);
        assert_eq!(
            rules.classify("How are you feeling about the task?"),
            SpeechAct::Question
        );
        assert_eq!(rules.classify(""), SpeechAct::Other);
        assert_eq!(
            rules.classify("Put it away or you'll go to the principal's office."),
            SpeechAct::Threat
        );
        assert_eq!(rules.classify("Well done, that's correct."), SpeechAct::Praise);
        assert_eq!(rules.classify("I understand this is frustrating."), SpeechAct::Empathy);
        assert_eq!(rules.classify("That is unacceptable behaviour."), SpeechAct::Reprimand);
    }

    #[test]
    fn bad_rule_pattern_is_reported() {
        let text = r#"{"schemaVersion":1,"rules":[{"act":"threat","patterns":["(unclosed"]}]}"#;
        assert!(matches!(
            SpeechActRules::from_json(text),
            Err(ActsError::Pattern { .. })
        ));
    }

    #[test]
    fn segmentation_examples() {
        let rules = SpeechActRules::default();
        let events = vec![
            gaze(GazeTarget::Student, 100),
            gaze(GazeTarget::Elsewhere, 500),
            gaze(GazeTarget::Student, 900),
            gaze(GazeTarget::OtherStudent, 1500),
            utter("Put the phone away now.", 0, 2000),
        ];
        let acts = segment_acts(&events, &rules).unwrap();
        assert_eq!(acts.len(), 1);
        assert_eq!(acts[0].gaze_at_student_ratio, 0.5);
        assert_eq!(acts[0].zone, ProxemicsZone::Public);

        assert!(segment_acts(&[gaze(GazeTarget::Student, 5)], &rules)
            .unwrap()
            .is_empty());

        let events = vec![dist(1.0, 100), dist(0.4, 200), utter("Hi", 0, 300)];
        let acts = segment_acts(&events, &rules).unwrap();
        assert_eq!(acts[0].zone, ProxemicsZone::Intimate);
        assert_eq!(acts[0].min_distance_m, Some(0.4));
    }

    #[test]
    fn unsorted_events_rejected() {
        let rules = SpeechActRules::default();
        let events = vec![gaze(GazeTarget::Student, 500), gaze(GazeTarget::Student, 100)];
        assert!(matches!(
            segment_acts(&events, &rules),
            Err(ActsError::Unsorted { last: 500, got: 100 })
        ));
        assert!(matches!(
            segment_acts(&[utter("x", 10, 5)], &rules),
            Err(ActsError::InvertedInterval { .. })
        ));
    }

    #[test]
    fn norm_examples() {
        let space = norm(
            "respect-personal-space",
            NormPredicate {
                zone_in: Some(vec![ProxemicsZone::Intimate]),
                ..Default::default()
            },
            NormPolarity::MustNotHold,
            0.8,
        );
        let set = NormSet::new(vec![space.clone()]).unwrap();
        let out = evaluate_norms(&act(SpeechAct::Instruction, ProxemicsZone::Intimate, 0.5), &set);
        assert_eq!(
            out.norms_violated,
            BTreeSet::from(["respect-personal-space".to_string()])
        );
        assert_eq!(out.appraisal, Some(AppraisalTag::new(AppraisalKind::BadActSelf, 0.8)));
        assert_eq!(set.proxemics_violations(&out), 1);

        let eye = norm(
            "eye-contact",
            NormPredicate {
                gaze_at_least: Some(0.5),
                ..Default::default()
            },
            NormPolarity::MustHold,
            0.5,
        );
        let set = NormSet::new(vec![eye]).unwrap();
        let out = evaluate_norms(&act(SpeechAct::Question, ProxemicsZone::Social, 0.7), &set);
        assert!(out.norms_violated.is_empty());
        assert_eq!(out.appraisal, Some(AppraisalTag::new(AppraisalKind::GoodActSelf, 0.5)));

        let out = evaluate_norms(
            &act(SpeechAct::Question, ProxemicsZone::Social, 0.7),
            &NormSet::default(),
        );
        assert_eq!(out.appraisal, Some(AppraisalTag::new(AppraisalKind::GoodActSelf, 0.0)));
    }

    #[test]
    fn norm_weights_validated() {
        let bad = norm("x", NormPredicate::default(), NormPolarity::MustHold, 0.0);
        assert!(matches!(NormSet::new(vec![bad]), Err(ActsError::NormWeight { .. })));
        let a = norm("x", NormPredicate::default(), NormPolarity::MustHold, 0.5);
        assert!(matches!(
            NormSet::new(vec![a.clone(), a]),
            Err(ActsError::DuplicateNorm(_))
        ));
    }

    #[test]
    fn evaluation_examples() {
        let norms = NormSet::default();
        let phase = ConflictPhase::new(2).unwrap();
        let e = derive_evaluation(
            &act(SpeechAct::Instruction, ProxemicsZone::Social, 1.0),
            LeadAffect::Calm,
            phase,
            &norms,
        );
        assert_eq!((e.task_focus, e.relationship), (true, true));
        assert_eq!(e.source, EvaluationSource::Auto);
        assert_eq!(e.phase, phase);
        let e = derive_evaluation(
            &act(SpeechAct::Threat, ProxemicsZone::Social, 1.0),
            LeadAffect::Anger,
            phase,
            &norms,
        );
        assert_eq!((e.task_focus, e.relationship), (false, false));
        let e = derive_evaluation(
            &act(SpeechAct::Empathy, ProxemicsZone::Intimate, 1.0),
            LeadAffect::Contentment,
            phase,
            &norms,
        );
        assert_eq!((e.task_focus, e.relationship), (false, false));
    }

    #[test]
    fn task_blocking_norm() {
        let mut n = norm(
            "look-when-instructing",
            NormPredicate {
                speech_act_in: Some(vec![SpeechAct::Instruction]),
                gaze_below: Some(0.25),
                ..Default::default()
            },
            NormPolarity::MustNotHold,
            0.4,
        );
        n.blocks_task = true;
        let set = NormSet::new(vec![n]).unwrap();
        let judged = evaluate_norms(&act(SpeechAct::Instruction, ProxemicsZone::Social, 0.0), &set);
        let e = derive_evaluation(&judged, LeadAffect::Calm, ConflictPhase::OPENING, &set);
        assert!(!e.task_focus);
        assert!(e.relationship);
    }

    #[test]
    fn phase_tracking() {
        let s = ConflictState::at(4, 4, 1).unwrap();
        assert_eq!(track_phase(4, ConflictPhase::OPENING, &s, 4).index(), 2);
        assert_eq!(track_phase(3, ConflictPhase::OPENING, &s, 4).index(), 1);
        let s = ConflictState::at(2, 1, 2).unwrap();
        let p3 = track_phase(1, ConflictPhase::new(2).unwrap(), &s, 4);
        assert_eq!(p3.index(), 3);
        assert_eq!(track_phase(1, p3, &s, 4).index(), 4);
        assert_eq!(track_phase(9, ConflictPhase::SOLUTION, &s, 4).index(), 4);

        let mut tracker = PhaseTracker::new(4);
        let mid = ConflictState::at(4, 4, 1).unwrap();
        let phases: Vec<u8> = (0..5).map(|_| tracker.observe(&mid).index()).collect();
        assert_eq!(phases, vec![1, 1, 1, 2, 2]);
    }

    proptest! {
        #[test]
        fn zone_is_monotone(a in 0.0f64..10.0, b in 0.0f64..10.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(proxemics_zone(lo).unwrap() <= proxemics_zone(hi).unwrap());
        }

        #[test]
        fn one_act_per_utterance(spec in proptest::collection::vec((0u8..3, 0u64..500), 0..60)) {
            let mut t = 0;
            let mut events = Vec::new();
            let mut utterances = 0;
            for (kind, dt) in spec {
                t += dt;
                events.push(match kind {
                    0 => { utterances += 1; utter("Sit down please.", t.saturating_sub(300), t) }
                    1 => gaze(GazeTarget::Student, t),
                    _ => dist(1.5, t),
                });
            }
            let acts = segment_acts(&events, &SpeechActRules::default()).unwrap();
            prop_assert_eq!(acts.len(), utterances);
            for a in &acts {
                prop_assert!((0.0..=1.0).contains(&a.gaze_at_student_ratio));
            }
        }

        #[test]
        fn norms_partition(sa in 0usize..7, zone in 0usize..4, g in 0.0f64..=1.0) {
            let acts = [SpeechAct::Instruction, SpeechAct::Question, SpeechAct::Reprimand, SpeechAct::Praise,
                        SpeechAct::Empathy, SpeechAct::Threat, SpeechAct::Other];
            let zones = [ProxemicsZone::Intimate, ProxemicsZone::Personal, ProxemicsZone::Social, ProxemicsZone::Public];
            let set = NormSet::shipped();
            let out = evaluate_norms(&act(acts[sa], zones[zone], g), &set);
            prop_assert!(out.norms_violated.is_disjoint(&out.norms_adhered));
            prop_assert_eq!(out.norms_violated.len() + out.norms_adhered.len(), set.norms().len());
            let again = evaluate_norms(&act(acts[sa], zones[zone], g), &set);
            prop_assert_eq!(out, again);
        }
    }
}
