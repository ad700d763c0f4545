//! Payload records, one per topic. Field names are camelCase on the wire.

use crate::acts::{InteractionAct, ModalityEvent};
use crate::affect::{AffectCue, AppraisalTag, LeadAffect, PadVector};
use crate::catalog::{BehaviorSpec, HeterogeneityTags};
use crate::conflict::{ConflictState, Outcome, RegulationStyle, TeacherEvaluation};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ControlAction {
    Start,
    Stop,
}

/// `session.control`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ControlPayload {
    pub action: ControlAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<ConflictState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heterogeneity: Option<HeterogeneityTags>,
    /// Opening behavior the student shows before the first turn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opening: Option<BehaviorSpec>,
}

/// `teacher.cue`: raw teacher input as it arrived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TeacherInput {
    Cue(AffectCue),
    Modality(ModalityEvent),
}

impl TeacherInput {
    pub fn media_time_ms(&self) -> u64 {
        match self {
            TeacherInput::Cue(c) => c.timestamp,
            TeacherInput::Modality(m) => m.time_key(),
        }
    }
}

/// `wizard.rating`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RatingPayload {
    pub evaluation: TeacherEvaluation,
    pub style: RegulationStyle,
}

/// `teacher.act`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TeacherActPayload {
    pub act: InteractionAct,
    pub lead: LeadAffect,
    /// Absent when the act arrived after the conflict had ended.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<TeacherEvaluation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<RegulationStyle>,
}

/// `norm.eval`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NormEvalPayload {
    pub violated: Vec<String>,
    pub adhered: Vec<String>,
    pub appraisal: AppraisalTag,
    /// Violated norms whose predicate tests the proxemics zone.
    pub proxemics_violations: u32,
}

/// `affect.state`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AffectStatePayload {
    /// Estimate used for the lead affect and for fragment detection.
    pub pad: PadVector,
    pub fused: PadVector,
    pub no_data: bool,
    pub mood: PadVector,
    pub lead: LeadAffect,
}

/// `student.command`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StudentCommandPayload {
    pub turn: u32,
    pub state: ConflictState,
    pub behavior: BehaviorSpec,
}

/// `outcome`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OutcomePayload {
    pub outcome: Outcome,
    pub state: ConflictState,
}
