//! Post-session analytics over a recorded log.

use super::payload::{
    AffectStatePayload, NormEvalPayload, OutcomePayload, RatingPayload, TeacherActPayload, TeacherInput,
};
use super::{EventLog, Topic};
use crate::acts::{GazeTarget, ModalityEvent};
use crate::affect::PadVector;
use crate::conflict::{Outcome, RegulationStyle};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct FragmentParams {
    pub pleasure_max: f64,
    pub arousal_min: f64,
    pub min_duration_ms: u64,
}

impl Default for FragmentParams {
    fn default() -> Self {
        FragmentParams {
            pleasure_max: -0.2,
            arousal_min: 0.3,
            min_duration_ms: 3_000,
        }
    }
}

impl FragmentParams {
    pub fn is_demanding(&self, pad: &PadVector) -> bool {
        pad.pleasure <= self.pleasure_max && pad.arousal >= self.arousal_min
    }
}

/// A stretch of sustained negative, aroused affect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Fragment {
    pub start_ms: u64,
    pub end_ms: u64,
    pub reason: FragmentReason,
    /// Sample with the largest arousal-minus-pleasure inside the interval.
    pub peak: PadVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FragmentReason {
    NegativeHighArousal,
}

fn affect_samples(log: &EventLog) -> Vec<(u64, PadVector)> {
    log.by_topic(Topic::AffectState)
        .filter_map(|e| match e.payload_as::<AffectStatePayload>() {
            Ok(p) => Some((e.media_time_ms, p.pad)),
            Err(err) => {
                tracing::warn!(seq = e.seq, %err, "skipping unreadable affect.state payload");
                None
            }
        })
        .collect()
}

/// Maximal runs of consecutive affect samples that all satisfy the
/// demanding-affect predicate, kept when they span at least the minimum duration.
pub fn extract_fragments(log: &EventLog, params: &FragmentParams) -> Vec<Fragment> {
    let samples = affect_samples(log);
    let mut fragments = Vec::new();
    let mut i = 0;
    while i < samples.len() {
        if !params.is_demanding(&samples[i].1) {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < samples.len() && params.is_demanding(&samples[i + 1].1) {
            i += 1;
        }
        let run = &samples[start..=i];
        let (start_ms, end_ms) = (run[0].0, run[run.len() - 1].0);
        if end_ms - start_ms >= params.min_duration_ms {
            let peak = run.iter().map(|s| s.1).fold(run[0].1, |best, pad| {
                if pad.arousal - pad.pleasure > best.arousal - best.pleasure {
                    pad
                } else {
                    best
                }
            });
            fragments.push(Fragment {
                start_ms,
                end_ms,
                reason: FragmentReason::NegativeHighArousal,
                peak,
            });
        }
        i += 1;
    }
    fragments
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StyleHistogram {
    pub problem_solve: u32,
    pub force: u32,
    pub smooth: u32,
    pub withdraw: u32,
}

impl StyleHistogram {
    pub fn add(&mut self, style: RegulationStyle) {
        *self.slot(style) += 1;
    }

    pub fn get(&self, style: RegulationStyle) -> u32 {
        match style {
            RegulationStyle::ProblemSolve => self.problem_solve,
            RegulationStyle::Force => self.force,
            RegulationStyle::Smooth => self.smooth,
            RegulationStyle::Withdraw => self.withdraw,
        }
    }

    fn slot(&mut self, style: RegulationStyle) -> &mut u32 {
        match style {
            RegulationStyle::ProblemSolve => &mut self.problem_solve,
            RegulationStyle::Force => &mut self.force,
            RegulationStyle::Smooth => &mut self.smooth,
            RegulationStyle::Withdraw => &mut self.withdraw,
        }
    }

    pub fn total(&self) -> u32 {
        self.problem_solve + self.force + self.smooth + self.withdraw
    }
}

/// Which input streams were present in the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StreamPresence {
    pub gaze: bool,
    pub utterances: bool,
    pub norm_evaluations: bool,
    pub evaluations: bool,
    pub affect: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SignalSummary {
    pub eye_contact_ratio: f64,
    pub proxemics_violation_count: u32,
    pub teacher_talk_time_ms: u64,
    pub act_count: u32,
    pub style_histogram: StyleHistogram,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    pub present: StreamPresence,
}

pub fn summarize_signals(log: &EventLog) -> SignalSummary {
    let mut summary = SignalSummary::default();
    let (mut gaze_total, mut gaze_student) = (0u64, 0u64);
    for event in &log.records {
        match event.topic {
            Topic::TeacherCue => match event.payload_as::<TeacherInput>() {
                Ok(TeacherInput::Modality(ModalityEvent::GazeSample { target, .. })) => {
                    gaze_total += 1;
                    if target == GazeTarget::Student {
                        gaze_student += 1;
                    }
                }
                Ok(TeacherInput::Modality(ModalityEvent::Utterance { start_ms, end_ms, .. })) => {
                    summary.present.utterances = true;
                    summary.teacher_talk_time_ms += end_ms.saturating_sub(start_ms);
                }
                _ => {}
            },
            Topic::TeacherAct => {
                summary.act_count += 1;
                if let Ok(TeacherActPayload { style: Some(style), .. }) = event.payload_as() {
                    summary.present.evaluations = true;
                    summary.style_histogram.add(style);
                }
            }
            Topic::WizardRating => {
                if let Ok(RatingPayload { style, .. }) = event.payload_as() {
                    summary.present.evaluations = true;
                    summary.style_histogram.add(style);
                }
            }
            Topic::NormEval => {
                if let Ok(p) = event.payload_as::<NormEvalPayload>() {
                    summary.present.norm_evaluations = true;
                    summary.proxemics_violation_count += p.proxemics_violations;
                }
            }
            Topic::AffectState => summary.present.affect = true,
            Topic::Outcome => {
                if let Ok(p) = event.payload_as::<OutcomePayload>() {
                    summary.outcome = Some(p.outcome);
                }
            }
            Topic::SessionControl | Topic::StudentCommand => {}
        }
    }
    summary.present.gaze = gaze_total > 0;
    if gaze_total > 0 {
        summary.eye_contact_ratio = gaze_student as f64 / gaze_total as f64;
    }
    summary
}
