//! Continuous affect model in Pleasure-Arousal-Dominance space.
//!
//! Unimodal cues are fused into one PAD estimate by a confidence- and
//! recency-weighted mean. Appraisal tags spawn decaying emotion instances
//! which pull a slower mood toward their centroid. The resulting estimate is
//! discretized into a lead affect, which in turn yields the automated
//! relationship judgment.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::path::Path;
use thiserror::Error;

pub const DEFAULT_CUE_HALF_LIFE_MS: f64 = 3_000.0;
pub const DEFAULT_EMOTION_HALF_LIFE_MS: f64 = 10_000.0;
pub const DEFAULT_MOOD_TIME_CONSTANT_MS: f64 = 60_000.0;
/// Emotion instances weaker than this are dropped on tick.
pub const PRUNE_INTENSITY: f64 = 0.01;

#[derive(Debug, Error)]
pub enum AffectError {
    #[error("cannot read tag table {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed tag table: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cue must carry at least one PAD dimension")]
    EmptyCue,
    #[error("cue confidence {0} outside [0,1]")]
    Confidence(f64),
    #[error("value {0} is not finite")]
    NotFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PadVector {
    pub pleasure: f64,
    pub arousal: f64,
    pub dominance: f64,
}

impl PadVector {
    pub const NEUTRAL: PadVector = PadVector {
        pleasure: 0.0,
        arousal: 0.0,
        dominance: 0.0,
    };

    /// Builds a vector, clamping each component to [-1, 1].
    pub fn new(pleasure: f64, arousal: f64, dominance: f64) -> Self {
        PadVector {
            pleasure: clamp_unit(pleasure),
            arousal: clamp_unit(arousal),
            dominance: clamp_unit(dominance),
        }
    }

    pub fn clamped(self) -> Self {
        PadVector::new(self.pleasure, self.arousal, self.dominance)
    }

    pub fn components(&self) -> [f64; 3] {
        [self.pleasure, self.arousal, self.dominance]
    }

    fn from_components(c: [f64; 3]) -> Self {
        PadVector::new(c[0], c[1], c[2])
    }

    pub fn lerp(self, target: PadVector, fraction: f64) -> PadVector {
        let a = self.components();
        let b = target.components();
        PadVector::from_components([0, 1, 2].map(|i| a[i] + (b[i] - a[i]) * fraction))
    }
}

fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-1.0, 1.0)
    }
}

/// A PAD reading where any subset of the dimensions may be missing.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PartialPad {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pleasure: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arousal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dominance: Option<f64>,
}

impl PartialPad {
    pub fn components(&self) -> [Option<f64>; 3] {
        [self.pleasure, self.arousal, self.dominance]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Modality {
    Voice,
    Face,
    Posture,
    TranscriptSentiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AffectCue {
    pub modality: Modality,
    pub values: PartialPad,
    pub confidence: f64,
    pub timestamp: u64,
}

impl AffectCue {
    pub fn validate(&self) -> Result<(), AffectError> {
        if self.values.components().iter().all(Option::is_none) {
            return Err(AffectError::EmptyCue);
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(AffectError::Confidence(self.confidence));
        }
        for v in self.values.components().into_iter().flatten() {
            if !v.is_finite() {
                return Err(AffectError::NotFinite(v));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FusedAffect {
    pub pad: PadVector,
    /// Set when no cue contributed any weight.
    pub no_data: bool,
}

fn decay_factor(age_ms: f64, half_life_ms: f64) -> f64 {
    (-std::f64::consts::LN_2 * age_ms / half_life_ms).exp()
}

/// Weighted mean of `(weight, value)` pairs, independent of input order.
///
/// Pairs are summed in a canonical order so permuted inputs give bit-identical
/// results, and the mean is clamped to the contributors' range to absorb
/// rounding.
fn canonical_weighted_mean(mut pairs: Vec<(f64, f64)>) -> Option<f64> {
    pairs.retain(|&(w, _)| w > 0.0);
    match pairs.len() {
        0 => return None,
        1 => return Some(pairs[0].1),
        _ => {}
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let (mut num, mut den) = (0.0, 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(w, v) in &pairs {
        num += w * v;
        den += w;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Some((num / den).clamp(lo, hi))
}

/// Fuses unimodal cues observed up to `now`.
///
/// Each cue weighs `confidence * 2^(-age / half_life)`. A dimension no cue
/// carries fuses to 0.
pub fn fuse_cues(cues: &[AffectCue], now: u64, cue_half_life_ms: f64) -> FusedAffect {
    let mut per_dim: [Vec<(f64, f64)>; 3] = Default::default();
    for cue in cues {
        let age = now.saturating_sub(cue.timestamp) as f64;
        let weight = cue.confidence * decay_factor(age, cue_half_life_ms);
        for (dim, value) in cue.values.components().into_iter().enumerate() {
            if let Some(v) = value {
                per_dim[dim].push((weight, clamp_unit(v)));
            }
        }
    }
    let mut any = false;
    let fused = per_dim.map(|pairs| match canonical_weighted_mean(pairs) {
        Some(v) => {
            any = true;
            v
        }
        None => 0.0,
    });
    FusedAffect {
        pad: PadVector::from_components(fused),
        no_data: !any,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AppraisalKind {
    GoodEvent,
    BadEvent,
    GoodActOther,
    BadActOther,
    GoodActSelf,
    BadActSelf,
}

impl AppraisalKind {
    pub const ALL: [AppraisalKind; 6] = [
        AppraisalKind::GoodEvent,
        AppraisalKind::BadEvent,
        AppraisalKind::GoodActOther,
        AppraisalKind::BadActOther,
        AppraisalKind::GoodActSelf,
        AppraisalKind::BadActSelf,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppraisalTag {
    pub tag: AppraisalKind,
    pub intensity: f64,
}

impl AppraisalTag {
    pub fn new(tag: AppraisalKind, intensity: f64) -> Self {
        AppraisalTag {
            tag,
            intensity: if intensity.is_nan() {
                0.0
            } else {
                intensity.clamp(0.0, 1.0)
            },
        }
    }
}

/// PAD position each appraisal tag spawns its emotion at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TagTable {
    pub good_event: PadVector,
    pub bad_event: PadVector,
    pub good_act_other: PadVector,
    pub bad_act_other: PadVector,
    pub good_act_self: PadVector,
    pub bad_act_self: PadVector,
}

impl Default for TagTable {
    // Joy, distress, admiration, reproach-with-fear, pride, shame.
    fn default() -> Self {
        TagTable {
            good_event: PadVector::new(0.4, 0.2, 0.1),
            bad_event: PadVector::new(-0.4, -0.2, -0.5),
            good_act_other: PadVector::new(0.5, 0.3, -0.2),
            bad_act_other: PadVector::new(-0.5, 0.6, -0.3),
            good_act_self: PadVector::new(0.4, 0.3, 0.3),
            bad_act_self: PadVector::new(-0.3, 0.1, -0.6),
        }
    }
}

impl TagTable {
    pub fn load(path: impl AsRef<Path>) -> Result<TagTable, AffectError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| AffectError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let table: TagTable = serde_json::from_str(&text)?;
        Ok(table.clamped())
    }

    fn clamped(self) -> TagTable {
        TagTable {
            good_event: self.good_event.clamped(),
            bad_event: self.bad_event.clamped(),
            good_act_other: self.good_act_other.clamped(),
            bad_act_other: self.bad_act_other.clamped(),
            good_act_self: self.good_act_self.clamped(),
            bad_act_self: self.bad_act_self.clamped(),
        }
    }

    pub fn position(&self, kind: AppraisalKind) -> PadVector {
        match kind {
            AppraisalKind::GoodEvent => self.good_event,
            AppraisalKind::BadEvent => self.bad_event,
            AppraisalKind::GoodActOther => self.good_act_other,
            AppraisalKind::BadActOther => self.bad_act_other,
            AppraisalKind::GoodActSelf => self.good_act_self,
            AppraisalKind::BadActSelf => self.bad_act_self,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EmotionInstance {
    pub source_tag: AppraisalTag,
    pub position: PadVector,
    pub intensity: f64,
    pub onset: u64,
}

pub fn appraise(tag: AppraisalTag, now: u64, table: &TagTable) -> EmotionInstance {
    let tag = AppraisalTag::new(tag.tag, tag.intensity);
    EmotionInstance {
        source_tag: tag,
        position: table.position(tag.tag),
        intensity: tag.intensity,
        onset: now,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoodState {
    pub current: PadVector,
    pub baseline: PadVector,
}

impl MoodState {
    pub fn at_baseline(baseline: PadVector) -> Self {
        MoodState {
            current: baseline,
            baseline,
        }
    }
}

/// Default personality baseline: mildly positive, calm and self-assured.
pub const DEFAULT_BASELINE: PadVector = PadVector {
    pleasure: 0.2,
    arousal: -0.2,
    dominance: 0.1,
};

impl Default for MoodState {
    fn default() -> Self {
        MoodState::at_baseline(DEFAULT_BASELINE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct AffectConfig {
    pub cue_half_life_ms: f64,
    pub emotion_half_life_ms: f64,
    pub mood_time_constant_ms: f64,
}

impl Default for AffectConfig {
    fn default() -> Self {
        AffectConfig {
            cue_half_life_ms: DEFAULT_CUE_HALF_LIFE_MS,
            emotion_half_life_ms: DEFAULT_EMOTION_HALF_LIFE_MS,
            mood_time_constant_ms: DEFAULT_MOOD_TIME_CONSTANT_MS,
        }
    }
}

/// Decays emotions and relaxes mood over `dt_ms`.
pub fn tick(
    emotions: &[EmotionInstance],
    mood: &MoodState,
    dt_ms: f64,
    config: &AffectConfig,
) -> (Vec<EmotionInstance>, MoodState) {
    if dt_ms <= 0.0 {
        return (emotions.to_vec(), *mood);
    }
    let factor = decay_factor(dt_ms, config.emotion_half_life_ms);
    let decayed: Vec<EmotionInstance> = emotions
        .iter()
        .map(|e| EmotionInstance {
            intensity: e.intensity * factor,
            ..*e
        })
        .filter(|e| e.intensity >= PRUNE_INTENSITY)
        .collect();

    let target = emotion_centroid(&decayed).unwrap_or(mood.baseline);
    let fraction = 1.0 - (-dt_ms / config.mood_time_constant_ms).exp();
    let next_mood = MoodState {
        current: mood.current.lerp(target, fraction),
        baseline: mood.baseline,
    };
    (decayed, next_mood)
}

fn emotion_centroid(emotions: &[EmotionInstance]) -> Option<PadVector> {
    let total: f64 = emotions.iter().map(|e| e.intensity).sum();
    if total <= 0.0 {
        return None;
    }
    let mut acc = [0.0; 3];
    for e in emotions {
        for (a, c) in acc.iter_mut().zip(e.position.components()) {
            *a += e.intensity * c;
        }
    }
    Some(PadVector::from_components(acc.map(|a| a / total)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LeadAffect {
    Anger,
    Fear,
    Shame,
    Contentment,
    Sadness,
    Pride,
    Anxiety,
    Calm,
}

fn non_negative(v: f64) -> bool {
    v.partial_cmp(&0.0) != Some(Ordering::Less)
}

/// Octant lookup on the signs of (P, A, D); zero counts as positive.
pub fn lead_affect(pad: PadVector) -> LeadAffect {
    match (
        non_negative(pad.pleasure),
        non_negative(pad.arousal),
        non_negative(pad.dominance),
    ) {
        (false, true, true) => LeadAffect::Anger,
        (false, true, false) => LeadAffect::Fear,
        (false, false, false) => LeadAffect::Sadness,
        (false, false, true) => LeadAffect::Shame,
        (true, true, true) => LeadAffect::Pride,
        (true, true, false) => LeadAffect::Anxiety,
        (true, false, true) => LeadAffect::Contentment,
        (true, false, false) => LeadAffect::Calm,
    }
}

/// Whether a lead affect counts as attending to the relationship.
pub fn relationship_signal(lead: LeadAffect) -> bool {
    matches!(lead, LeadAffect::Contentment | LeadAffect::Calm | LeadAffect::Pride)
}

/// Per-session affect state: recent cues, live emotions and mood.
#[derive(Debug, Clone)]
pub struct AffectEngine {
    config: AffectConfig,
    table: TagTable,
    cues: Vec<AffectCue>,
    emotions: Vec<EmotionInstance>,
    mood: MoodState,
    clock_ms: u64,
}

/// Cues older than this many cue half-lives no longer matter to the fused estimate.
const CUE_WINDOW_HALF_LIVES: f64 = 20.0;

impl AffectEngine {
    pub fn new(config: AffectConfig, table: TagTable) -> Self {
        AffectEngine {
            config,
            table,
            cues: Vec::new(),
            emotions: Vec::new(),
            mood: MoodState::default(),
            clock_ms: 0,
        }
    }

    pub fn config(&self) -> &AffectConfig {
        &self.config
    }

    pub fn mood(&self) -> &MoodState {
        &self.mood
    }

    pub fn emotions(&self) -> &[EmotionInstance] {
        &self.emotions
    }

    /// Advances internal time to `now`; earlier times are ignored.
    pub fn advance_to(&mut self, now: u64) {
        if now > self.clock_ms {
            let (emotions, mood) = tick(&self.emotions, &self.mood, (now - self.clock_ms) as f64, &self.config);
            self.emotions = emotions;
            self.mood = mood;
            self.clock_ms = now;
        }
    }

    pub fn add_cue(&mut self, cue: AffectCue) -> Result<(), AffectError> {
        cue.validate()?;
        self.advance_to(cue.timestamp);
        self.cues.push(cue);
        let horizon = (self.config.cue_half_life_ms * CUE_WINDOW_HALF_LIVES) as u64;
        let cutoff = self.clock_ms.saturating_sub(horizon);
        self.cues.retain(|c| c.timestamp >= cutoff);
        Ok(())
    }

    pub fn fused(&self, now: u64) -> FusedAffect {
        fuse_cues(&self.cues, now.max(self.clock_ms), self.config.cue_half_life_ms)
    }

    pub fn appraise(&mut self, tag: AppraisalTag, now: u64) -> EmotionInstance {
        self.advance_to(now);
        let emotion = appraise(tag, self.clock_ms, &self.table);
        if emotion.intensity > 0.0 {
            self.emotions.push(emotion);
        }
        emotion
    }

    /// The estimate that drives the lead affect: the mean of fused cues and
    /// mood when cues are present, otherwise mood alone.
    pub fn expressed(&self, now: u64) -> PadVector {
        let fused = self.fused(now);
        if fused.no_data {
            self.mood.current
        } else {
            fused.pad.lerp(self.mood.current, 0.5)
        }
    }
}

impl Default for AffectEngine {
    fn default() -> Self {
        AffectEngine::new(AffectConfig::default(), TagTable::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cue_p(p: f64, confidence: f64, timestamp: u64) -> AffectCue {
        AffectCue {
            modality: Modality::Voice,
            values: PartialPad {
                pleasure: Some(p),
                ..Default::default()
            },
            confidence,
            timestamp,
        }
    }

    #[test]
    fn fusion_examples() {
        let f = fuse_cues(&[cue_p(0.5, 1.0, 0)], 0, 3000.0);
        assert_eq!(f.pad.pleasure, 0.5);
        assert!(!f.no_data);
        assert_eq!(f.pad.arousal, 0.0);

        let f = fuse_cues(&[cue_p(0.2, 0.7, 100), cue_p(0.6, 0.7, 100)], 100, 3000.0);
        assert!((f.pad.pleasure - 0.4).abs() < 1e-12);

        // Stale cue at one half-life carries weight 0.5: (0*0.5 + 0.6*1)/1.5.
        let f = fuse_cues(&[cue_p(0.0, 1.0, 0), cue_p(0.6, 1.0, 3000)], 3000, 3000.0);
        assert!((f.pad.pleasure - 0.4).abs() < 1e-12);
    }

    #[test]
    fn empty_cues_are_neutral_with_flag() {
        let f = fuse_cues(&[], 10, 3000.0);
        assert_eq!(f.pad, PadVector::NEUTRAL);
        assert!(f.no_data);
    }

    #[test]
    fn cue_validation() {
        let mut c = cue_p(0.1, 1.0, 0);
        c.values = PartialPad::default();
        assert!(matches!(c.validate(), Err(AffectError::EmptyCue)));
        assert!(matches!(cue_p(0.1, 1.5, 0).validate(), Err(AffectError::Confidence(_))));
    }

    #[test]
    fn appraisal_examples() {
        let table = TagTable::default();
        let e = appraise(AppraisalTag::new(AppraisalKind::BadActOther, 1.0), 5, &table);
        assert_eq!(e.position, PadVector::new(-0.5, 0.6, -0.3));
        assert_eq!(e.intensity, 1.0);
        assert_eq!(e.onset, 5);
        let e = appraise(AppraisalTag::new(AppraisalKind::GoodEvent, 0.0), 0, &table);
        assert_eq!(e.intensity, 0.0);
        let e = appraise(AppraisalTag::new(AppraisalKind::GoodActSelf, 0.5), 0, &table);
        assert_eq!(e.intensity, 0.5);
        assert_eq!(e.position, table.good_act_self);
    }

    #[test]
    fn tick_examples() {
        let config = AffectConfig::default();
        let table = TagTable::default();
        let e = appraise(AppraisalTag::new(AppraisalKind::BadEvent, 0.8), 0, &table);
        let mood = MoodState::default();
        let (out, _) = tick(&[e], &mood, config.emotion_half_life_ms, &config);
        assert!((out[0].intensity - 0.4).abs() < 1e-12);

        let (same, same_mood) = tick(&[e], &mood, 0.0, &config);
        assert_eq!(same, vec![e]);
        assert_eq!(same_mood, mood);

        let off = MoodState {
            current: PadVector::new(-0.9, 0.9, -0.9),
            baseline: DEFAULT_BASELINE,
        };
        let (_, relaxed) = tick(&[], &off, 1e12, &config);
        for (a, b) in relaxed.current.components().iter().zip(DEFAULT_BASELINE.components()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn weak_emotions_are_pruned() {
        let config = AffectConfig::default();
        let e = appraise(
            AppraisalTag::new(AppraisalKind::GoodEvent, 0.019),
            0,
            &TagTable::default(),
        );
        let (out, _) = tick(&[e], &MoodState::default(), config.emotion_half_life_ms, &config);
        assert!(out.is_empty());
    }

    #[test]
    fn lead_affect_table() {
        assert_eq!(lead_affect(PadVector::new(-0.4, 0.7, 0.5)), LeadAffect::Anger);
        assert_eq!(lead_affect(PadVector::new(0.6, -0.2, 0.8)), LeadAffect::Contentment);
        assert_eq!(lead_affect(PadVector::NEUTRAL), LeadAffect::Pride);
        assert_eq!(lead_affect(PadVector::new(-0.1, 0.1, -0.1)), LeadAffect::Fear);
        assert_eq!(lead_affect(PadVector::new(-0.1, -0.1, -0.1)), LeadAffect::Sadness);
        assert_eq!(lead_affect(PadVector::new(-0.1, -0.1, 0.1)), LeadAffect::Shame);
        assert_eq!(lead_affect(PadVector::new(0.1, 0.1, -0.1)), LeadAffect::Anxiety);
        assert_eq!(lead_affect(PadVector::new(0.1, -0.1, -0.1)), LeadAffect::Calm);
    }

    #[test]
    fn relationship_signal_table() {
        assert!(relationship_signal(LeadAffect::Calm));
        assert!(relationship_signal(LeadAffect::Pride));
        assert!(relationship_signal(LeadAffect::Contentment));
        for lead in [
            LeadAffect::Anger,
            LeadAffect::Fear,
            LeadAffect::Shame,
            LeadAffect::Sadness,
            LeadAffect::Anxiety,
        ] {
            assert!(!relationship_signal(lead));
        }
    }

    #[test]
    fn engine_emotions_move_mood() {
        let mut engine = AffectEngine::default();
        engine.appraise(AppraisalTag::new(AppraisalKind::BadActSelf, 1.0), 0);
        engine.advance_to(30_000);
        assert!(engine.mood().current.pleasure < DEFAULT_BASELINE.pleasure);
        assert_eq!(engine.emotions().len(), 1);
    }

    #[test]
    fn tag_table_file_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tags.json");
        let table = TagTable {
            good_event: PadVector::new(0.9, 0.9, 0.9),
            ..TagTable::default()
        };
        std::fs::write(&path, serde_json::to_string(&table).unwrap()).unwrap();
        assert_eq!(TagTable::load(&path).unwrap(), table);
    }

    proptest! {
        #[test]
        fn decay_is_monotone(i in 0.0f64..1.0, dt1 in 0.0f64..1e5, extra in 0.0f64..1e5) {
            let config = AffectConfig::default();
            let e = EmotionInstance {
                source_tag: AppraisalTag::new(AppraisalKind::GoodEvent, i),
                position: PadVector::NEUTRAL,
                intensity: i,
                onset: 0,
            };
            let mood = MoodState::default();
            let a = tick(&[e], &mood, dt1, &config).0.first().map_or(0.0, |e| e.intensity);
            let b = tick(&[e], &mood, dt1 + extra, &config).0.first().map_or(0.0, |e| e.intensity);
            prop_assert!(b <= a);
        }

        #[test]
        fn lead_affect_scale_invariant(
            p in -1.0f64..1.0, a in -1.0f64..1.0, d in -1.0f64..1.0, s in 0.01f64..1.0,
        ) {
            prop_assert_eq!(
                lead_affect(PadVector::new(p, a, d)),
                lead_affect(PadVector::new(p * s, a * s, d * s))
            );
        }

        #[test]
        fn engine_outputs_stay_in_cube(
            steps in proptest::collection::vec((0u64..5000, -3.0f64..3.0, 0.0f64..1.0, 0usize..6), 1..40),
        ) {
            let mut engine = AffectEngine::default();
            let mut t = 0;
            for (dt, v, c, tag) in steps {
                t += dt;
                engine.add_cue(AffectCue {
                    modality: Modality::Face,
                    values: PartialPad { pleasure: Some(v), arousal: Some(-v), dominance: None },
                    confidence: c,
                    timestamp: t,
                }).unwrap();
                engine.appraise(AppraisalTag::new(AppraisalKind::ALL[tag], c), t);
                for pad in [engine.fused(t).pad, engine.mood().current, engine.expressed(t)] {
                    for x in pad.components() {
                        prop_assert!((-1.0..=1.0).contains(&x));
                    }
                }
            }
        }
    }
}
