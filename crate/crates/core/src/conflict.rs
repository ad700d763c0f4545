//! Two-dimensional conflict state machine.
//!
//! A teacher turn is judged on two booleans: did it keep the task in focus,
//! and did it attend to the relationship. The pair classifies into one of four
//! regulation styles, each of which shifts the task and relationship ladders
//! by one rung. Both ladders run from 1 (optimal) to 7 (escalated).

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Default number of turns before an unresolved conflict counts as escalated.
pub const DEFAULT_TURN_BUDGET: u32 = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConflictError {
    #[error("conflict level {0} outside [1,7]")]
    LevelOutOfRange(i64),
    #[error("conflict phase {0} outside [1,4]")]
    PhaseOutOfRange(i64),
    #[error("session already ended with {0:?}")]
    Terminal(Outcome),
    #[error("phase regression: evaluation phase {got} is below current phase {current}")]
    PhaseRegression { current: u8, got: u8 },
    #[error("timestamp regression: {got} ms is before {last} ms")]
    TimestampRegression { last: u64, got: u64 },
}

/// A rung on one of the seven-level conflict ladders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ConflictLevel(u8);

impl ConflictLevel {
    pub const OPTIMAL: ConflictLevel = ConflictLevel(1);
    pub const ESCALATED: ConflictLevel = ConflictLevel(7);
    pub const MIDPOINT: ConflictLevel = ConflictLevel(4);

    pub fn new(index: u8) -> Result<Self, ConflictError> {
        if (1..=7).contains(&index) {
            Ok(ConflictLevel(index))
        } else {
            Err(ConflictError::LevelOutOfRange(index as i64))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// Moves one rung, saturating at the ladder ends.
    pub fn shifted(self, delta: i8) -> ConflictLevel {
        let next = (self.0 as i16 + delta as i16).clamp(1, 7);
        ConflictLevel(next as u8)
    }

    pub fn all() -> impl Iterator<Item = ConflictLevel> {
        (1..=7).map(ConflictLevel)
    }
}

impl TryFrom<u8> for ConflictLevel {
    type Error = ConflictError;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        ConflictLevel::new(value)
    }
}

impl From<ConflictLevel> for u8 {
    fn from(level: ConflictLevel) -> u8 {
        level.0
    }
}

impl fmt::Display for ConflictLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Scenario stage, 1 through 4. Stage 4 is the solution phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ConflictPhase(u8);

impl ConflictPhase {
    pub const OPENING: ConflictPhase = ConflictPhase(1);
    pub const SOLUTION: ConflictPhase = ConflictPhase(4);

    pub fn new(phase: u8) -> Result<Self, ConflictError> {
        if (1..=4).contains(&phase) {
            Ok(ConflictPhase(phase))
        } else {
            Err(ConflictError::PhaseOutOfRange(phase as i64))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// Next phase, capped at the solution phase.
    pub fn advanced(self) -> ConflictPhase {
        ConflictPhase((self.0 + 1).min(4))
    }

    pub fn all() -> impl Iterator<Item = ConflictPhase> {
        (1..=4).map(ConflictPhase)
    }
}

impl TryFrom<u8> for ConflictPhase {
    type Error = ConflictError;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        ConflictPhase::new(value)
    }
}

impl From<ConflictPhase> for u8 {
    fn from(phase: ConflictPhase) -> u8 {
        phase.0
    }
}

impl fmt::Display for ConflictPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dual-concern conflict regulation style.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RegulationStyle {
    ProblemSolve,
    Force,
    Smooth,
    Withdraw,
}

impl RegulationStyle {
    pub const ALL: [RegulationStyle; 4] = [
        RegulationStyle::ProblemSolve,
        RegulationStyle::Force,
        RegulationStyle::Smooth,
        RegulationStyle::Withdraw,
    ];

    /// The (taskFocus, relationship) pair this style stands for.
    pub fn concerns(self) -> (bool, bool) {
        match self {
            RegulationStyle::ProblemSolve => (true, true),
            RegulationStyle::Force => (true, false),
            RegulationStyle::Smooth => (false, true),
            RegulationStyle::Withdraw => (false, false),
        }
    }

    /// Per-dimension ladder movement: addressed dimensions step down, neglected ones up.
    pub fn shift_vector(self) -> (i8, i8) {
        let (task, rel) = self.concerns();
        (dimension_delta(task), dimension_delta(rel))
    }

    pub fn potential(self) -> i32 {
        style_potential(self)
    }

    pub fn slug(self) -> &'static str {
        match self {
            RegulationStyle::ProblemSolve => "problem-solve",
            RegulationStyle::Force => "force",
            RegulationStyle::Smooth => "smooth",
            RegulationStyle::Withdraw => "withdraw",
        }
    }

    pub fn from_slug(s: &str) -> Option<RegulationStyle> {
        RegulationStyle::ALL.into_iter().find(|style| style.slug() == s)
    }
}

fn dimension_delta(addressed: bool) -> i8 {
    if addressed {
        -1
    } else {
        1
    }
}

pub fn classify_style(task_focus: bool, relationship: bool) -> RegulationStyle {
    match (task_focus, relationship) {
        (true, true) => RegulationStyle::ProblemSolve,
        (true, false) => RegulationStyle::Force,
        (false, true) => RegulationStyle::Smooth,
        (false, false) => RegulationStyle::Withdraw,
    }
}

/// Escalation potential of a style: -1 per addressed dimension, +1 per neglected one.
pub fn style_potential(style: RegulationStyle) -> i32 {
    let (task, rel) = style.shift_vector();
    task as i32 + rel as i32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EvaluationSource {
    Wizard,
    Auto,
    Policy,
}

/// One turn's judgment of the teacher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TeacherEvaluation {
    pub task_focus: bool,
    pub relationship: bool,
    pub phase: ConflictPhase,
    pub source: EvaluationSource,
    /// Milliseconds since session start.
    pub timestamp: u64,
}

impl TeacherEvaluation {
    pub fn style(&self) -> RegulationStyle {
        classify_style(self.task_focus, self.relationship)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Outcome {
    Escalation,
    Resolution,
}

/// Index into the behavior catalog, taken from a post-shift state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StudentReactionKey {
    pub phase: ConflictPhase,
    pub task_level: ConflictLevel,
    pub rel_level: ConflictLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConflictState {
    pub task_level: ConflictLevel,
    pub rel_level: ConflictLevel,
    pub phase: ConflictPhase,
    pub cumulative_potential: i32,
    pub turn_count: u32,
    pub outcome: Option<Outcome>,
}

impl Default for ConflictState {
    fn default() -> Self {
        ConflictState::new(ConflictLevel::MIDPOINT, ConflictLevel::MIDPOINT, ConflictPhase::OPENING)
    }
}

impl ConflictState {
    pub fn new(task_level: ConflictLevel, rel_level: ConflictLevel, phase: ConflictPhase) -> Self {
        ConflictState {
            task_level,
            rel_level,
            phase,
            cumulative_potential: 0,
            turn_count: 0,
            outcome: None,
        }
    }

    /// Convenience constructor from raw indices.
    pub fn at(task: u8, rel: u8, phase: u8) -> Result<Self, ConflictError> {
        Ok(ConflictState::new(
            ConflictLevel::new(task)?,
            ConflictLevel::new(rel)?,
            ConflictPhase::new(phase)?,
        ))
    }

    pub fn is_terminal(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn reaction_key(&self) -> StudentReactionKey {
        StudentReactionKey {
            phase: self.phase,
            task_level: self.task_level,
            rel_level: self.rel_level,
        }
    }

    /// Sets the outcome if the state already satisfies an end condition.
    pub fn settled(mut self, turn_budget: u32) -> Self {
        if self.outcome.is_none() {
            self.outcome = check_outcome(&self, turn_budget);
        }
        self
    }
}

pub fn shift_levels(
    state: &ConflictState,
    style: RegulationStyle,
) -> Result<(ConflictLevel, ConflictLevel), ConflictError> {
    if let Some(outcome) = state.outcome {
        return Err(ConflictError::Terminal(outcome));
    }
    let (dt, dr) = style.shift_vector();
    Ok((state.task_level.shifted(dt), state.rel_level.shifted(dr)))
}

/// Resolution is checked first: a budget-exhausting turn that lands on (1,1)
/// in the solution phase still resolves.
pub fn check_outcome(state: &ConflictState, turn_budget: u32) -> Option<Outcome> {
    if state.task_level == ConflictLevel::OPTIMAL
        && state.rel_level == ConflictLevel::OPTIMAL
        && state.phase == ConflictPhase::SOLUTION
    {
        return Some(Outcome::Resolution);
    }
    if state.task_level == ConflictLevel::ESCALATED
        || state.rel_level == ConflictLevel::ESCALATED
        || state.turn_count >= turn_budget
    {
        return Some(Outcome::Escalation);
    }
    None
}

/// Advances the state by one evaluated teacher turn.
///
/// Returns the reaction key for behavior selection unless the turn ended the
/// conflict.
pub fn apply_turn(
    state: &ConflictState,
    eval: &TeacherEvaluation,
    turn_budget: u32,
) -> Result<(ConflictState, Option<StudentReactionKey>), ConflictError> {
    if let Some(outcome) = state.outcome {
        return Err(ConflictError::Terminal(outcome));
    }
    if eval.phase < state.phase {
        return Err(ConflictError::PhaseRegression {
            current: state.phase.index(),
            got: eval.phase.index(),
        });
    }
    let style = eval.style();
    let (task_level, rel_level) = shift_levels(state, style)?;
    let mut next = ConflictState {
        task_level,
        rel_level,
        phase: eval.phase,
        cumulative_potential: state.cumulative_potential + style_potential(style),
        turn_count: state.turn_count + 1,
        outcome: None,
    };
    next.outcome = check_outcome(&next, turn_budget);
    let key = if next.outcome.is_none() {
        Some(next.reaction_key())
    } else {
        None
    };
    Ok((next, key))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval(task: bool, rel: bool, phase: u8) -> TeacherEvaluation {
        TeacherEvaluation {
            task_focus: task,
            relationship: rel,
            phase: ConflictPhase::new(phase).unwrap(),
            source: EvaluationSource::Wizard,
            timestamp: 0,
        }
    }

    fn levels(pair: (ConflictLevel, ConflictLevel)) -> (u8, u8) {
        (pair.0.index(), pair.1.index())
    }

    #[test]
    fn style_table() {
        assert_eq!(classify_style(false, true), RegulationStyle::Smooth);
        assert_eq!(classify_style(true, true), RegulationStyle::ProblemSolve);
        assert_eq!(classify_style(true, false), RegulationStyle::Force);
        assert_eq!(classify_style(false, false), RegulationStyle::Withdraw);
        for style in RegulationStyle::ALL {
            let (t, r) = style.concerns();
            assert_eq!(classify_style(t, r), style);
        }
    }

    #[test]
    fn potentials() {
        assert_eq!(style_potential(RegulationStyle::ProblemSolve), -2);
        assert_eq!(style_potential(RegulationStyle::Withdraw), 2);
        assert_eq!(style_potential(RegulationStyle::Smooth), 0);
        assert_eq!(style_potential(RegulationStyle::Force), 0);
    }

    #[test]
    fn shift_examples() {
        let s = ConflictState::at(4, 4, 1).unwrap();
        assert_eq!(levels(shift_levels(&s, RegulationStyle::Smooth).unwrap()), (5, 3));
        let s = ConflictState::at(1, 1, 1).unwrap();
        assert_eq!(levels(shift_levels(&s, RegulationStyle::ProblemSolve).unwrap()), (1, 1));
        let s = ConflictState::at(7, 2, 1).unwrap();
        assert_eq!(levels(shift_levels(&s, RegulationStyle::Force).unwrap()), (6, 3));
    }

    #[test]
    fn shift_on_terminal_is_rejected() {
        let s = ConflictState {
            outcome: Some(Outcome::Escalation),
            ..ConflictState::default()
        };
        assert_eq!(
            shift_levels(&s, RegulationStyle::Force),
            Err(ConflictError::Terminal(Outcome::Escalation))
        );
    }

    #[test]
    fn apply_turn_smooth_from_midpoint() {
        let s = ConflictState::default();
        let (next, key) = apply_turn(&s, &eval(false, true, 1), DEFAULT_TURN_BUDGET).unwrap();
        assert_eq!((next.task_level.index(), next.rel_level.index()), (5, 3));
        assert_eq!(next.phase.index(), 1);
        assert_eq!(next.cumulative_potential, 0);
        assert_eq!(next.turn_count, 1);
        let key = key.unwrap();
        assert_eq!(
            (key.phase.index(), key.task_level.index(), key.rel_level.index()),
            (1, 5, 3)
        );
    }

    #[test]
    fn apply_turn_resolution_and_escalation() {
        let s = ConflictState::at(2, 2, 4).unwrap();
        let (next, key) = apply_turn(&s, &eval(true, true, 4), DEFAULT_TURN_BUDGET).unwrap();
        assert_eq!((next.task_level.index(), next.rel_level.index()), (1, 1));
        assert_eq!(next.outcome, Some(Outcome::Resolution));
        assert!(key.is_none());

        let s = ConflictState::at(6, 5, 2).unwrap();
        let (next, key) = apply_turn(&s, &eval(false, false, 2), DEFAULT_TURN_BUDGET).unwrap();
        assert_eq!(next.task_level.index(), 7);
        assert_eq!(next.outcome, Some(Outcome::Escalation));
        assert!(key.is_none());
    }

    #[test]
    fn apply_turn_errors() {
        let s = ConflictState::at(4, 4, 3).unwrap();
        assert_eq!(
            apply_turn(&s, &eval(true, true, 2), DEFAULT_TURN_BUDGET).unwrap_err(),
            ConflictError::PhaseRegression { current: 3, got: 2 }
        );
        let mut done = s;
        done.outcome = Some(Outcome::Resolution);
        assert!(matches!(
            apply_turn(&done, &eval(true, true, 4), DEFAULT_TURN_BUDGET),
            Err(ConflictError::Terminal(Outcome::Resolution))
        ));
    }

    #[test]
    fn outcome_rules() {
        let mut s = ConflictState::at(7, 3, 2).unwrap();
        s.turn_count = 5;
        assert_eq!(check_outcome(&s, 16), Some(Outcome::Escalation));
        assert_eq!(
            check_outcome(&ConflictState::at(1, 1, 4).unwrap(), 16),
            Some(Outcome::Resolution)
        );
        assert_eq!(check_outcome(&ConflictState::at(1, 1, 2).unwrap(), 16), None);
        let mut s = ConflictState::at(3, 3, 2).unwrap();
        s.turn_count = 16;
        assert_eq!(check_outcome(&s, 16), Some(Outcome::Escalation));
        let mut s = ConflictState::at(1, 1, 4).unwrap();
        s.turn_count = 16;
        assert_eq!(check_outcome(&s, 16), Some(Outcome::Resolution));
    }

    #[test]
    fn antisymmetric_shift_vectors() {
        let neg = |(a, b): (i8, i8)| (-a, -b);
        assert_eq!(
            RegulationStyle::Smooth.shift_vector(),
            neg(RegulationStyle::Force.shift_vector())
        );
        assert_eq!(
            RegulationStyle::ProblemSolve.shift_vector(),
            neg(RegulationStyle::Withdraw.shift_vector())
        );
    }

    #[test]
    fn out_of_range_values_rejected() {
        assert!(ConflictLevel::new(0).is_err());
        assert!(ConflictLevel::new(8).is_err());
        assert!(ConflictPhase::new(5).is_err());
        assert!(serde_json::from_str::<ConflictLevel>("9").is_err());
    }

    proptest! {
        #[test]
        fn levels_stay_bounded(
            task in 1u8..=7, rel in 1u8..=7,
            turns in proptest::collection::vec((any::<bool>(), any::<bool>()), 0..40),
        ) {
            let mut s = ConflictState::at(task, rel, 1).unwrap();
            let mut potential = 0;
            for (t, r) in turns {
                if s.is_terminal() { break; }
                let e = eval(t, r, s.phase.index());
                potential += style_potential(e.style());
                s = apply_turn(&s, &e, 1000).unwrap().0;
                prop_assert!((1..=7).contains(&s.task_level.index()));
                prop_assert!((1..=7).contains(&s.rel_level.index()));
                prop_assert_eq!(s.cumulative_potential, potential);
            }
        }

        #[test]
        fn interior_shift_is_unit(task in 2u8..=6, rel in 2u8..=6, t: bool, r: bool) {
            let s = ConflictState::at(task, rel, 1).unwrap();
            let (nt, nr) = shift_levels(&s, classify_style(t, r)).unwrap();
            prop_assert_eq!((nt.index() as i16 - task as i16).abs(), 1);
            prop_assert_eq!((nr.index() as i16 - rel as i16).abs(), 1);
        }

        #[test]
        fn trajectories_are_deterministic(
            turns in proptest::collection::vec((any::<bool>(), any::<bool>()), 0..20),
        ) {
            let run = || {
                let mut s = ConflictState::default();
                let mut out = vec![s];
                for &(t, r) in &turns {
                    if s.is_terminal() { break; }
                    s = apply_turn(&s, &eval(t, r, 1), 16).unwrap().0;
                    out.push(s);
                }
                out
            };
            prop_assert_eq!(run(), run());
        }
    }
}
