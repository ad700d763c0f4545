//! Headless Monte-Carlo runs: a scripted teacher policy rates every turn of
//! a woz-mode session until the conflict ends.

use crate::acts::PhaseTracker;
use crate::bus::StyleHistogram;
use crate::conflict::{
    classify_style, ConflictPhase, ConflictState, EvaluationSource, Outcome, RegulationStyle, TeacherEvaluation,
};
use crate::orchestrator::{
    InitialState, Orchestrator, OrchestratorError, SessionConfig, SessionMode, SessionResources,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

/// Media time between consecutive policy ratings.
pub const TURN_SPACING_MS: u64 = 10_000;
/// Number of full trajectories kept in the stats file.
pub const TRAJECTORY_SAMPLES: usize = 5;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid policy {0:?}")]
    Policy(String),
    #[error("cannot read script {path}: {reason}")]
    Script { path: PathBuf, reason: String },
    #[error("episode {episode}: {source}")]
    Episode {
        episode: u32,
        #[source]
        source: OrchestratorError,
    },
    #[error(transparent)]
    Setup(#[from] OrchestratorError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot write csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One scripted rating. Without a phase the tracked phase is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScriptStep {
    pub task_focus: bool,
    pub relationship: bool,
    #[serde(default)]
    pub phase: Option<ConflictPhase>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TeacherPolicy {
    Constant(RegulationStyle),
    Uniform,
    /// ProblemSolve when the relationship level is 5 or worse, else Force.
    Mirror,
    /// Steps are reused cyclically when the episode outlasts the script.
    Scripted {
        name: String,
        steps: Vec<ScriptStep>,
    },
}

impl TeacherPolicy {
    pub fn scripted_from_file(path: &Path) -> Result<Self, SimError> {
        let err = |reason: String| SimError::Script {
            path: path.to_path_buf(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let steps: Vec<ScriptStep> = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if steps.is_empty() {
            return Err(err("script has no steps".into()));
        }
        Ok(TeacherPolicy::Scripted {
            name: path.display().to_string(),
            steps,
        })
    }

    /// Rating for turn `turn` (0-based). Pure in (state, seed, turn).
    pub fn decide(&self, state: &ConflictState, seed: u64, turn: u32) -> (bool, bool, Option<ConflictPhase>) {
        let style = match self {
            TeacherPolicy::Constant(style) => *style,
            TeacherPolicy::Uniform => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, turn as u64));
                RegulationStyle::ALL[rng.random_range(0..4)]
            }
            TeacherPolicy::Mirror => {
                if state.rel_level.index() >= 5 {
                    RegulationStyle::ProblemSolve
                } else {
                    RegulationStyle::Force
                }
            }
            TeacherPolicy::Scripted { steps, .. } => {
                let step = steps[turn as usize % steps.len()];
                return (step.task_focus, step.relationship, step.phase);
            }
        };
        let (task, rel) = style.concerns();
        (task, rel, None)
    }
}

impl FromStr for TeacherPolicy {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s.split_once(':') {
            Some(("constant", slug)) => RegulationStyle::from_slug(slug)
                .map(TeacherPolicy::Constant)
                .ok_or_else(|| SimError::Policy(s.to_string())),
            Some(("scripted", path)) => TeacherPolicy::scripted_from_file(Path::new(path)),
            None if s == "uniform" || s == "uniform-random" => Ok(TeacherPolicy::Uniform),
            None if s == "mirror" => Ok(TeacherPolicy::Mirror),
            _ => Err(SimError::Policy(s.to_string())),
        }
    }
}

impl fmt::Display for TeacherPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TeacherPolicy::Constant(style) => write!(f, "constant:{}", style.slug()),
            TeacherPolicy::Uniform => f.write_str("uniform"),
            TeacherPolicy::Mirror => f.write_str("mirror"),
            TeacherPolicy::Scripted { name, .. } => write!(f, "scripted:{name}"),
        }
    }
}

/// splitmix64 finalizer over two words.
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(0x6a09_e667_f3bc_c909);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn episode_seed(run_seed: u64, episode: u32) -> u64 {
    mix(run_seed, episode as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrajectoryStep {
    pub turn: u32,
    pub task: u8,
    pub rel: u8,
    pub phase: u8,
    pub style: RegulationStyle,
    pub potential: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpisodeResult {
    pub episode: u32,
    pub seed: u64,
    pub outcome: Outcome,
    pub turns: u32,
    pub final_state: ConflictState,
    pub steps: Vec<TrajectoryStep>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub policy: TeacherPolicy,
    pub episodes: u32,
    pub seed: u64,
    pub catalog_path: Option<PathBuf>,
    pub start: InitialState,
    pub turn_budget: u32,
    pub turns_per_phase: u32,
    /// Per-episode event logs are written here when set.
    pub log_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let session = SessionConfig::default();
        RunConfig {
            policy: TeacherPolicy::Constant(RegulationStyle::ProblemSolve),
            episodes: 1,
            seed: 0,
            catalog_path: None,
            start: session.initial_state,
            turn_budget: session.turn_budget,
            turns_per_phase: session.turns_per_phase,
            log_dir: None,
        }
    }
}

impl RunConfig {
    fn session_config(&self, episode: u32) -> SessionConfig {
        SessionConfig {
            mode: SessionMode::Woz,
            catalog_path: self.catalog_path.clone(),
            seed: episode_seed(self.seed, episode),
            turn_budget: self.turn_budget,
            turns_per_phase: self.turns_per_phase,
            initial_state: self.start,
            session_id: Some(format!("episode-{episode:06}")),
            log_path: self
                .log_dir
                .as_ref()
                .map(|d| d.join(format!("episode-{episode:06}.ndjson"))),
            ..SessionConfig::default()
        }
    }
}

/// Plays one episode through an orchestrator session.
pub fn run_episode(
    orchestrator: &Orchestrator,
    resources: &Arc<SessionResources>,
    config: &RunConfig,
    episode: u32,
) -> Result<EpisodeResult, OrchestratorError> {
    let session_config = config.session_config(episode);
    let seed = session_config.seed;
    let id = orchestrator
        .create_session_with(session_config, resources.clone())?
        .session_id;
    let mut state = orchestrator.snapshot(&id)?.state;
    let mut tracker = PhaseTracker::new(config.turns_per_phase);
    tracker.phase = state.phase;
    let mut steps = Vec::new();
    while state.outcome.is_none() {
        let turn = state.turn_count;
        let (task_focus, relationship, phase) = config.policy.decide(&state, seed, turn);
        if let Some(p) = phase {
            tracker.phase = p;
        }
        let eval = TeacherEvaluation {
            task_focus,
            relationship,
            phase: tracker.phase,
            source: EvaluationSource::Policy,
            timestamp: (turn as u64 + 1) * TURN_SPACING_MS,
        };
        let report = orchestrator.submit_rating(&id, eval)?;
        state = report.state;
        tracker.observe(&state);
        steps.push(TrajectoryStep {
            turn: state.turn_count,
            task: state.task_level.index(),
            rel: state.rel_level.index(),
            phase: state.phase.index(),
            style: classify_style(task_focus, relationship),
            potential: state.cumulative_potential,
        });
    }
    if config.log_dir.is_some() {
        orchestrator.end_session(&id)?;
    }
    orchestrator.discard(&id);
    Ok(EpisodeResult {
        episode,
        seed,
        outcome: state.outcome.expect("loop exits on an outcome"),
        turns: state.turn_count,
        final_state: state,
        steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OutcomeCounts {
    pub resolution: u32,
    pub escalation: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Trajectory {
    pub episode: u32,
    pub seed: u64,
    pub outcome: Outcome,
    pub steps: Vec<TrajectoryStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunStats {
    pub policy: String,
    pub seed: u64,
    pub episodes: u32,
    pub start_state: InitialState,
    pub turn_budget: u32,
    pub resolution_rate: f64,
    pub mean_turns: f64,
    pub outcome_counts: OutcomeCounts,
    pub turn_histogram: BTreeMap<u32, u32>,
    pub style_counts: StyleHistogram,
    pub trajectory_samples: Vec<Trajectory>,
}

impl RunStats {
    /// Order-independent aggregation: sums, a keyed histogram, and samples
    /// chosen by episode index.
    pub fn aggregate(config: &RunConfig, results: &[EpisodeResult]) -> RunStats {
        let mut counts = OutcomeCounts::default();
        let mut histogram = BTreeMap::new();
        let mut styles = StyleHistogram::default();
        let mut total_turns: u64 = 0;
        for r in results {
            match r.outcome {
                Outcome::Resolution => counts.resolution += 1,
                Outcome::Escalation => counts.escalation += 1,
            }
            *histogram.entry(r.turns).or_insert(0) += 1;
            total_turns += r.turns as u64;
            for step in &r.steps {
                styles.add(step.style);
            }
        }
        let mut samples: Vec<&EpisodeResult> = results.iter().collect();
        samples.sort_by_key(|r| r.episode);
        let trajectory_samples = samples
            .into_iter()
            .take(TRAJECTORY_SAMPLES)
            .map(|r| Trajectory {
                episode: r.episode,
                seed: r.seed,
                outcome: r.outcome,
                steps: r.steps.clone(),
            })
            .collect();
        let n = results.len() as u32;
        RunStats {
            policy: config.policy.to_string(),
            seed: config.seed,
            episodes: n,
            start_state: config.start,
            turn_budget: config.turn_budget,
            resolution_rate: if n == 0 {
                0.0
            } else {
                counts.resolution as f64 / n as f64
            },
            mean_turns: if n == 0 { 0.0 } else { total_turns as f64 / n as f64 },
            outcome_counts: counts,
            turn_histogram: histogram,
            style_counts: styles,
            trajectory_samples,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("stats serialize");
        text.push('\n');
        text
    }
}

pub struct RunOutput {
    pub stats: RunStats,
    pub episodes: Vec<EpisodeResult>,
}

/// Runs all episodes in parallel on one shared orchestrator.
pub fn run(config: &RunConfig) -> Result<RunOutput, SimError> {
    let session_config = SessionConfig {
        catalog_path: config.catalog_path.clone(),
        ..SessionConfig::default()
    };
    let resources = Arc::new(SessionResources::load(&session_config)?);
    if let Some(dir) = &config.log_dir {
        std::fs::create_dir_all(dir)?;
    }
    let orchestrator = Orchestrator::new();
    let episodes: Vec<EpisodeResult> = (0..config.episodes)
        .into_par_iter()
        .map(|i| {
            run_episode(&orchestrator, &resources, config, i).map_err(|source| SimError::Episode { episode: i, source })
        })
        .collect::<Result<_, _>>()?;
    let stats = RunStats::aggregate(config, &episodes);
    Ok(RunOutput { stats, episodes })
}

/// Writes one `episode-NNNNNN.csv` per episode with
/// (turn, task, rel, phase, style, potential) rows.
pub fn write_episode_csvs(dir: &Path, episodes: &[EpisodeResult]) -> Result<(), SimError> {
    std::fs::create_dir_all(dir)?;
    for ep in episodes {
        let mut w = csv::Writer::from_path(dir.join(format!("episode-{:06}.csv", ep.episode)))?;
        w.write_record(["turn", "task", "rel", "phase", "style", "potential"])?;
        for s in &ep.steps {
            w.write_record([
                s.turn.to_string(),
                s.task.to_string(),
                s.rel.to_string(),
                s.phase.to_string(),
                s.style.slug().to_string(),
                s.potential.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conflict::ConflictLevel;

    fn start(t: u8, r: u8) -> InitialState {
        InitialState {
            task_level: ConflictLevel::new(t).unwrap(),
            rel_level: ConflictLevel::new(r).unwrap(),
            phase: ConflictPhase::OPENING,
        }
    }

    #[test]
    fn policy_parsing() {
        assert_eq!(
            "constant:problem-solve".parse::<TeacherPolicy>().unwrap(),
            TeacherPolicy::Constant(RegulationStyle::ProblemSolve)
        );
        assert_eq!("mirror".parse::<TeacherPolicy>().unwrap(), TeacherPolicy::Mirror);
        assert!("constant:shout".parse::<TeacherPolicy>().is_err());
        assert!("greedy".parse::<TeacherPolicy>().is_err());
        assert_eq!(
            TeacherPolicy::Constant(RegulationStyle::Withdraw).to_string(),
            "constant:withdraw"
        );
    }

    #[test]
    fn withdraw_escalates_in_three_turns() {
        let config = RunConfig {
            policy: TeacherPolicy::Constant(RegulationStyle::Withdraw),
            episodes: 20,
            ..Default::default()
        };
        let out = run(&config).unwrap();
        assert_eq!(out.stats.resolution_rate, 0.0);
        assert_eq!(out.stats.mean_turns, 3.0);
    }

    #[test]
    fn problem_solving_always_resolves() {
        let config = RunConfig {
            episodes: 20,
            ..Default::default()
        };
        let out = run(&config).unwrap();
        assert_eq!(out.stats.resolution_rate, 1.0);
        assert_eq!(out.stats.turn_histogram.len(), 1);
        // (4,4)→(3,3)→(2,2) advances the phase on the low-level rule, then
        // one turn per phase until phase 4.
        assert_eq!(out.stats.mean_turns, 5.0);
    }

    #[test]
    fn mirror_from_calm_start_escalates_task() {
        let config = RunConfig {
            policy: TeacherPolicy::Mirror,
            start: start(1, 1),
            ..Default::default()
        };
        let out = run(&config).unwrap();
        assert_eq!(out.episodes[0].outcome, Outcome::Escalation);
    }

    #[test]
    fn uniform_policy_is_pure() {
        let p = TeacherPolicy::Uniform;
        let s = ConflictState::default();
        for turn in 0..20 {
            assert_eq!(p.decide(&s, 42, turn), p.decide(&s, 42, turn));
        }
        let draws: std::collections::HashSet<_> = (0..50).map(|t| p.decide(&s, 42, t)).collect();
        assert!(draws.len() > 1);
    }

    #[test]
    fn aggregation_ignores_episode_order() {
        let config = RunConfig {
            policy: TeacherPolicy::Uniform,
            episodes: 64,
            seed: 11,
            ..Default::default()
        };
        let out = run(&config).unwrap();
        let mut shuffled = out.episodes.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        assert_ne!(shuffled, out.episodes);
        assert_eq!(RunStats::aggregate(&config, &shuffled), out.stats);
        shuffled.reverse();
        assert_eq!(RunStats::aggregate(&config, &shuffled), out.stats);
    }

    #[test]
    fn stats_rate_matches_counts() {
        let config = RunConfig {
            policy: TeacherPolicy::Uniform,
            episodes: 100,
            seed: 3,
            ..Default::default()
        };
        let s = run(&config).unwrap().stats;
        assert_eq!(s.outcome_counts.resolution + s.outcome_counts.escalation, 100);
        assert_eq!(s.resolution_rate, s.outcome_counts.resolution as f64 / 100.0);
    }
}
