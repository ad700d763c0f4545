//! Data-driven student behavior repertoire.
//!
//! A catalog holds task-dimension and relationship-dimension parts for every
//! (phase, level) cell. A student reaction composes one part from each
//! dimension. Opening and exit reactions are stored whole as specials.
//!
//! The file format is a single JSON document; see `docs/catalog-schema.md`.

use crate::conflict::{ConflictLevel, ConflictPhase, Outcome, StudentReactionKey};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use thiserror::Error;

pub const CATALOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Dimension {
    Task,
    Relationship,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Task => "task",
            Dimension::Relationship => "relationship",
        })
    }
}

/// A (phase, dimension, level) slot that must hold at least one part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CatalogCell {
    pub phase: ConflictPhase,
    pub dimension: Dimension,
    pub level: ConflictLevel,
}

impl fmt::Display for CatalogCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(phase={}, {}, level={})", self.phase, self.dimension, self.level)
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read catalog {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed catalog: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported catalog schemaVersion {0} (expected {CATALOG_SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("catalog is missing parts for {} cell(s): {}", .0.len(), join_cells(.0))]
    Coverage(Vec<CatalogCell>),
    #[error("part {part}: nonverbal token {token:?} is not in the catalog vocabulary")]
    UnknownToken { part: String, token: String },
    #[error("duplicate part id {0:?}")]
    DuplicateId(String),
    #[error("part {0}: durationMs must be positive")]
    ZeroDuration(String),
    #[error("special {tag:?}: {reason}")]
    BadSpecial { tag: SpecialTag, reason: String },
    #[error("catalog declares no {0:?} special")]
    MissingSpecial(SpecialTag),
    #[error("cell {cell} declares {declared} variant(s) but has {found}")]
    VariantCount {
        cell: CatalogCell,
        declared: u32,
        found: u32,
    },
    #[error("header documents {documented} combinations but the parts compose {actual}")]
    CombinationMismatch { documented: u64, actual: u64 },
}

impl CatalogError {
    /// Cells the error is about, if it concerns specific cells.
    pub fn cells(&self) -> Vec<CatalogCell> {
        match self {
            CatalogError::Coverage(cells) => cells.clone(),
            CatalogError::VariantCount { cell, .. } => vec![*cell],
            _ => Vec::new(),
        }
    }
}

fn join_cells(cells: &[CatalogCell]) -> String {
    cells.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BehaviorPart {
    pub id: String,
    pub dimension: Dimension,
    pub phase: ConflictPhase,
    pub level: ConflictLevel,
    pub utterance: String,
    pub nonverbal: Vec<String>,
    pub duration_ms: u32,
    /// How many parts the file declares for this part's cell.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub variant_count: u32,
}

fn one() -> u32 {
    1
}

fn is_one(n: &u32) -> bool {
    *n == 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SpecialTag {
    Opening,
    EscalationExit,
    ResolutionExit,
}

impl SpecialTag {
    pub fn for_outcome(outcome: Outcome) -> SpecialTag {
        match outcome {
            Outcome::Escalation => SpecialTag::EscalationExit,
            Outcome::Resolution => SpecialTag::ResolutionExit,
        }
    }
}

/// A composed student reaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BehaviorSpec {
    pub key: StudentReactionKey,
    pub task_part: BehaviorPart,
    pub rel_part: BehaviorPart,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub special_tag: Option<SpecialTag>,
}

impl BehaviorSpec {
    /// Dialog lines in speaking order: relationship stance first, then the task line.
    pub fn dialog_lines(&self) -> [&str; 2] {
        [&self.rel_part.utterance, &self.task_part.utterance]
    }

    /// Nonverbal tokens of both parts, relationship part first, each in its own order.
    pub fn nonverbal_sequence(&self) -> Vec<&str> {
        self.rel_part
            .nonverbal
            .iter()
            .chain(&self.task_part.nonverbal)
            .map(String::as_str)
            .collect()
    }

    pub fn duration_ms(&self) -> u32 {
        self.rel_part.duration_ms + self.task_part.duration_ms
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LevelLabels {
    #[serde(default)]
    pub task: Vec<String>,
    #[serde(default)]
    pub relationship: Vec<String>,
}

/// Appearance and voice attributes drawn once per session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HeterogeneityOptions {
    #[serde(default)]
    pub dialect: Vec<String>,
    #[serde(default)]
    pub gender: Vec<String>,
    #[serde(default)]
    pub skin_tone: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HeterogeneityTags {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dialect: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gender: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skin_tone: Option<String>,
}

impl HeterogeneityOptions {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> HeterogeneityTags {
        let mut pick = |options: &[String]| {
            if options.is_empty() {
                None
            } else {
                Some(options[rng.random_range(0..options.len())].clone())
            }
        };
        HeterogeneityTags {
            dialect: pick(&self.dialect),
            gender: pick(&self.gender),
            skin_tone: pick(&self.skin_tone),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CatalogFile {
    pub schema_version: u32,
    pub scenario_id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub vocabulary: Vec<String>,
    #[serde(default)]
    pub level_labels: LevelLabels,
    #[serde(default)]
    pub heterogeneity: HeterogeneityOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub documented_combinations: Option<u64>,
    pub parts: Vec<BehaviorPart>,
    pub specials: Vec<BehaviorSpec>,
}

/// A validated, immutable catalog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    file: CatalogFile,
    /// Part indices per cell, in file order.
    cells: BTreeMap<CatalogCell, Vec<usize>>,
}

impl Catalog {
    pub fn load(path: impl AsRef<Path>) -> Result<Catalog, CatalogError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Catalog::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Catalog, CatalogError> {
        let file: CatalogFile = serde_json::from_str(text)?;
        Catalog::from_file(file)
    }

    pub fn from_file(file: CatalogFile) -> Result<Catalog, CatalogError> {
        if file.schema_version != CATALOG_SCHEMA_VERSION {
            return Err(CatalogError::SchemaVersion(file.schema_version));
        }
        let vocabulary: HashSet<&str> = file.vocabulary.iter().map(String::as_str).collect();
        let mut ids = HashSet::new();
        let all_parts = file
            .parts
            .iter()
            .chain(file.specials.iter().flat_map(|s| [&s.task_part, &s.rel_part]));
        for part in all_parts {
            if !ids.insert(part.id.as_str()) {
                return Err(CatalogError::DuplicateId(part.id.clone()));
            }
            if part.duration_ms == 0 {
                return Err(CatalogError::ZeroDuration(part.id.clone()));
            }
            if let Some(token) = part.nonverbal.iter().find(|t| !vocabulary.contains(t.as_str())) {
                return Err(CatalogError::UnknownToken {
                    part: part.id.clone(),
                    token: token.clone(),
                });
            }
        }

        let mut cells: BTreeMap<CatalogCell, Vec<usize>> = BTreeMap::new();
        for (i, part) in file.parts.iter().enumerate() {
            let cell = CatalogCell {
                phase: part.phase,
                dimension: part.dimension,
                level: part.level,
            };
            cells.entry(cell).or_default().push(i);
        }
        let missing: Vec<CatalogCell> = all_cells().filter(|c| !cells.contains_key(c)).collect();
        if !missing.is_empty() {
            return Err(CatalogError::Coverage(missing));
        }
        for (cell, members) in &cells {
            let found = members.len() as u32;
            if let Some(part) = members
                .iter()
                .map(|&i| &file.parts[i])
                .find(|p| p.variant_count != found)
            {
                return Err(CatalogError::VariantCount {
                    cell: *cell,
                    declared: part.variant_count,
                    found,
                });
            }
        }

        let mut seen_tags = BTreeSet::new();
        for special in &file.specials {
            let tag = special.special_tag.ok_or_else(|| CatalogError::BadSpecial {
                tag: SpecialTag::Opening,
                reason: "special entry has no specialTag".into(),
            })?;
            let bad = |reason: &str| CatalogError::BadSpecial {
                tag,
                reason: reason.to_string(),
            };
            if special.task_part.dimension != Dimension::Task {
                return Err(bad("taskPart must have dimension task"));
            }
            if special.rel_part.dimension != Dimension::Relationship {
                return Err(bad("relPart must have dimension relationship"));
            }
            if special.task_part.phase != special.key.phase || special.rel_part.phase != special.key.phase {
                return Err(bad("part phases must equal the key phase"));
            }
            if !seen_tags.insert(tag) {
                return Err(bad("declared more than once"));
            }
        }
        for tag in [
            SpecialTag::Opening,
            SpecialTag::EscalationExit,
            SpecialTag::ResolutionExit,
        ] {
            if !seen_tags.contains(&tag) {
                return Err(CatalogError::MissingSpecial(tag));
            }
        }

        let catalog = Catalog { file, cells };
        if let Some(documented) = catalog.file.documented_combinations {
            let actual = catalog.count_combinations();
            if documented != actual {
                return Err(CatalogError::CombinationMismatch { documented, actual });
            }
        }
        Ok(catalog)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("catalog serializes")
    }

    pub fn file(&self) -> &CatalogFile {
        &self.file
    }

    pub fn scenario_id(&self) -> &str {
        &self.file.scenario_id
    }

    pub fn parts(&self) -> &[BehaviorPart] {
        &self.file.parts
    }

    pub fn specials(&self) -> &[BehaviorSpec] {
        &self.file.specials
    }

    pub fn heterogeneity(&self) -> &HeterogeneityOptions {
        &self.file.heterogeneity
    }

    pub fn level_label(&self, dimension: Dimension, level: ConflictLevel) -> Option<&str> {
        let labels = match dimension {
            Dimension::Task => &self.file.level_labels.task,
            Dimension::Relationship => &self.file.level_labels.relationship,
        };
        labels.get(level.index() as usize - 1).map(String::as_str)
    }

    pub fn variants(&self, cell: CatalogCell) -> impl Iterator<Item = &BehaviorPart> {
        self.cells
            .get(&cell)
            .into_iter()
            .flatten()
            .map(|&i| &self.file.parts[i])
    }

    pub fn special(&self, tag: SpecialTag) -> &BehaviorSpec {
        self.file
            .specials
            .iter()
            .find(|s| s.special_tag == Some(tag))
            .expect("validated catalog has every special")
    }

    pub fn exit_for(&self, outcome: Outcome) -> &BehaviorSpec {
        self.special(SpecialTag::for_outcome(outcome))
    }

    /// Composes a reaction for `key`, drawing one variant per dimension from `rng`.
    pub fn select<R: Rng + ?Sized>(&self, key: StudentReactionKey, rng: &mut R) -> BehaviorSpec {
        let mut pick = |dimension, level| {
            let idx = &self.cells[&CatalogCell {
                phase: key.phase,
                dimension,
                level,
            }];
            self.file.parts[idx[rng.random_range(0..idx.len())]].clone()
        };
        let task_part = pick(Dimension::Task, key.task_level);
        let rel_part = pick(Dimension::Relationship, key.rel_level);
        BehaviorSpec {
            key,
            task_part,
            rel_part,
            special_tag: None,
        }
    }

    /// Reaction for a turn: the matching exit special if the caller flags an
    /// outcome, otherwise a composed selection.
    pub fn select_behavior<R: Rng + ?Sized>(
        &self,
        key: StudentReactionKey,
        outcome: Option<Outcome>,
        rng: &mut R,
    ) -> BehaviorSpec {
        match outcome {
            Some(outcome) => self.exit_for(outcome).clone(),
            None => self.select(key, rng),
        }
    }

    /// Distinct (phase, task variant, relationship variant) triples.
    pub fn count_combinations(&self) -> u64 {
        ConflictPhase::all()
            .map(|phase| {
                let count = |dimension| -> u64 {
                    ConflictLevel::all()
                        .map(|level| {
                            self.cells
                                .get(&CatalogCell {
                                    phase,
                                    dimension,
                                    level,
                                })
                                .map_or(0, |v| v.len() as u64)
                        })
                        .sum()
                };
                count(Dimension::Task) * count(Dimension::Relationship)
            })
            .sum()
    }
}

pub fn all_cells() -> impl Iterator<Item = CatalogCell> {
    ConflictPhase::all().flat_map(|phase| {
        [Dimension::Task, Dimension::Relationship]
            .into_iter()
            .flat_map(move |dimension| {
                ConflictLevel::all().map(move |level| CatalogCell {
                    phase,
                    dimension,
                    level,
                })
            })
    })
}

/// The sample scenario shipped with the crate.
pub const SAMPLE_CATALOG_JSON: &str = include_str!("../data/catalog.sample.json");

pub fn sample_catalog() -> Catalog {
    Catalog::from_json(SAMPLE_CATALOG_JSON).expect("shipped sample catalog is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn minimal_file() -> CatalogFile {
        let mut parts = Vec::new();
        for cell in all_cells() {
            parts.push(BehaviorPart {
                id: format!("{}-{}-{}", cell.dimension, cell.phase, cell.level),
                dimension: cell.dimension,
                phase: cell.phase,
                level: cell.level,
                utterance: format!("line {cell}"),
                nonverbal: vec!["nod".into()],
                duration_ms: 1000,
                variant_count: 1,
            });
        }
        let special = |tag: SpecialTag, phase: u8, t: u8, r: u8| {
            let key = StudentReactionKey {
                phase: ConflictPhase::new(phase).unwrap(),
                task_level: ConflictLevel::new(t).unwrap(),
                rel_level: ConflictLevel::new(r).unwrap(),
            };
            let part = |dimension: Dimension, level| BehaviorPart {
                id: format!("{tag:?}-{dimension}"),
                dimension,
                phase: key.phase,
                level,
                utterance: "...".into(),
                nonverbal: vec![],
                duration_ms: 500,
                variant_count: 1,
            };
            BehaviorSpec {
                key,
                task_part: part(Dimension::Task, key.task_level),
                rel_part: part(Dimension::Relationship, key.rel_level),
                special_tag: Some(tag),
            }
        };
        CatalogFile {
            schema_version: 1,
            scenario_id: "test".into(),
            description: String::new(),
            vocabulary: vec!["nod".into(), "shrug".into()],
            level_labels: LevelLabels::default(),
            heterogeneity: HeterogeneityOptions::default(),
            documented_combinations: None,
            parts,
            specials: vec![
                special(SpecialTag::Opening, 1, 4, 4),
                special(SpecialTag::EscalationExit, 4, 7, 7),
                special(SpecialTag::ResolutionExit, 4, 1, 1),
            ],
        }
    }

    fn key(phase: u8, t: u8, r: u8) -> StudentReactionKey {
        StudentReactionKey {
            phase: ConflictPhase::new(phase).unwrap(),
            task_level: ConflictLevel::new(t).unwrap(),
            rel_level: ConflictLevel::new(r).unwrap(),
        }
    }

    #[test]
    fn single_variant_combinations() {
        let catalog = Catalog::from_file(minimal_file()).unwrap();
        assert_eq!(catalog.count_combinations(), 196);
    }

    #[test]
    fn extra_task_variant_adds_seven() {
        let mut file = minimal_file();
        file.parts[0].variant_count = 2;
        let mut extra = file.parts[0].clone();
        extra.id = "extra".into();
        file.parts.push(extra);
        let catalog = Catalog::from_file(file).unwrap();
        assert_eq!(catalog.count_combinations(), 203);
    }

    #[test]
    fn undeclared_variant_names_its_cell() {
        let mut file = minimal_file();
        let mut extra = file.parts[5].clone();
        extra.id = "extra".into();
        file.parts.push(extra);
        let cell = CatalogCell {
            phase: file.parts[5].phase,
            dimension: file.parts[5].dimension,
            level: file.parts[5].level,
        };
        let err = Catalog::from_file(file).unwrap_err();
        assert!(matches!(
            err,
            CatalogError::VariantCount {
                declared: 1,
                found: 2,
                ..
            }
        ));
        assert_eq!(err.cells(), vec![cell]);
    }

    #[test]
    fn missing_cell_is_named() {
        let mut file = minimal_file();
        file.parts
            .retain(|p| !(p.phase.index() == 2 && p.dimension == Dimension::Task && p.level.index() == 5));
        match Catalog::from_file(file) {
            Err(CatalogError::Coverage(cells)) => {
                assert_eq!(cells.len(), 1);
                assert_eq!(cells[0].to_string(), "(phase=2, task, level=5)");
            }
            other => panic!("expected coverage error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_token_rejected() {
        let mut file = minimal_file();
        file.parts[3].nonverbal.push("backflip".into());
        assert!(matches!(
            Catalog::from_file(file),
            Err(CatalogError::UnknownToken { token, .. }) if token == "backflip"
        ));
    }

    #[test]
    fn duplicate_ids_and_bad_version_rejected() {
        let mut file = minimal_file();
        file.parts[1].id = file.parts[0].id.clone();
        assert!(matches!(Catalog::from_file(file), Err(CatalogError::DuplicateId(_))));
        let mut file = minimal_file();
        file.schema_version = 9;
        assert!(matches!(Catalog::from_file(file), Err(CatalogError::SchemaVersion(9))));
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(Catalog::from_json("{ not json"), Err(CatalogError::Parse(_))));
    }

    #[test]
    fn documented_combination_mismatch() {
        let mut file = minimal_file();
        file.documented_combinations = Some(200);
        assert!(matches!(
            Catalog::from_file(file),
            Err(CatalogError::CombinationMismatch {
                documented: 200,
                actual: 196
            })
        ));
    }

    #[test]
    fn selection_matches_key_and_is_deterministic() {
        let catalog = sample_catalog();
        let k = key(1, 5, 3);
        let a = catalog.select(k, &mut ChaCha8Rng::seed_from_u64(11));
        let b = catalog.select(k, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
        assert_eq!(a.task_part.level.index(), 5);
        assert_eq!(a.rel_part.level.index(), 3);
        assert_eq!(a.task_part.phase.index(), 1);
        assert_eq!(a.rel_part.phase.index(), 1);
        assert_eq!(a.task_part.dimension, Dimension::Task);
        assert_eq!(a.rel_part.dimension, Dimension::Relationship);
    }

    #[test]
    fn resolution_flag_selects_exit_special() {
        let catalog = sample_catalog();
        let spec = catalog.select_behavior(
            key(4, 1, 1),
            Some(Outcome::Resolution),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert_eq!(spec.special_tag, Some(SpecialTag::ResolutionExit));
    }

    #[test]
    fn every_key_is_selectable() {
        let catalog = sample_catalog();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for phase in ConflictPhase::all() {
            for t in ConflictLevel::all() {
                for r in ConflictLevel::all() {
                    let k = StudentReactionKey {
                        phase,
                        task_level: t,
                        rel_level: r,
                    };
                    let spec = catalog.select(k, &mut rng);
                    assert_eq!(spec.key, k);
                }
            }
        }
    }

    #[test]
    fn composition_order_is_relationship_first() {
        let catalog = sample_catalog();
        let spec = catalog.select(key(2, 3, 6), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(spec.dialog_lines()[0], spec.rel_part.utterance);
        let seq = spec.nonverbal_sequence();
        assert_eq!(
            seq.len(),
            spec.rel_part.nonverbal.len() + spec.task_part.nonverbal.len()
        );
        assert_eq!(
            &seq[..spec.rel_part.nonverbal.len()],
            &spec.rel_part.nonverbal.iter().map(String::as_str).collect::<Vec<_>>()[..]
        );
    }

    #[test]
    fn serialize_reload_round_trip() {
        let catalog = sample_catalog();
        let again = Catalog::from_json(&catalog.to_json()).unwrap();
        assert_eq!(catalog, again);
    }
}
