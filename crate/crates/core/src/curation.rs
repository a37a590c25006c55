//! Keyword selection, hate-level assignment, attribution masking, and
//! curriculum manifest construction for generated candidate corpora.
//!
//! The five external classifiers are never run here; their verdicts arrive
//! in a line-delimited file (`{"key": ..., "model_ids": [...], "labels":
//! [...]}`), get mapped onto the binary Hateful/Normal scheme, and everything
//! downstream is a pure function of those verdicts plus a seed.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::corpus::{MaskedSentence, UtteranceRecord};
use crate::error::{Error, Result};
use crate::sampling::SplitMix64;
use crate::text;
use crate::MASK_TOKEN;

pub const ENSEMBLE_SIZE: usize = 5;

/// Binary classifier output after label mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinaryLabel {
    Hateful,
    Normal,
}

/// Maps raw classifier output strings onto [`BinaryLabel`].
///
/// The default folds the inappropriate-content labels (`hate`, `hateful`,
/// `offensive`, `abusive`, `toxic`) into Hateful and maps `normal`/`none`
/// to Normal. Matching is case-insensitive; unknown strings are errors.
#[derive(Debug, Clone)]
pub struct LabelMap {
    map: HashMap<String, BinaryLabel>,
}

impl Default for LabelMap {
    fn default() -> Self {
        let mut map = HashMap::new();
        for s in ["hateful", "hate", "offensive", "abusive", "toxic"] {
            map.insert(s.to_string(), BinaryLabel::Hateful);
        }
        for s in ["normal", "none"] {
            map.insert(s.to_string(), BinaryLabel::Normal);
        }
        Self { map }
    }
}

impl LabelMap {
    pub fn empty() -> Self {
        Self {
            map: HashMap::new(),
        }
    }

    pub fn insert(&mut self, raw: impl Into<String>, label: BinaryLabel) {
        self.map.insert(raw.into().to_ascii_lowercase(), label);
    }

    pub fn resolve(&self, raw: &str) -> Result<BinaryLabel> {
        self.map
            .get(&raw.to_ascii_lowercase())
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("unmapped classifier label {raw:?}")))
    }
}

/// The five-model classification of one term or candidate sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EnsembleVerdict {
    model_ids: Vec<String>,
    labels: Vec<BinaryLabel>,
}

impl EnsembleVerdict {
    /// Requires exactly five distinct model ids with one label each.
    pub fn new(model_ids: Vec<String>, labels: Vec<BinaryLabel>) -> Result<Self> {
        if model_ids.len() != ENSEMBLE_SIZE || labels.len() != ENSEMBLE_SIZE {
            return Err(Error::InvalidInput(format!(
                "ensemble verdict needs exactly {ENSEMBLE_SIZE} model ids and labels, got {} and {}",
                model_ids.len(),
                labels.len()
            )));
        }
        let distinct: HashSet<&str> = model_ids.iter().map(String::as_str).collect();
        if distinct.len() != ENSEMBLE_SIZE {
            return Err(Error::InvalidInput(
                "ensemble model ids must be distinct".to_string(),
            ));
        }
        Ok(Self { model_ids, labels })
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn labels(&self) -> &[BinaryLabel] {
        &self.labels
    }

    pub fn hateful_count(&self) -> usize {
        self.labels
            .iter()
            .filter(|l| **l == BinaryLabel::Hateful)
            .count()
    }
}

/// Hate level of a verdict: the number of models voting Hateful, 0..=5.
pub fn assign_hate_level(verdict: &EnsembleVerdict) -> u8 {
    verdict.hateful_count() as u8
}

#[derive(Deserialize)]
struct RawVerdictLine {
    key: String,
    model_ids: Vec<String>,
    labels: Vec<String>,
}

/// Parse a line-delimited verdict file into a key → verdict table.
///
/// Keys are terms (keyword selection) or candidate ids (filtering); both
/// kinds share this format. Duplicate keys are errors.
pub fn parse_verdicts<R: BufRead>(
    reader: R,
    label_map: &LabelMap,
) -> Result<HashMap<String, EnsembleVerdict>> {
    let mut out = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawVerdictLine = serde_json::from_str(&line).map_err(|e| Error::Schema {
            line: line_no,
            message: format!("malformed verdict: {e}"),
        })?;
        let labels = raw
            .labels
            .iter()
            .map(|s| label_map.resolve(s))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Schema {
                line: line_no,
                message: e.to_string(),
            })?;
        let verdict = EnsembleVerdict::new(raw.model_ids, labels).map_err(|e| Error::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        if out.insert(raw.key.clone(), verdict).is_some() {
            return Err(Error::DuplicateId { id: raw.key });
        }
    }
    Ok(out)
}

/// A generated sentence with its ensemble verdict and derived hate level.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRecord {
    pub id: String,
    pub tokens: Vec<String>,
    pub mandatory_keyword: String,
    pub verdict: EnsembleVerdict,
    /// Always equal to the verdict's Hateful count.
    pub hate_level: u8,
    pub attribution_scores: Option<Vec<f64>>,
    pub target: Option<String>,
}

impl CandidateRecord {
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<String>,
        mandatory_keyword: impl Into<String>,
        verdict: EnsembleVerdict,
        attribution_scores: Option<Vec<f64>>,
        target: Option<String>,
    ) -> Result<Self> {
        if let Some(scores) = &attribution_scores {
            if scores.len() != tokens.len() {
                return Err(Error::LengthMismatch {
                    what: "attribution_scores",
                    expected: tokens.len(),
                    actual: scores.len(),
                });
            }
        }
        let hate_level = assign_hate_level(&verdict);
        Ok(Self {
            id: id.into(),
            tokens,
            mandatory_keyword: mandatory_keyword.into(),
            verdict,
            hate_level,
            attribution_scores,
            target,
        })
    }

    /// True iff the mandatory keyword actually occurs among the tokens.
    pub fn contains_keyword(&self) -> bool {
        self.tokens.contains(&self.mandatory_keyword)
    }
}

#[derive(Deserialize)]
struct RawCandidateLine {
    id: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    tokens: Option<Vec<String>>,
    keyword: String,
    #[serde(default)]
    target: Option<String>,
    #[serde(default)]
    attribution_scores: Option<Vec<f64>>,
    // verdict may be embedded instead of joined from a verdict file
    #[serde(default)]
    model_ids: Option<Vec<String>>,
    #[serde(default)]
    labels: Option<Vec<String>>,
}

/// Result of parsing a candidate stream.
#[derive(Debug, Default)]
pub struct CandidateParse {
    pub candidates: Vec<CandidateRecord>,
    pub line_errors: Vec<crate::corpus::LineError>,
    /// Ids of candidates whose text does not contain their mandatory keyword.
    pub keyword_warnings: Vec<String>,
}

/// Parse line-delimited candidate records.
///
/// Each line carries `id`, `keyword`, and either `tokens` or raw `text`,
/// plus optionally `target` and per-token `attribution_scores`. The verdict
/// comes from embedded `model_ids`/`labels` fields or, failing that, from
/// `verdicts` keyed by candidate id. A candidate that does not contain its
/// mandatory keyword is kept but flagged in `keyword_warnings`.
pub fn parse_candidates<R: BufRead>(
    reader: R,
    verdicts: Option<&HashMap<String, EnsembleVerdict>>,
    label_map: &LabelMap,
) -> Result<CandidateParse> {
    let mut out = CandidateParse::default();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawCandidateLine = match serde_json::from_str(&line) {
            Ok(raw) => raw,
            Err(e) => {
                out.line_errors.push(crate::corpus::LineError {
                    line: line_no,
                    message: format!("malformed candidate: {e}"),
                });
                continue;
            }
        };
        match build_candidate(raw, verdicts, label_map, &mut seen) {
            Ok(candidate) => {
                if !candidate.contains_keyword() {
                    out.keyword_warnings.push(candidate.id.clone());
                }
                out.candidates.push(candidate);
            }
            Err(message) => out.line_errors.push(crate::corpus::LineError {
                line: line_no,
                message,
            }),
        }
    }
    Ok(out)
}

fn build_candidate(
    raw: RawCandidateLine,
    verdicts: Option<&HashMap<String, EnsembleVerdict>>,
    label_map: &LabelMap,
    seen: &mut HashSet<String>,
) -> std::result::Result<CandidateRecord, String> {
    if !seen.insert(raw.id.clone()) {
        return Err(format!("duplicate candidate id {:?}", raw.id));
    }
    let tokens: Vec<String> = match (&raw.tokens, &raw.text) {
        (Some(toks), _) => toks.iter().map(|t| t.to_lowercase()).collect(),
        (None, Some(text_line)) => text::tokenize(text_line),
        (None, None) => return Err("candidate needs either `tokens` or `text`".to_string()),
    };
    let verdict = match (raw.model_ids, raw.labels) {
        (Some(ids), Some(labels)) => {
            let mapped = labels
                .iter()
                .map(|s| label_map.resolve(s))
                .collect::<crate::error::Result<Vec<_>>>()
                .map_err(|e| e.to_string())?;
            EnsembleVerdict::new(ids, mapped).map_err(|e| e.to_string())?
        }
        (None, None) => verdicts
            .and_then(|v| v.get(&raw.id))
            .cloned()
            .ok_or_else(|| format!("no verdict for candidate {:?}", raw.id))?,
        _ => return Err("embedded verdict needs both `model_ids` and `labels`".to_string()),
    };
    CandidateRecord::new(
        raw.id,
        tokens,
        raw.keyword.to_lowercase(),
        verdict,
        raw.attribution_scores,
        raw.target,
    )
    .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CandidateOut<'a> {
    id: &'a str,
    tokens: &'a [String],
    keyword: &'a str,
    target: &'a Option<String>,
    model_ids: &'a [String],
    labels: Vec<&'static str>,
    hate_level: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    attribution_scores: &'a Option<Vec<f64>>,
}

/// Serialize one candidate as a canonical line with its verdict embedded.
pub fn serialize_candidate(candidate: &CandidateRecord) -> String {
    let labels = candidate
        .verdict
        .labels()
        .iter()
        .map(|l| match l {
            BinaryLabel::Hateful => "Hateful",
            BinaryLabel::Normal => "Normal",
        })
        .collect();
    let out = CandidateOut {
        id: &candidate.id,
        tokens: &candidate.tokens,
        keyword: &candidate.mandatory_keyword,
        target: &candidate.target,
        model_ids: candidate.verdict.model_ids(),
        labels,
        hate_level: candidate.hate_level,
        attribution_scores: &candidate.attribution_scores,
    };
    serde_json::to_string(&out).expect("candidate serialization cannot fail")
}

/// A term with its corpus frequency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TermCount {
    pub term: String,
    pub count: usize,
}

/// Terms excluded from keyword extraction.
#[derive(Debug, Clone, Default)]
pub struct StopList(HashSet<String>);

impl StopList {
    /// The list shipped with the crate (`data/stoplist.txt`).
    pub fn builtin() -> Self {
        Self::parse(include_str!("../data/stoplist.txt"))
    }

    pub fn parse(contents: &str) -> Self {
        let set = contents
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.to_lowercase())
            .collect();
        Self(set)
    }

    pub fn contains(&self, term: &str) -> bool {
        self.0.contains(term)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Count token frequencies over `records` and keep terms seen at least
/// `min_count` times, sorted by count descending then term ascending.
///
/// The mask token and stop-list terms are never emitted.
pub fn extract_frequent_terms(
    records: &[UtteranceRecord],
    min_count: usize,
    stop_list: &StopList,
) -> Result<Vec<TermCount>> {
    if records.is_empty() {
        return Err(Error::InvalidInput(
            "no records to extract terms from".to_string(),
        ));
    }
    if min_count == 0 {
        return Err(Error::InvalidInput(
            "min_count must be at least 1".to_string(),
        ));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for record in records {
        for token in &record.tokens {
            if token == MASK_TOKEN || stop_list.contains(token) {
                continue;
            }
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    let mut terms: Vec<TermCount> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .map(|(term, count)| TermCount {
            term: term.to_string(),
            count,
        })
        .collect();
    terms.sort_by(|a, b| b.count.cmp(&a.count).then(a.term.cmp(&b.term)));
    Ok(terms)
}

/// Keep the terms at least `vote_threshold` models call Hateful, preserving
/// input order. Every term must have a verdict.
pub fn select_keywords(
    terms: &[String],
    verdicts: &HashMap<String, EnsembleVerdict>,
    vote_threshold: usize,
) -> Result<Vec<String>> {
    let mut selected = Vec::new();
    for term in terms {
        let verdict = verdicts
            .get(term)
            .ok_or_else(|| Error::MissingVerdict { term: term.clone() })?;
        if verdict.hateful_count() >= vote_threshold {
            selected.push(term.clone());
        }
    }
    Ok(selected)
}

/// Keep candidates whose hate level is at least `min_level` (0..=5),
/// preserving input order.
pub fn filter_candidates(
    candidates: Vec<CandidateRecord>,
    min_level: u8,
) -> Result<Vec<CandidateRecord>> {
    if min_level > 5 {
        return Err(Error::InvalidInput(format!(
            "min_level {min_level} outside 0..=5"
        )));
    }
    Ok(candidates
        .into_iter()
        .filter(|c| c.hate_level >= min_level)
        .collect())
}

/// Mask every token whose attribution score strictly exceeds `threshold`.
///
/// A score exactly equal to the threshold is *not* masked.
pub fn mask_by_attribution(
    origin_id: impl Into<String>,
    tokens: &[String],
    scores: &[f64],
    threshold: f64,
) -> Result<MaskedSentence> {
    if scores.len() != tokens.len() {
        return Err(Error::LengthMismatch {
            what: "attribution_scores",
            expected: tokens.len(),
            actual: scores.len(),
        });
    }
    let masked = tokens
        .iter()
        .zip(scores)
        .map(|(tok, &s)| {
            if s > threshold {
                MASK_TOKEN.to_string()
            } else {
                tok.clone()
            }
        })
        .collect();
    Ok(MaskedSentence::new(origin_id, masked))
}

/// One stage of a training plan: which hate levels it draws from and how
/// many samples it takes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub levels: Vec<u8>,
    pub count: usize,
}

/// A named training plan: ordered stages over hate levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanSpec {
    pub name: String,
    pub stages: Vec<StageSpec>,
}

impl PlanSpec {
    /// The four built-in plans: two-stage and three-stage curricula plus
    /// their single-stage mixed counterparts of equal total size.
    pub fn builtin(name: &str) -> Option<PlanSpec> {
        let stages = |specs: &[(&[u8], usize)]| {
            specs
                .iter()
                .map(|(levels, count)| StageSpec {
                    levels: levels.to_vec(),
                    count: *count,
                })
                .collect()
        };
        let plan = |stages| PlanSpec {
            name: name.to_string(),
            stages,
        };
        match name {
            "curriculum-2" => Some(plan(stages(&[(&[4], 1000), (&[5], 1000)]))),
            "mixed-2" => Some(plan(stages(&[(&[4, 5], 2000)]))),
            "curriculum-3" => Some(plan(stages(&[(&[3], 1000), (&[4], 1000), (&[5], 1000)]))),
            "mixed-3" => Some(plan(stages(&[(&[3, 4, 5], 3000)]))),
            _ => None,
        }
    }

    pub fn builtin_names() -> [&'static str; 4] {
        ["curriculum-2", "mixed-2", "curriculum-3", "mixed-3"]
    }

    /// Canonicalize level sets (sorted, deduped) and check ranges.
    pub fn validate(&mut self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidInput(format!(
                "plan {:?} has no stages",
                self.name
            )));
        }
        for stage in &mut self.stages {
            stage.levels.sort_unstable();
            stage.levels.dedup();
            if stage.levels.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "plan {:?}: stage with empty level set",
                    self.name
                )));
            }
            if let Some(&bad) = stage.levels.iter().find(|&&l| l > 5) {
                return Err(Error::InvalidInput(format!(
                    "plan {:?}: hate level {bad} outside 0..=5",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Load named plans from a JSON array of plan objects.
pub fn load_plans<R: std::io::Read>(mut reader: R) -> Result<Vec<PlanSpec>> {
    let mut contents = String::new();
    reader.read_to_string(&mut contents)?;
    let mut plans: Vec<PlanSpec> = serde_json::from_str(&contents)
        .map_err(|e| Error::InvalidInput(format!("malformed plan file: {e}")))?;
    for plan in &mut plans {
        plan.validate()?;
    }
    Ok(plans)
}

/// How a multi-level stage distributes its sample budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LevelSampling {
    /// One uniform draw over the pooled candidates of all the stage's levels.
    #[default]
    UniformOverUnion,
    /// The budget is split evenly across levels (remainder to the lowest
    /// levels first), then the combined sample is shuffled.
    EqualPerLevel,
}

/// One manifest stage: its level set and sampled ids in shuffled order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestStage {
    pub levels: Vec<u8>,
    pub sample_ids: Vec<String>,
}

/// An ordered training manifest with full seed provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumManifest {
    pub plan_name: String,
    pub seed: u64,
    pub stages: Vec<ManifestStage>,
}

impl CurriculumManifest {
    /// Stable, diffable serialization (fixed field order, trailing newline).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialization");
        s.push('\n');
        s
    }

    pub fn from_json(contents: &str) -> Result<Self> {
        serde_json::from_str(contents)
            .map_err(|e| Error::InvalidInput(format!("malformed manifest: {e}")))
    }

    /// Check stage disjointness and per-stage level membership against the
    /// candidate set the manifest was built from.
    pub fn validate_against(&self, candidates: &[CandidateRecord]) -> Result<()> {
        let by_id: HashMap<&str, &CandidateRecord> =
            candidates.iter().map(|c| (c.id.as_str(), c)).collect();
        let mut seen: HashSet<&str> = HashSet::new();
        for (idx, stage) in self.stages.iter().enumerate() {
            for id in &stage.sample_ids {
                if !seen.insert(id.as_str()) {
                    return Err(Error::InvalidInput(format!(
                        "sample {id:?} appears in more than one stage"
                    )));
                }
                let candidate = by_id.get(id.as_str()).ok_or_else(|| {
                    Error::InvalidInput(format!("sample {id:?} not among the candidates"))
                })?;
                if !stage.levels.contains(&candidate.hate_level) {
                    return Err(Error::InvalidInput(format!(
                        "sample {id:?} has level {} but stage {} covers {:?}",
                        candidate.hate_level,
                        idx + 1,
                        stage.levels
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Fill a plan's stages by seeded sampling without replacement.
///
/// Stages are processed in order and never reuse an id taken by an earlier
/// stage. Within a stage the output order is the shuffled sample order. The
/// whole construction is a pure function of (candidates, plan, seed, mode).
pub fn build_curriculum(
    candidates: &[CandidateRecord],
    plan: &PlanSpec,
    seed: u64,
    mode: LevelSampling,
) -> Result<CurriculumManifest> {
    let mut plan = plan.clone();
    plan.validate()?;

    let mut rng = SplitMix64::new(seed);
    let mut used: HashSet<&str> = HashSet::new();
    let mut stages = Vec::with_capacity(plan.stages.len());

    for (stage_idx, stage) in plan.stages.iter().enumerate() {
        let sample_ids = match mode {
            LevelSampling::UniformOverUnion => {
                let pool: Vec<&str> = candidates
                    .iter()
                    .filter(|c| {
                        stage.levels.contains(&c.hate_level) && !used.contains(c.id.as_str())
                    })
                    .map(|c| c.id.as_str())
                    .collect();
                if pool.len() < stage.count {
                    return Err(Error::Shortfall {
                        stage: stage_idx + 1,
                        levels: stage.levels.clone(),
                        requested: stage.count,
                        available: pool.len(),
                    });
                }
                rng.sample_without_replacement(&pool, stage.count)
            }
            LevelSampling::EqualPerLevel => {
                let quotas = split_evenly(stage.count, stage.levels.len());
                let mut combined: Vec<&str> = Vec::with_capacity(stage.count);
                for (&level, &quota) in stage.levels.iter().zip(&quotas) {
                    let pool: Vec<&str> = candidates
                        .iter()
                        .filter(|c| c.hate_level == level && !used.contains(c.id.as_str()))
                        .map(|c| c.id.as_str())
                        .collect();
                    if pool.len() < quota {
                        return Err(Error::Shortfall {
                            stage: stage_idx + 1,
                            levels: vec![level],
                            requested: quota,
                            available: pool.len(),
                        });
                    }
                    combined.extend(rng.sample_without_replacement(&pool, quota));
                }
                rng.shuffle(&mut combined);
                combined
            }
        };
        used.extend(sample_ids.iter().copied());
        stages.push(ManifestStage {
            levels: stage.levels.clone(),
            sample_ids: sample_ids.into_iter().map(str::to_string).collect(),
        });
    }

    Ok(CurriculumManifest {
        plan_name: plan.name,
        seed,
        stages,
    })
}

/// Split `total` into `parts` near-equal quotas, remainder to the front.
fn split_evenly(total: usize, parts: usize) -> Vec<usize> {
    let base = total / parts;
    let remainder = total % parts;
    (0..parts)
        .map(|i| if i < remainder { base + 1 } else { base })
        .collect()
}
