//! Annotated-corpus ingestion and reference masking.
//!
//! Input corpora are line-delimited JSON, one record per line:
//!
//! ```text
//! {"id": "u1", "tokens": ["you", "are", "bad"],
//!  "annotators": ["Hateful", "Hateful", "Hateful"],
//!  "target": "Women",
//!  "rationales": [[2], [2], []],
//!  "source": "original"}
//! ```
//!
//! `tokens` may be replaced by `text` (raw string, tokenized on ingest with
//! the shared rule from [`crate::text`]). `rationales` holds one index array
//! per annotator; per-token vote counts are derived from them. An empty
//! `rationales` array is shorthand for no highlights at all.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;
use crate::MASK_TOKEN;

/// Category judgment from a single annotator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnnotatorLabel {
    Hateful,
    Offensive,
    Normal,
    Undecided,
}

impl AnnotatorLabel {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hateful" => Some(Self::Hateful),
            "offensive" => Some(Self::Offensive),
            "normal" => Some(Self::Normal),
            "undecided" => Some(Self::Undecided),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Hateful => "Hateful",
            Self::Offensive => "Offensive",
            Self::Normal => "Normal",
            Self::Undecided => "Undecided",
        }
    }
}

/// Whether a sentence came from the source corpus or was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordSource {
    Original,
    Generated,
}

impl RecordSource {
    fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "original" => Some(Self::Original),
            "generated" => Some(Self::Generated),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Original => "original",
            Self::Generated => "generated",
        }
    }
}

/// One corpus sentence with its three annotator judgments and per-token
/// rationale votes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceRecord {
    pub id: String,
    /// Lowercase word tokens.
    pub tokens: Vec<String>,
    pub annotator_labels: [AnnotatorLabel; 3],
    /// Target group of the hateful content, when annotated.
    pub target: Option<String>,
    /// Per-token count of annotators who highlighted the token, 0..=3.
    pub rationale_votes: Vec<u8>,
    pub source: RecordSource,
}

impl UtteranceRecord {
    /// Validate the cross-field invariants.
    pub fn validate(&self) -> Result<()> {
        if self.rationale_votes.len() != self.tokens.len() {
            return Err(Error::LengthMismatch {
                what: "rationale_votes",
                expected: self.tokens.len(),
                actual: self.rationale_votes.len(),
            });
        }
        if let Some(v) = self.rationale_votes.iter().find(|&&v| v > 3) {
            return Err(Error::InvalidInput(format!(
                "rationale vote {v} out of range 0..=3"
            )));
        }
        Ok(())
    }
}

/// A sentence with hate-related positions replaced by [`MASK_TOKEN`].
///
/// Mask positions are derived from the tokens themselves, so the invariant
/// `tokens[i] == "***" ⇔ i ∈ mask_positions` holds by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedSentence {
    tokens: Vec<String>,
    mask_positions: Vec<usize>,
    origin_id: String,
}

impl MaskedSentence {
    pub fn new(origin_id: impl Into<String>, tokens: Vec<String>) -> Self {
        let mask_positions = tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| text::is_mask(t))
            .map(|(i, _)| i)
            .collect();
        Self {
            tokens,
            mask_positions,
            origin_id: origin_id.into(),
        }
    }

    /// Tokenize raw reference text and wrap it.
    pub fn parse(origin_id: impl Into<String>, text_line: &str) -> Self {
        Self::new(origin_id, text::tokenize(text_line))
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Sorted indices of mask tokens.
    pub fn mask_positions(&self) -> &[usize] {
        &self.mask_positions
    }

    pub fn mask_count(&self) -> usize {
        self.mask_positions.len()
    }

    pub fn origin_id(&self) -> &str {
        &self.origin_id
    }

    /// Tokens with every mask token removed (UMWER's reference side).
    pub fn unmasked_tokens(&self) -> Vec<String> {
        self.tokens
            .iter()
            .filter(|t| !text::is_mask(t))
            .cloned()
            .collect()
    }

    pub fn text(&self) -> String {
        text::detokenize(&self.tokens)
    }
}

/// True iff all three annotators labeled the record Hateful.
pub fn is_unanimous_hateful(record: &UtteranceRecord) -> bool {
    record
        .annotator_labels
        .iter()
        .all(|l| *l == AnnotatorLabel::Hateful)
}

/// Mask every token highlighted by at least `vote_threshold` annotators.
///
/// `vote_threshold` must be in 1..=3.
pub fn build_masked_reference(
    record: &UtteranceRecord,
    vote_threshold: u8,
) -> Result<MaskedSentence> {
    if !(1..=3).contains(&vote_threshold) {
        return Err(Error::InvalidInput(format!(
            "vote_threshold {vote_threshold} outside 1..=3"
        )));
    }
    record.validate()?;
    let tokens = record
        .tokens
        .iter()
        .zip(&record.rationale_votes)
        .map(|(tok, &votes)| {
            if votes >= vote_threshold {
                MASK_TOKEN.to_string()
            } else {
                tok.clone()
            }
        })
        .collect();
    Ok(MaskedSentence::new(record.id.clone(), tokens))
}

/// Heuristic stand-in for the manual clean-sentence selection: drops records
/// containing anything a TTS front end cannot speak, with a per-id override
/// list taking precedence in both directions.
#[derive(Debug, Clone)]
pub struct SymbolPrefilter {
    /// Token prefixes that force a drop (URL fragments and the like).
    patterns: Vec<String>,
    /// id → keep. Entries here win over the heuristic.
    overrides: HashMap<String, bool>,
}

impl Default for SymbolPrefilter {
    fn default() -> Self {
        Self::new(Self::default_patterns())
    }
}

impl SymbolPrefilter {
    pub fn new(patterns: Vec<String>) -> Self {
        Self {
            patterns,
            overrides: HashMap::new(),
        }
    }

    /// Built-in drop patterns. Emoticons and digits are already caught by
    /// the character-class rule; these catch lexical URL fragments.
    pub fn default_patterns() -> Vec<String> {
        vec!["http".to_string(), "www".to_string()]
    }

    /// Read an override list: one id per line, `+id` forces keep, `-id`
    /// forces drop.
    pub fn load_overrides<R: BufRead>(&mut self, reader: R) -> Result<()> {
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let (keep, id) = match trimmed.split_at(1) {
                ("+", rest) => (true, rest),
                ("-", rest) => (false, rest),
                _ => {
                    return Err(Error::Schema {
                        line: idx + 1,
                        message: format!("override entry must start with + or -: {trimmed:?}"),
                    })
                }
            };
            self.overrides.insert(id.trim().to_string(), keep);
        }
        Ok(())
    }

    pub fn set_override(&mut self, id: impl Into<String>, keep: bool) {
        self.overrides.insert(id.into(), keep);
    }

    /// `true` = keep the record, `false` = drop it.
    pub fn keep(&self, record: &UtteranceRecord) -> bool {
        if let Some(&keep) = self.overrides.get(&record.id) {
            return keep;
        }
        for token in &record.tokens {
            if token.chars().any(|c| c.is_ascii_digit()) {
                return false;
            }
            if token
                .chars()
                .any(|c| !(c.is_ascii_lowercase() || c == '\''))
            {
                return false;
            }
            if self.patterns.iter().any(|p| token.starts_with(p.as_str())) {
                return false;
            }
        }
        true
    }
}

/// A record-level problem found while parsing one corpus line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Result of parsing a corpus stream: valid records in input order plus one
/// entry per malformed line.
#[derive(Debug, Default)]
pub struct CorpusParse {
    pub records: Vec<UtteranceRecord>,
    pub line_errors: Vec<LineError>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    tokens: Option<Vec<String>>,
    annotators: Vec<String>,
    #[serde(default)]
    target: Option<String>,
    #[serde(default)]
    rationales: Vec<Vec<usize>>,
    source: String,
}

fn validate_raw(raw: RawRecord) -> std::result::Result<UtteranceRecord, String> {
    let tokens: Vec<String> = match (&raw.tokens, &raw.text) {
        (Some(toks), _) => toks.iter().map(|t| t.to_lowercase()).collect(),
        (None, Some(text_line)) => text::tokenize(text_line),
        (None, None) => return Err("record needs either `tokens` or `text`".to_string()),
    };
    if tokens.iter().any(|t| t.is_empty()) {
        return Err("empty token".to_string());
    }

    if raw.annotators.len() != 3 {
        return Err(format!(
            "expected exactly 3 annotator labels, got {}",
            raw.annotators.len()
        ));
    }
    let mut labels = [AnnotatorLabel::Normal; 3];
    for (i, s) in raw.annotators.iter().enumerate() {
        labels[i] =
            AnnotatorLabel::parse(s).ok_or_else(|| format!("unknown annotator label {s:?}"))?;
    }

    let mut votes = vec![0u8; tokens.len()];
    if !raw.rationales.is_empty() {
        if raw.rationales.len() != 3 {
            return Err(format!(
                "expected 3 rationale index arrays (or none), got {}",
                raw.rationales.len()
            ));
        }
        for per_annotator in &raw.rationales {
            let distinct: HashSet<usize> = per_annotator.iter().copied().collect();
            for idx in distinct {
                if idx >= tokens.len() {
                    return Err(format!(
                        "rationale index {idx} out of range for {} tokens",
                        tokens.len()
                    ));
                }
                votes[idx] += 1;
            }
        }
    }

    let source = RecordSource::parse(&raw.source)
        .ok_or_else(|| format!("unknown source {:?}", raw.source))?;

    Ok(UtteranceRecord {
        id: raw.id,
        tokens,
        annotator_labels: labels,
        target: raw.target,
        rationale_votes: votes,
        source,
    })
}

/// Parse a line-delimited corpus stream.
///
/// Valid records are returned in input order. Malformed lines do not abort
/// the parse; they are reported with their 1-based line numbers. Blank lines
/// are skipped. Only stream-level I/O failures are fatal.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<CorpusParse> {
    let mut out = CorpusParse::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawRecord>(&line) {
            Ok(raw) => match validate_raw(raw) {
                Ok(record) => out.records.push(record),
                Err(message) => out.line_errors.push(LineError {
                    line: line_no,
                    message,
                }),
            },
            Err(e) => out.line_errors.push(LineError {
                line: line_no,
                message: format!("malformed record: {e}"),
            }),
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    tokens: &'a [String],
    annotators: [&'static str; 3],
    target: &'a Option<String>,
    rationales: [Vec<usize>; 3],
    source: &'static str,
}

/// Serialize one record as a canonical corpus line (no trailing newline).
///
/// Rationale votes are decomposed canonically: annotator `k` (0-based) is
/// assigned every index with more than `k` votes, so parsing the output
/// reproduces the original vote counts exactly.
pub fn serialize_record(record: &UtteranceRecord) -> String {
    let rationales = [0u8, 1, 2].map(|k| {
        record
            .rationale_votes
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > k)
            .map(|(i, _)| i)
            .collect()
    });
    let out = RecordOut {
        id: &record.id,
        tokens: &record.tokens,
        annotators: record.annotator_labels.map(|l| l.as_str()),
        target: &record.target,
        rationales,
        source: record.source.as_str(),
    };
    serde_json::to_string(&out).expect("record serialization cannot fail")
}
