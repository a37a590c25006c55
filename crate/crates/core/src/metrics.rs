//! MAR / WER / UMWER scoring over a deterministic word-level alignment.
//!
//! All three metrics are defined against the *masked* reference. In
//! particular a hypothesis that transcribes a hate word verbatim instead of
//! emitting `"***"` aligns that word against the reference mask token and
//! scores a substitution — transcribing hate content correctly but failing
//! to censor it is an error, with no special casing.
//!
//! - MAR: percentage of reference mask positions whose aligned hypothesis
//!   token is also `"***"` (an alignment match). Undefined (`None`) for
//!   mask-free references.
//! - WER: `100·(I+S+D)/N` against the masked reference, `N` its length.
//! - UMWER: WER after removing every mask token from both sides, so
//!   over-generated mask tokens cost nothing.
//!
//! MAR is bounded by [0, 100]; WER and UMWER are not — insertions can push
//! them past 100 when the hypothesis is much longer than the reference.

use std::collections::HashSet;
use std::io::BufRead;

use serde::Serialize;

use crate::corpus::MaskedSentence;
use crate::error::{Error, Result};
use crate::text;

/// Alignment operation kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Match,
    Substitute,
    Insert,
    Delete,
}

/// One alignment step. Matches and substitutions carry both indices,
/// deletions only a reference index, insertions only a hypothesis index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AlignOp {
    pub kind: OpKind,
    pub ref_index: Option<usize>,
    pub hyp_index: Option<usize>,
}

/// A minimal-cost word alignment with its error counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub ops: Vec<AlignOp>,
    pub insertions: usize,
    pub substitutions: usize,
    pub deletions: usize,
}

impl Alignment {
    /// Total edit cost `S + I + D`.
    pub fn cost(&self) -> usize {
        self.insertions + self.substitutions + self.deletions
    }
}

/// Minimal-cost alignment with unit substitute/insert/delete costs.
///
/// Ties are broken during backtrace with priority match/substitute, then
/// delete, then insert, making the op sequence a deterministic function of
/// the inputs.
pub fn align<T: PartialEq>(ref_tokens: &[T], hyp_tokens: &[T]) -> Alignment {
    let r = ref_tokens.len();
    let h = hyp_tokens.len();

    let mut cost = vec![vec![0u32; h + 1]; r + 1];
    for (i, row) in cost.iter_mut().enumerate() {
        row[0] = i as u32;
    }
    for (j, cell) in cost[0].iter_mut().enumerate() {
        *cell = j as u32;
    }
    for i in 1..=r {
        for j in 1..=h {
            let sub = if ref_tokens[i - 1] == hyp_tokens[j - 1] {
                0
            } else {
                1
            };
            cost[i][j] = (cost[i - 1][j - 1] + sub)
                .min(cost[i - 1][j] + 1)
                .min(cost[i][j - 1] + 1);
        }
    }

    let mut ops = Vec::with_capacity(r.max(h));
    let (mut insertions, mut substitutions, mut deletions) = (0, 0, 0);
    let (mut i, mut j) = (r, h);
    while i > 0 || j > 0 {
        let here = cost[i][j];
        let diag_ok = i > 0 && j > 0 && {
            let sub = if ref_tokens[i - 1] == hyp_tokens[j - 1] {
                0
            } else {
                1
            };
            here == cost[i - 1][j - 1] + sub
        };
        if diag_ok {
            let kind = if ref_tokens[i - 1] == hyp_tokens[j - 1] {
                OpKind::Match
            } else {
                substitutions += 1;
                OpKind::Substitute
            };
            ops.push(AlignOp {
                kind,
                ref_index: Some(i - 1),
                hyp_index: Some(j - 1),
            });
            i -= 1;
            j -= 1;
        } else if i > 0 && here == cost[i - 1][j] + 1 {
            deletions += 1;
            ops.push(AlignOp {
                kind: OpKind::Delete,
                ref_index: Some(i - 1),
                hyp_index: None,
            });
            i -= 1;
        } else {
            insertions += 1;
            ops.push(AlignOp {
                kind: OpKind::Insert,
                ref_index: None,
                hyp_index: Some(j - 1),
            });
            j -= 1;
        }
    }
    ops.reverse();

    Alignment {
        ops,
        insertions,
        substitutions,
        deletions,
    }
}

/// Insertion/substitution/deletion counts against a reference of `ref_len`
/// words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ErrorCounts {
    pub insertions: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub ref_len: usize,
}

impl ErrorCounts {
    fn from_alignment(alignment: &Alignment, ref_len: usize) -> Self {
        Self {
            insertions: alignment.insertions,
            substitutions: alignment.substitutions,
            deletions: alignment.deletions,
            ref_len,
        }
    }

    pub fn total_errors(&self) -> usize {
        self.insertions + self.substitutions + self.deletions
    }

    /// `100·(I+S+D)/N`. The reference length must be nonzero.
    pub fn rate_percent(&self) -> f64 {
        100.0 * self.total_errors() as f64 / self.ref_len as f64
    }

    fn accumulate(&mut self, other: &ErrorCounts) {
        self.insertions += other.insertions;
        self.substitutions += other.substitutions;
        self.deletions += other.deletions;
        self.ref_len += other.ref_len;
    }
}

/// Count reference mask positions whose alignment op is a match (i.e. the
/// hypothesis emitted `"***"` there).
fn matched_mask_count(reference: &MaskedSentence, alignment: &Alignment) -> usize {
    let mask_set: HashSet<usize> = reference.mask_positions().iter().copied().collect();
    alignment
        .ops
        .iter()
        .filter(|op| {
            op.kind == OpKind::Match && op.ref_index.map(|i| mask_set.contains(&i)).unwrap_or(false)
        })
        .count()
}

/// Masking accuracy rate, or `None` for a mask-free reference.
pub fn mar(reference: &MaskedSentence, hyp_tokens: &[String]) -> Option<f64> {
    let total = reference.mask_count();
    if total == 0 {
        return None;
    }
    let alignment = align(reference.tokens(), hyp_tokens);
    let matched = matched_mask_count(reference, &alignment);
    Some(100.0 * matched as f64 / total as f64)
}

/// Word error rate against the masked reference.
pub fn wer(reference: &MaskedSentence, hyp_tokens: &[String]) -> Result<f64> {
    if reference.tokens().is_empty() {
        return Err(Error::EmptyReference {
            id: reference.origin_id().to_string(),
        });
    }
    let alignment = align(reference.tokens(), hyp_tokens);
    Ok(ErrorCounts::from_alignment(&alignment, reference.tokens().len()).rate_percent())
}

/// Unmasked word error rate: WER after stripping every mask token from both
/// the reference and the hypothesis.
pub fn umwer(reference: &MaskedSentence, hyp_tokens: &[String]) -> Result<f64> {
    if reference.tokens().is_empty() {
        return Err(Error::EmptyReference {
            id: reference.origin_id().to_string(),
        });
    }
    let stripped_ref = reference.unmasked_tokens();
    if stripped_ref.is_empty() {
        return Err(Error::AllMaskReference {
            id: reference.origin_id().to_string(),
        });
    }
    let stripped_hyp: Vec<String> = hyp_tokens
        .iter()
        .filter(|t| !text::is_mask(t))
        .cloned()
        .collect();
    let alignment = align(&stripped_ref, &stripped_hyp);
    Ok(ErrorCounts::from_alignment(&alignment, stripped_ref.len()).rate_percent())
}

/// All metrics for one reference/hypothesis pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    /// Absent when the reference has no mask tokens.
    pub mar: Option<f64>,
    pub wer: f64,
    pub umwer: f64,
    /// Counts against the masked reference (WER side).
    pub masked: ErrorCounts,
    /// Counts with mask tokens stripped from both sides (UMWER side).
    pub unmasked: ErrorCounts,
    pub matched_masks: usize,
    pub total_masks: usize,
}

/// One scoring unit: an utterance id, its masked reference, and the
/// hypothesis tokens.
#[derive(Debug, Clone)]
pub struct ScoringPair {
    pub id: String,
    pub reference: MaskedSentence,
    pub hypothesis: Vec<String>,
}

impl ScoringPair {
    /// Build a pair from raw reference and hypothesis text.
    pub fn from_text(id: impl Into<String>, ref_text: &str, hyp_text: &str) -> Self {
        let id = id.into();
        Self {
            reference: MaskedSentence::parse(id.clone(), ref_text),
            hypothesis: text::tokenize(hyp_text),
            id,
        }
    }
}

/// Score one pair, sharing a single alignment between MAR and WER.
pub fn evaluate_pair(pair: &ScoringPair) -> Result<EvalResult> {
    let reference = &pair.reference;
    if reference.tokens().is_empty() {
        return Err(Error::EmptyReference {
            id: pair.id.clone(),
        });
    }
    let stripped_ref = reference.unmasked_tokens();
    if stripped_ref.is_empty() {
        return Err(Error::AllMaskReference {
            id: pair.id.clone(),
        });
    }

    let masked_alignment = align(reference.tokens(), &pair.hypothesis);
    let masked = ErrorCounts::from_alignment(&masked_alignment, reference.tokens().len());
    let total_masks = reference.mask_count();
    let matched_masks = matched_mask_count(reference, &masked_alignment);

    let stripped_hyp: Vec<String> = pair
        .hypothesis
        .iter()
        .filter(|t| !text::is_mask(t))
        .cloned()
        .collect();
    let unmasked_alignment = align(&stripped_ref, &stripped_hyp);
    let unmasked = ErrorCounts::from_alignment(&unmasked_alignment, stripped_ref.len());

    Ok(EvalResult {
        mar: (total_masks > 0).then(|| 100.0 * matched_masks as f64 / total_masks as f64),
        wer: masked.rate_percent(),
        umwer: unmasked.rate_percent(),
        masked,
        unmasked,
        matched_masks,
        total_masks,
    })
}

/// How corpus-level percentages are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Pool raw counts across utterances, then divide once.
    #[default]
    Micro,
    /// Average the per-utterance percentages.
    Macro,
}

impl Aggregation {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "micro" => Some(Self::Micro),
            "macro" => Some(Self::Macro),
            _ => None,
        }
    }
}

/// Per-utterance scores plus the corpus-level pool.
#[derive(Debug, Clone, Serialize)]
pub struct UtteranceScore {
    pub id: String,
    #[serde(flatten)]
    pub result: EvalResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub aggregation: Aggregation,
    /// Count fields in here are always the plain sums of the per-utterance
    /// counts; only the percentages depend on the aggregation mode.
    pub pooled: EvalResult,
    pub per_utterance: Vec<UtteranceScore>,
}

/// Score a corpus of pairs. Ids must be unique; references must contain at
/// least one non-mask token each.
pub fn evaluate_corpus(pairs: &[ScoringPair], aggregation: Aggregation) -> Result<EvalReport> {
    let mut seen: HashSet<&str> = HashSet::new();
    for pair in pairs {
        if !seen.insert(&pair.id) {
            return Err(Error::DuplicateId {
                id: pair.id.clone(),
            });
        }
    }

    let mut per_utterance = Vec::with_capacity(pairs.len());
    let mut masked_total = ErrorCounts::default();
    let mut unmasked_total = ErrorCounts::default();
    let (mut matched_masks, mut total_masks) = (0usize, 0usize);
    for pair in pairs {
        let result = evaluate_pair(pair)?;
        masked_total.accumulate(&result.masked);
        unmasked_total.accumulate(&result.unmasked);
        matched_masks += result.matched_masks;
        total_masks += result.total_masks;
        per_utterance.push(UtteranceScore {
            id: pair.id.clone(),
            result,
        });
    }

    let pooled = match aggregation {
        Aggregation::Micro => EvalResult {
            mar: (total_masks > 0).then(|| 100.0 * matched_masks as f64 / total_masks as f64),
            wer: if masked_total.ref_len > 0 {
                masked_total.rate_percent()
            } else {
                0.0
            },
            umwer: if unmasked_total.ref_len > 0 {
                unmasked_total.rate_percent()
            } else {
                0.0
            },
            masked: masked_total,
            unmasked: unmasked_total,
            matched_masks,
            total_masks,
        },
        Aggregation::Macro => {
            let mean = |values: Vec<f64>| {
                if values.is_empty() {
                    0.0
                } else {
                    values.iter().sum::<f64>() / values.len() as f64
                }
            };
            let mars: Vec<f64> = per_utterance.iter().filter_map(|u| u.result.mar).collect();
            EvalResult {
                mar: (!mars.is_empty()).then(|| mean(mars)),
                wer: mean(per_utterance.iter().map(|u| u.result.wer).collect()),
                umwer: mean(per_utterance.iter().map(|u| u.result.umwer).collect()),
                masked: masked_total,
                unmasked: unmasked_total,
                matched_masks,
                total_masks,
            }
        }
    };

    Ok(EvalReport {
        aggregation,
        pooled,
        per_utterance,
    })
}

impl EvalReport {
    /// Machine-readable report (stable field order, trailing newline).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    /// Human-readable fixed-width table with one row per utterance and a
    /// pooled summary row.
    pub fn render_table(&self) -> String {
        fn fmt_mar(mar: Option<f64>) -> String {
            mar.map(|v| format!("{v:.1}"))
                .unwrap_or_else(|| "-".to_string())
        }
        let mut out = String::new();
        out.push_str(&format!(
            "{:<20} {:>7} {:>7} {:>7} {:>5} {:>5} {:>5} {:>5}\n",
            "id", "MAR", "WER", "UMWER", "I", "S", "D", "N"
        ));
        for u in &self.per_utterance {
            let r = &u.result;
            out.push_str(&format!(
                "{:<20} {:>7} {:>7.1} {:>7.1} {:>5} {:>5} {:>5} {:>5}\n",
                u.id,
                fmt_mar(r.mar),
                r.wer,
                r.umwer,
                r.masked.insertions,
                r.masked.substitutions,
                r.masked.deletions,
                r.masked.ref_len,
            ));
        }
        let p = &self.pooled;
        let mode = match self.aggregation {
            Aggregation::Micro => "pooled (micro)",
            Aggregation::Macro => "pooled (macro)",
        };
        out.push_str(&format!(
            "{:<20} {:>7} {:>7.1} {:>7.1} {:>5} {:>5} {:>5} {:>5}\n",
            mode,
            fmt_mar(p.mar),
            p.wer,
            p.umwer,
            p.masked.insertions,
            p.masked.substitutions,
            p.masked.deletions,
            p.masked.ref_len,
        ));
        out
    }
}

#[derive(serde::Deserialize)]
struct RawScoringLine {
    id: String,
    #[serde(rename = "ref")]
    reference: String,
    hyp: String,
}

/// Parse line-delimited scoring input: `{"id": ..., "ref": ..., "hyp": ...}`
/// per line, raw text on both sides. Malformed lines are fatal here.
pub fn parse_scoring_pairs<R: BufRead>(reader: R) -> Result<Vec<ScoringPair>> {
    let mut pairs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawScoringLine = serde_json::from_str(&line).map_err(|e| Error::Schema {
            line: idx + 1,
            message: format!("malformed scoring record: {e}"),
        })?;
        pairs.push(ScoringPair::from_text(raw.id, &raw.reference, &raw.hyp));
    }
    Ok(pairs)
}
