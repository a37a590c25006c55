//! Dataset curation and scoring toolkit for masked ("censored") speech
//! transcription systems.
//!
//! The library covers the offline half of a censored-transcription pipeline:
//!
//! - [`corpus`] — ingest annotated corpora, build masked references from
//!   annotator rationale votes, pre-filter non-speakable records.
//! - [`curation`] — ensemble-vote keyword selection, hate-level assignment,
//!   attribution-threshold masking, and curriculum/mixed training manifests.
//! - [`prompts`] — the generation prompt renderer and the instruction-prompt
//!   bank used for transcribe-and-mask tuning.
//! - [`metrics`] — MAR / WER / UMWER scoring over a deterministic word-level
//!   alignment.
//! - [`objectives`] — reference numerics for the training losses
//!   (autoregressive cross-entropy, KL activation tuning) with a
//!   finite-difference gradient checker.
//!
//! Everything is deterministic: all sampling flows from explicit u64 seeds
//! through the [`sampling`] module.

pub mod corpus;
pub mod curation;
pub mod error;
pub mod metrics;
pub mod objectives;
pub mod prompts;
pub mod sampling;
pub mod text;

pub use error::Error;

/// The literal masking token substituted for hate-related words.
pub const MASK_TOKEN: &str = "***";
