//! The shared word tokenizer.
//!
//! One tokenization rule serves both corpus ingestion and scoring so that
//! references and hypotheses always live in the same token space:
//!
//! 1. Unicode-normalize (NFC),
//! 2. lowercase,
//! 3. split on whitespace,
//! 4. strip leading/trailing characters that are neither alphanumeric
//!    nor `*`, then drop empty chunks.
//!
//! Keeping `*` out of the strip set preserves the mask token even when it
//! abuts punctuation (`"***."` tokenizes to `"***"`). Interior punctuation
//! (apostrophes, hyphens) is left alone: `"don't"` stays `"don't"`.

use unicode_normalization::UnicodeNormalization;

use crate::MASK_TOKEN;

/// Tokenize raw text into lowercase word tokens, preserving `"***"`.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect::<String>().to_lowercase();
    normalized
        .split_whitespace()
        .filter_map(|chunk| {
            let trimmed = chunk.trim_matches(|c: char| !(c.is_alphanumeric() || c == '*'));
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.to_string())
            }
        })
        .collect()
}

/// True iff `token` is exactly the masking token.
pub fn is_mask(token: &str) -> bool {
    token == MASK_TOKEN
}

/// Join tokens back into a single space-separated line.
pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}
