//! Hashing of sensitive tokens for logs and on-screen summaries.
//!
//! With `--redact`, anything that would echo record text outside an explicit
//! output file goes through here: every non-mask token is replaced by a
//! short hash so operators can correlate lines without reading slurs.

use sha2::{Digest, Sha256};

use maskeval::MASK_TOKEN;

pub fn redact_token(token: &str) -> String {
    if token == MASK_TOKEN {
        return token.to_string();
    }
    let digest = Sha256::digest(token.as_bytes());
    format!(
        "#{:02x}{:02x}{:02x}{:02x}",
        digest[0], digest[1], digest[2], digest[3]
    )
}

/// Redact each whitespace-separated word of `text`, preserving mask tokens.
pub fn redact_text(text: &str) -> String {
    text.split_whitespace()
        .map(redact_token)
        .collect::<Vec<_>>()
        .join(" ")
}
