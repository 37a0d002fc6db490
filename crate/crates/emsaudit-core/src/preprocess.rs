//! Report text normalization and whitespace tokenization.

use alloc::string::String;
use alloc::vec::Vec;

/// Normalize raw report text.
///
/// Lowercases the input, replaces every character that is not a letter,
/// digit, or `%` with a space, collapses whitespace runs, and trims. Total
/// and idempotent.
pub fn normalize(text: &str) -> String {
    normalize_with(text, "")
}

/// [`normalize`] with additional symbols to keep (e.g. `"&"`), used to
/// reproduce corpora that were preprocessed with a laxer symbol rule.
pub fn normalize_with(text: &str, extra_kept_symbols: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        for lc in c.to_lowercase() {
            let keep = lc.is_alphabetic()
                || lc.is_ascii_digit()
                || lc == '%'
                || extra_kept_symbols.contains(lc);
            if keep {
                if pending_space && !out.is_empty() {
                    out.push(' ');
                }
                pending_space = false;
                out.push(lc);
            } else {
                pending_space = true;
            }
        }
    }
    out
}

/// Split normalized text into its maximal non-space runs, in order.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(String::from).collect()
}

/// A tokenized report tied back to its incident.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSentence {
    pub tokens: Vec<String>,
    pub source_incident: String,
}

impl TokenizedSentence {
    /// Normalize and tokenize `text` for the given incident.
    pub fn from_raw(incident_id: &str, text: &str) -> Self {
        TokenizedSentence {
            tokens: tokenize(&normalize(text)),
            source_incident: String::from(incident_id),
        }
    }
}
