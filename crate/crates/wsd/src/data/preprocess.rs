//! Token preprocessing: number tagging and context windowing.

use std::sync::OnceLock;

use regex::Regex;

use super::vocab::NUMBER_TAG;

/// Maximum context length; windows are centered on the target word.
pub const MAX_CONTEXT: usize = 140;

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // digits with optional thousands commas, optional single decimal point,
    // optional leading sign
    RE.get_or_init(|| {
        Regex::new(r"^[+-]?(\d{1,3}(,\d{3})+|\d+)(\.\d*)?$|^[+-]?\.\d+$").unwrap()
    })
}

pub fn is_number_token(token: &str) -> bool {
    number_re().is_match(token)
}

/// Replaces numeric tokens with the `<number>` tag and crops the context to
/// at most [`MAX_CONTEXT`] tokens centered on the target (the window shifts
/// at document edges to keep the full width when available). Returns the new
/// token list and the remapped target position.
pub fn preprocess(tokens: &[String], target_position: usize) -> (Vec<String>, usize) {
    assert!(target_position < tokens.len(), "target position out of range");
    let half = MAX_CONTEXT / 2;
    let start = if tokens.len() <= MAX_CONTEXT {
        0
    } else {
        target_position.saturating_sub(half).min(tokens.len() - MAX_CONTEXT)
    };
    let end = (start + MAX_CONTEXT).min(tokens.len());
    let windowed: Vec<String> = tokens[start..end]
        .iter()
        .map(|t| {
            if is_number_token(t) {
                NUMBER_TAG.to_string()
            } else {
                t.clone()
            }
        })
        .collect();
    (windowed, target_position - start)
}
