//! Boxed-answer extraction and strict numeric scoring.

use crate::error::{Error, Result};

/// Relative tolerance for numeric answer comparison.
pub const ANSWER_REL_TOL: f64 = 1e-4;

/// Absolute floor guarding the relative tolerance when the truth is zero.
pub const ANSWER_ABS_FLOOR: f64 = 1e-9;

/// Contents of the last balanced `\boxed{...}` group, if any. Nested braces
/// are handled by balance counting; unbalanced groups are skipped.
pub fn extract_boxed_answer(text: &str) -> Option<String> {
    const MARKER: &str = "\\boxed{";
    let bytes = text.as_bytes();
    let mut last: Option<String> = None;
    let mut search_from = 0;
    while let Some(found) = text[search_from..].find(MARKER) {
        let start = search_from + found + MARKER.len();
        let mut depth = 1usize;
        let mut end = None;
        for (offset, &b) in bytes[start..].iter().enumerate() {
            match b {
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(start + offset);
                        break;
                    }
                }
                _ => {}
            }
        }
        if let Some(end) = end {
            last = Some(text[start..end].to_string());
        }
        search_from = search_from + found + MARKER.len();
    }
    last
}

/// Strips everything but digits and decimal points (plus a leading minus
/// sign) and parses the remainder as a number. Multiple decimal points or
/// an empty remainder yield `None`.
pub fn clean_numeric(raw: &str) -> Option<f64> {
    let mut cleaned = String::with_capacity(raw.len());
    let mut seen_numeric = false;
    for c in raw.chars() {
        match c {
            '0'..='9' | '.' => {
                cleaned.push(c);
                seen_numeric = true;
            }
            '-' | '\u{2212}' if !seen_numeric && !cleaned.starts_with('-') => {
                cleaned.push('-');
            }
            _ => {}
        }
    }
    if cleaned.chars().filter(|&c| c == '.').count() > 1 {
        return None;
    }
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Relative-tolerance comparison, with an absolute floor so a zero truth
/// does not make the tolerance vanish entirely.
pub fn answers_match(pred: f64, truth: f64, rel_tol: f64) -> bool {
    if !pred.is_finite() || !truth.is_finite() || rel_tol <= 0.0 {
        return false;
    }
    (pred - truth).abs() <= rel_tol * truth.abs().max(ANSWER_ABS_FLOOR)
}

/// Full scoring pipeline: extract the last boxed answer, clean it to a
/// number, and compare to the truth at the standard tolerance. Any failed
/// stage scores false. An unparseable truth is a dataset error.
pub fn score_answer(generated_text: &str, truth: &str) -> Result<bool> {
    let truth_value =
        clean_numeric(truth).ok_or_else(|| Error::ResponseParse(format!(
            "ground-truth answer `{truth}` is not numeric"
        )))?;
    Ok(extract_boxed_answer(generated_text)
        .and_then(|contents| clean_numeric(&contents))
        .map(|pred| answers_match(pred, truth_value, ANSWER_REL_TOL))
        .unwrap_or(false))
}
