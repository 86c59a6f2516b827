//! Decomposition of a raw generation into preamble, `<think>` content,
//! `<answer>` content and tag diagnostics.
//!
//! Only the first `<think>` block and the first `<answer>` block carry
//! meaning; later duplicates only bump the counters in [`ParseDiagnostics`].
//! Tag names match ASCII case-insensitively, with no attributes and no
//! nesting. Parsing never fails: malformed output shows up in the
//! diagnostics instead.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::choice::{ChoiceLabel, ChoiceUniverse};
use crate::reward::RewardConfig;

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const ANSWER_OPEN: &str = "<answer>";
const ANSWER_CLOSE: &str = "</answer>";

/// Byte offsets of one tagged block inside the original text.
///
/// For an unclosed block, `content` runs to end-of-text and `close` is `None`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpan {
    pub open: Range<usize>,
    pub content: Range<usize>,
    pub close: Option<Range<usize>>,
}

impl BlockSpan {
    /// Offset just past the block (close tag end, or content end if unclosed).
    pub fn end(&self) -> usize {
        self.close.as_ref().map_or(self.content.end, |c| c.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub think_count: usize,
    pub answer_count: usize,
    /// The first answer block opens after the first think block has closed.
    pub answer_after_think: bool,
    pub choice: Option<ChoiceLabel>,
}

impl ParseDiagnostics {
    /// Tag-level syntax check only: exactly one of each block, in order,
    /// with a recognised choice. The leak and preamble detectors are not
    /// consulted here.
    pub fn tag_syntax_ok(&self) -> bool {
        self.think_count == 1
            && self.answer_count == 1
            && self.answer_after_think
            && self.choice.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    /// Text strictly before the first `<think>`. Without a think block it is
    /// the text before the first `<answer>`, or the whole text.
    pub preamble: String,
    pub think: String,
    pub answer_raw: String,
    /// Text after the first `</answer>`.
    pub postamble: String,
    pub diagnostics: ParseDiagnostics,
    pub think_span: Option<BlockSpan>,
    pub answer_span: Option<BlockSpan>,
}

impl ParsedResponse {
    /// Re-serialize in canonical `preamble <think>..</think><answer>..</answer> postamble` order.
    pub fn to_canonical(&self) -> String {
        format!(
            "{}{THINK_OPEN}{}{THINK_CLOSE}{ANSWER_OPEN}{}{ANSWER_CLOSE}{}",
            self.preamble, self.think, self.answer_raw, self.postamble
        )
    }

    pub fn preamble_words(&self) -> usize {
        count_preamble_words(&self.preamble)
    }
}

fn find_ci(hay: &[u8], from: usize, needle: &str) -> Option<usize> {
    let needle = needle.as_bytes();
    if from > hay.len() || hay.len() - from < needle.len() {
        return None;
    }
    hay[from..]
        .windows(needle.len())
        .position(|w| w.eq_ignore_ascii_case(needle))
        .map(|p| p + from)
}

fn count_ci(hay: &[u8], needle: &str) -> usize {
    let mut count = 0;
    let mut at = 0;
    while let Some(p) = find_ci(hay, at, needle) {
        count += 1;
        at = p + needle.len();
    }
    count
}

fn first_block(hay: &[u8], open: &str, close: &str) -> Option<BlockSpan> {
    let start = find_ci(hay, 0, open)?;
    let content_start = start + open.len();
    let span = match find_ci(hay, content_start, close) {
        Some(c) => BlockSpan {
            open: start..content_start,
            content: content_start..c,
            close: Some(c..c + close.len()),
        },
        None => BlockSpan {
            open: start..content_start,
            content: content_start..hay.len(),
            close: None,
        },
    };
    Some(span)
}

/// Map an `<answer>` payload to a choice letter.
///
/// Surrounding whitespace is ignored and the payload must be one letter,
/// optionally followed by punctuation (`"B."`, `" b) "`). Anything longer,
/// or a letter outside `universe`, yields `None`.
pub fn normalize_choice(answer_raw: &str, universe: &ChoiceUniverse) -> Option<ChoiceLabel> {
    let trimmed = answer_raw.trim();
    let mut chars = trimmed.chars();
    let first = chars.next()?;
    if !first.is_ascii_alphabetic() || chars.any(char::is_alphanumeric) {
        return None;
    }
    ChoiceLabel::new(first)
        .ok()
        .filter(|label| universe.contains(*label))
}

/// Parse one generation against the given choice universe.
pub fn parse_response(text: &str, universe: &ChoiceUniverse) -> ParsedResponse {
    let bytes = text.as_bytes();
    let think_span = first_block(bytes, THINK_OPEN, THINK_CLOSE);
    let answer_span = first_block(bytes, ANSWER_OPEN, ANSWER_CLOSE);

    // Tags are ASCII, so every offset below is a char boundary.
    let slice = |r: &Range<usize>| text[r.clone()].to_string();

    let preamble_end = match (&think_span, &answer_span) {
        (Some(t), _) => t.open.start,
        (None, Some(a)) => a.open.start,
        (None, None) => text.len(),
    };
    let think = think_span.as_ref().map(|s| slice(&s.content)).unwrap_or_default();
    let answer_raw = answer_span.as_ref().map(|s| slice(&s.content)).unwrap_or_default();
    let postamble = answer_span
        .as_ref()
        .and_then(|s| s.close.as_ref())
        .map(|c| text[c.end..].to_string())
        .unwrap_or_default();

    let answer_after_think = match (&think_span, &answer_span) {
        (Some(t), Some(a)) => t.close.as_ref().is_some_and(|c| a.open.start >= c.end),
        _ => false,
    };

    let diagnostics = ParseDiagnostics {
        think_count: count_ci(bytes, THINK_OPEN),
        answer_count: count_ci(bytes, ANSWER_OPEN),
        answer_after_think,
        choice: normalize_choice(&answer_raw, universe),
    };

    ParsedResponse {
        preamble: text[..preamble_end].to_string(),
        think,
        answer_raw,
        postamble,
        diagnostics,
        think_span,
        answer_span,
    }
}

/// Number of maximal runs of non-whitespace characters (Unicode whitespace).
pub fn count_preamble_words(preamble: &str) -> usize {
    preamble.split_whitespace().count()
}

/// Format compliance including both hack detectors.
///
/// All of these must hold: exactly one think and one answer block, answer
/// after think, a recognised choice, a preamble no longer than
/// `tau_preamble` words, and `leak_score <= tau_answer`.
pub fn is_format_compliant(parsed: &ParsedResponse, config: &RewardConfig, leak_score: f64) -> bool {
    parsed.diagnostics.tag_syntax_ok()
        && parsed.preamble_words() <= config.tau_preamble
        && leak_score <= config.tau_answer
}
