//! Answer extraction and grading for multiple-choice completions.
//!
//! Extraction first looks for `\boxed{...}` expressions (earliest usable one
//! wins), then falls back to an ordered cascade of regex patterns. Within a
//! cascade stage the earliest match wins; earlier stages take priority over
//! later ones regardless of position.

use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::prompt::{Letter, McqQuestion};

/// Version tag of [`FALLBACK_CASCADE`]. Bump on any pattern change.
pub const CASCADE_VERSION: &str = "fallback-v1";

/// Only the final this-many characters are searched by the standalone-letter
/// stage.
pub const STANDALONE_WINDOW_CHARS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FallbackPattern {
    pub name: &'static str,
    /// Keyword parts are case-insensitive; group 1 captures an uppercase
    /// letter that must additionally be an allowed letter.
    pub pattern: &'static str,
    /// Restricts the stage to the trailing [`STANDALONE_WINDOW_CHARS`].
    pub tail_only: bool,
}

pub const FALLBACK_CASCADE: &[FallbackPattern] = &[
    FallbackPattern {
        name: "answer_is",
        pattern: r"(?i:\banswer\s+is)\s*:?\s*\**\s*\(?([A-Z])\b",
        tail_only: false,
    },
    FallbackPattern {
        name: "answer_colon",
        pattern: r"(?i:\banswer)\s*:\s*\**\s*\(?([A-Z])\b",
        tail_only: false,
    },
    FallbackPattern {
        name: "option",
        pattern: r"(?i:\boption)\s*\(?([A-Z])\b",
        tail_only: false,
    },
    FallbackPattern {
        name: "standalone",
        pattern: r"(?:^|[^A-Za-z0-9])([A-Z])\.|\(([A-Z])\)",
        tail_only: true,
    },
];

static CASCADE: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    FALLBACK_CASCADE
        .iter()
        .map(|p| Regex::new(p.pattern).expect("fallback pattern compiles"))
        .collect()
});

static TEXT_WRAPPER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\\(?:text|textbf|mathrm|mathbf|mathit|textit)\s*\{(.*)\}$").unwrap()
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Boxed,
    RegexFallback,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionOutcome {
    pub letter: Option<Letter>,
    pub method: Method,
    /// Byte range of the matched expression in the source text.
    pub span: Option<Range<usize>>,
    /// Cascade stage name for fallback matches.
    pub pattern: Option<&'static str>,
}

impl ExtractionOutcome {
    pub fn none() -> Self {
        Self {
            letter: None,
            method: Method::None,
            span: None,
            pattern: None,
        }
    }
}

/// The answer space of a question: allowed letters plus option texts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Choices {
    texts: BTreeMap<Letter, String>,
}

impl Choices {
    /// Letters without option texts.
    pub fn letters(letters: &[Letter]) -> Self {
        Self {
            texts: letters.iter().map(|&l| (l, String::new())).collect(),
        }
    }

    pub fn from_options(options: &BTreeMap<Letter, String>) -> Self {
        Self {
            texts: options.clone(),
        }
    }

    pub fn of(q: &McqQuestion) -> Self {
        Self::from_options(&q.options)
    }

    pub fn allows(&self, l: Letter) -> bool {
        self.texts.contains_key(&l)
    }

    fn text_of(&self, l: Letter) -> Option<&str> {
        self.texts.get(&l).map(String::as_str).filter(|t| !t.is_empty())
    }

    fn letter_for_text(&self, s: &str) -> Option<Letter> {
        let s = s.trim();
        self.texts
            .iter()
            .find(|(_, t)| !t.is_empty() && t.trim().eq_ignore_ascii_case(s))
            .map(|(&l, _)| l)
    }
}

/// Finds every `\boxed{...}` with balanced braces. Yields (full span,
/// content span).
pub fn boxed_spans(text: &str) -> Vec<(Range<usize>, Range<usize>)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(off) = text[from..].find("\\boxed") {
        let start = from + off;
        let mut i = start + "\\boxed".len();
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        from = start + 1;
        if i >= bytes.len() || bytes[i] != b'{' {
            continue;
        }
        let open = i;
        let mut depth = 0usize;
        let mut close = None;
        for (j, &b) in bytes.iter().enumerate().skip(open) {
            match b {
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(j);
                        break;
                    }
                }
                _ => {}
            }
        }
        if let Some(close) = close {
            out.push((start..close + 1, open + 1..close));
        }
    }
    out
}

/// Maps boxed content to a letter: a bare allowed letter, optionally
/// followed by `.`/`)`/`:` and/or that option's text, or an exact
/// case-insensitive option text.
pub fn interpret_boxed(content: &str, choices: &Choices) -> Option<Letter> {
    let mut c = content.trim();
    while let Some(caps) = TEXT_WRAPPER.captures(c) {
        c = caps.get(1).unwrap().as_str().trim();
    }
    if let Some(inner) = c.strip_prefix('(') {
        if let Some((l, rest)) = split_letter(inner) {
            if let Some(after) = rest.strip_prefix(')') {
                if choices.allows(l) && option_tail_ok(after, l, choices) {
                    return Some(l);
                }
            }
        }
    }
    if let Some((l, rest)) = split_letter(c) {
        let single = rest.is_empty();
        let l = if single { l.to_ascii_uppercase() } else { l };
        if choices.allows(l) {
            if single {
                return Some(l);
            }
            let after = rest
                .strip_prefix('.')
                .or_else(|| rest.strip_prefix(')'))
                .or_else(|| rest.strip_prefix(':'));
            match after {
                Some(after) if option_tail_ok(after, l, choices) => return Some(l),
                None if rest.starts_with(char::is_whitespace)
                    && option_tail_matches(rest, l, choices) =>
                {
                    return Some(l)
                }
                _ => {}
            }
        }
    }
    choices.letter_for_text(c)
}

fn split_letter(s: &str) -> Option<(Letter, &str)> {
    let mut it = s.chars();
    let l = it.next()?;
    l.is_ascii_alphabetic().then_some((l, it.as_str()))
}

fn option_tail_ok(after: &str, l: Letter, choices: &Choices) -> bool {
    after.trim().is_empty() || option_tail_matches(after, l, choices)
}

fn option_tail_matches(after: &str, l: Letter, choices: &Choices) -> bool {
    choices
        .text_of(l)
        .is_some_and(|t| t.trim().eq_ignore_ascii_case(after.trim()))
}

/// Extracts the chosen letter from `text`. Total and pure: absence of an
/// answer is reported as [`Method::None`].
pub fn extract_answer(text: &str, choices: &Choices) -> ExtractionOutcome {
    for (full, inner) in boxed_spans(text) {
        if let Some(l) = interpret_boxed(&text[inner], choices) {
            return ExtractionOutcome {
                letter: Some(l),
                method: Method::Boxed,
                span: Some(full),
                pattern: None,
            };
        }
    }
    for (spec, re) in FALLBACK_CASCADE.iter().zip(CASCADE.iter()) {
        let base = if spec.tail_only { tail_start(text) } else { 0 };
        let hay = &text[base..];
        let hit = re.captures_iter(hay).find_map(|caps| {
            let m = caps.get(1).or_else(|| caps.get(2))?;
            let l = m.as_str().chars().next()?;
            choices.allows(l).then(|| {
                let whole = caps.get(0).unwrap();
                (l, base + whole.start()..base + whole.end())
            })
        });
        if let Some((l, span)) = hit {
            return ExtractionOutcome {
                letter: Some(l),
                method: Method::RegexFallback,
                span: Some(span),
                pattern: Some(spec.name),
            };
        }
    }
    ExtractionOutcome::none()
}

fn tail_start(text: &str) -> usize {
    let n = text.chars().count();
    if n <= STANDALONE_WINDOW_CHARS {
        return 0;
    }
    text.char_indices()
        .nth(n - STANDALONE_WINDOW_CHARS)
        .map(|(i, _)| i)
        .unwrap_or(0)
}

pub fn grade(outcome: &ExtractionOutcome, gold: Letter) -> bool {
    outcome.letter == Some(gold)
}
