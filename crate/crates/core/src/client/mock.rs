//! Deterministic scripted backend used by tests, examples and `--mock`.
//!
//! A script is an ordered list of entries. For each request the first entry
//! whose trigger matches the end of the context (prompt + prefill, trailing
//! whitespace ignored) wins. Its emission is split on whitespace into one
//! token per unit; every unit after the first carries a leading space so the
//! concatenated stream reads as the original text. The terminal marker, if
//! any, is emitted as a final separate token.

use std::fs;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, GenerationRequest, RawTokens};

#[derive(Debug, Clone)]
pub enum Trigger {
    /// Matches every context.
    Any,
    /// Context (trailing whitespace trimmed) ends with this text.
    Suffix(String),
    /// Regex that must match at the end of the trimmed context.
    Regex(Regex),
}

impl Trigger {
    pub fn suffix(s: impl Into<String>) -> Self {
        Trigger::Suffix(s.into())
    }

    pub fn regex(pattern: &str) -> Result<Self, regex::Error> {
        Regex::new(&format!(r"(?:{pattern})\z")).map(Trigger::Regex)
    }

    pub fn matches(&self, context: &str) -> bool {
        let ctx = context.trim_end();
        match self {
            Trigger::Any => true,
            Trigger::Suffix(s) => ctx.ends_with(s.trim_end()),
            Trigger::Regex(re) => re.is_match(ctx),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScriptEntry {
    pub trigger: Trigger,
    pub emission: Vec<String>,
    pub terminal_marker: Option<String>,
}

impl ScriptEntry {
    pub fn new(trigger: Trigger, emission: &str, terminal_marker: Option<&str>) -> Self {
        Self {
            trigger,
            emission: emission.split_whitespace().map(str::to_owned).collect(),
            terminal_marker: terminal_marker.map(str::to_owned),
        }
    }

    fn tokens(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .emission
            .iter()
            .enumerate()
            .map(|(i, u)| if i == 0 { u.clone() } else { format!(" {u}") })
            .collect();
        if let Some(m) = &self.terminal_marker {
            out.push(m.clone());
        }
        out
    }
}

/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct ScriptedModel {
    entries: Vec<ScriptEntry>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct EntrySpec {
    #[serde(default)]
    suffix: Option<String>,
    #[serde(default)]
    regex: Option<String>,
    emit: String,
    #[serde(default)]
    terminal: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    entries: Vec<EntrySpec>,
}

impl ScriptedModel {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self { entries }
    }

    /// A model that answers every prompt with `text`.
    pub fn constant(text: &str) -> Self {
        Self::new(vec![ScriptEntry::new(Trigger::Any, text, None)])
    }

    pub fn entries(&self) -> &[ScriptEntry] {
        &self.entries
    }

    /// Parses the JSON script format:
    /// `{"entries": [{"suffix"|"regex": ..., "emit": "...", "terminal": ...}]}`.
    /// An entry with neither `suffix` nor `regex` matches anything.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let file: ScriptFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut entries = Vec::with_capacity(file.entries.len());
        for (i, spec) in file.entries.into_iter().enumerate() {
            let trigger = match (spec.suffix, spec.regex) {
                (Some(_), Some(_)) => {
                    return Err(format!("entry {i}: both suffix and regex given"))
                }
                (Some(s), None) => Trigger::Suffix(s),
                (None, Some(r)) => {
                    Trigger::regex(&r).map_err(|e| format!("entry {i}: bad regex: {e}"))?
                }
                (None, None) => Trigger::Any,
            };
            entries.push(ScriptEntry::new(trigger, &spec.emit, spec.terminal.as_deref()));
        }
        if entries.is_empty() {
            return Err("script has no entries".into());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn select(&self, context: &str) -> Option<&ScriptEntry> {
        self.entries.iter().find(|e| e.trigger.matches(context))
    }
}

impl Backend for ScriptedModel {
    fn raw_tokens(&self, req: &GenerationRequest) -> Result<RawTokens<'_>, BackendError> {
        let ctx = req.context();
        let entry = self.select(&ctx).ok_or_else(|| {
            let tail: String = {
                let chars: Vec<char> = ctx.chars().collect();
                chars[chars.len().saturating_sub(40)..].iter().collect()
            };
            BackendError::Unscripted { tail }
        })?;
        Ok(Box::new(entry.tokens().into_iter().map(Ok)))
    }

    fn name(&self) -> String {
        format!("scripted({} entries)", self.entries.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::{generate, probe_answer, StopCause};

    #[test]
    fn three_tokens_then_marker() {
        let m = ScriptedModel::new(vec![ScriptEntry::new(Trigger::Any, "a b c", Some("<END>"))]);
        let req = GenerationRequest::new("q", 10).with_stop("<END>");
        let c = generate(&m, &req).unwrap();
        assert_eq!(c.cause, StopCause::Marker);
        // three content tokens plus the marker event
        assert_eq!(c.tokens, vec!["a", " b", " c", "<END>"]);
    }

    #[test]
    fn ten_tokens_capped_at_five() {
        let m = ScriptedModel::constant("1 2 3 4 5 6 7 8 9 10");
        let c = generate(&m, &GenerationRequest::new("q", 5)).unwrap();
        assert_eq!(c.tokens.len(), 5);
        assert_eq!(c.cause, StopCause::Cap);
    }

    #[test]
    fn first_matching_entry_wins() {
        let m = ScriptedModel::new(vec![
            ScriptEntry::new(Trigger::suffix("Wait."), "forced", None),
            ScriptEntry::new(Trigger::Any, "default", None),
        ]);
        assert_eq!(probe_answer(&m, "hmm Wait.", 8, 0.0, 42).unwrap(), "forced");
        assert_eq!(probe_answer(&m, "hmm Wait. \n", 8, 0.0, 42).unwrap(), "forced");
        assert_eq!(probe_answer(&m, "hmm", 8, 0.0, 42).unwrap(), "default");
    }

    #[test]
    fn regex_trigger_anchored_at_end() {
        let m = ScriptedModel::new(vec![
            ScriptEntry::new(Trigger::regex(r"(?s)Q7\b.*answer").unwrap(), "x", None),
            ScriptEntry::new(Trigger::Any, "y", None),
        ]);
        assert_eq!(probe_answer(&m, "Q7 blah answer", 8, 0.0, 42).unwrap(), "x");
        assert_eq!(probe_answer(&m, "Q7 answer blah", 8, 0.0, 42).unwrap(), "y");
        assert_eq!(probe_answer(&m, "Q70 answer", 8, 0.0, 42).unwrap(), "y");
    }

    #[test]
    fn unmatched_context_is_an_error() {
        let m = ScriptedModel::new(vec![ScriptEntry::new(Trigger::suffix("zzz"), "x", None)]);
        assert!(matches!(
            probe_answer(&m, "abc", 8, 0.0, 42),
            Err(BackendError::Unscripted { .. })
        ));
    }

    #[test]
    fn json_script_round_trip() {
        let m = ScriptedModel::from_json(
            r#"{"entries":[
                {"suffix":"Wait.","emit":"a b","terminal":"</t>"},
                {"regex":"Q\\d+","emit":"c"},
                {"emit":"\\boxed{B}"}
            ]}"#,
        )
        .unwrap();
        assert_eq!(m.entries().len(), 3);
        assert_eq!(probe_answer(&m, "x Wait.", 8, 0.0, 42).unwrap(), "a b</t>");
        assert_eq!(probe_answer(&m, "Q12", 8, 0.0, 42).unwrap(), "c");
        assert_eq!(probe_answer(&m, "other", 8, 0.0, 42).unwrap(), "\\boxed{B}");
        assert!(ScriptedModel::from_json(r#"{"entries":[]}"#).is_err());
        assert!(ScriptedModel::from_json(r#"{"entries":[{"emit":"a","bogus":1}]}"#).is_err());
    }

    #[test]
    fn replay_is_identical() {
        let m = ScriptedModel::constant("\\boxed{B} because reasons");
        let a = probe_answer(&m, "p", 64, 0.0, 42).unwrap();
        let b = probe_answer(&m, "p", 64, 0.0, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\\boxed{B}"));
    }
}
