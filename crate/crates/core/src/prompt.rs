//! Multiple-choice questions and the exact prompt layouts used for
//! evaluation and for reasoning-trace generation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default evaluation instruction.
pub const BOXED_INSTRUCTION: &str = "Return your final response within \\boxed{}.";

/// Instruction for chain-of-thought prompting of baseline models.
pub const COT_INSTRUCTION: &str =
    "Let's think step by step. Return your final response within \\boxed{}.";

pub type Letter = char;

/// One multiple-choice item in the canonical JSON Lines interchange format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McqQuestion {
    pub id: String,
    #[serde(rename = "question")]
    pub stem: String,
    pub options: BTreeMap<Letter, String>,
    #[serde(rename = "answer")]
    pub gold: Letter,
    pub source: String,
    #[serde(default)]
    pub domains: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QuestionError {
    #[error("question {id}: needs at least 2 options, found {found}")]
    TooFewOptions { id: String, found: usize },
    #[error("question {id}: option letters must run consecutively from 'A', found {letters:?}")]
    NonConsecutive { id: String, letters: String },
    #[error("question {id}: gold answer {gold:?} is not one of the options")]
    GoldNotAnOption { id: String, gold: Letter },
    #[error("question {id}: id is empty")]
    EmptyId { id: String },
    #[error("duplicate question id {0:?}")]
    DuplicateId(String),
}

impl McqQuestion {
    pub fn new(
        id: impl Into<String>,
        stem: impl Into<String>,
        options: &[&str],
        gold: Letter,
        source: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            stem: stem.into(),
            options: options
                .iter()
                .enumerate()
                .map(|(i, t)| (letter_at(i), (*t).to_owned()))
                .collect(),
            gold,
            source: source.into(),
            domains: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), QuestionError> {
        if self.id.is_empty() {
            return Err(QuestionError::EmptyId { id: self.id.clone() });
        }
        if self.options.len() < 2 {
            return Err(QuestionError::TooFewOptions {
                id: self.id.clone(),
                found: self.options.len(),
            });
        }
        let consecutive = self
            .options
            .keys()
            .enumerate()
            .all(|(i, &l)| l == letter_at(i));
        if !consecutive {
            return Err(QuestionError::NonConsecutive {
                id: self.id.clone(),
                letters: self.options.keys().collect(),
            });
        }
        if !self.options.contains_key(&self.gold) {
            return Err(QuestionError::GoldNotAnOption {
                id: self.id.clone(),
                gold: self.gold,
            });
        }
        Ok(())
    }

    pub fn letters(&self) -> Vec<Letter> {
        self.options.keys().copied().collect()
    }
}

/// Checks each question and id uniqueness across the set.
pub fn validate_dataset(questions: &[McqQuestion]) -> Result<(), QuestionError> {
    let mut seen = std::collections::HashSet::with_capacity(questions.len());
    for q in questions {
        q.validate()?;
        if !seen.insert(q.id.as_str()) {
            return Err(QuestionError::DuplicateId(q.id.clone()));
        }
    }
    Ok(())
}

fn letter_at(i: usize) -> Letter {
    (b'A' + i as u8) as char
}

/// `A. text` lines joined by `\n`, no trailing newline.
pub fn format_options(options: &BTreeMap<Letter, String>) -> String {
    options
        .iter()
        .map(|(l, t)| format!("{l}. {t}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Inverse of [`format_options`] for option texts without embedded newlines.
pub fn parse_options(block: &str) -> Option<BTreeMap<Letter, String>> {
    let mut out = BTreeMap::new();
    for line in block.split('\n') {
        let mut chars = line.chars();
        let letter = chars.next()?;
        let rest = chars.as_str().strip_prefix(". ")?;
        if !letter.is_ascii_uppercase() || out.insert(letter, rest.to_owned()).is_some() {
            return None;
        }
    }
    Some(out)
}

/// `{stem}\n{options}\n{instruction}`.
pub fn format_prompt(q: &McqQuestion, instruction: &str) -> String {
    if q.stem.is_empty() {
        log::warn!("question {} has an empty stem", q.id);
    }
    format!("{}\n{}\n{}", q.stem, format_options(&q.options), instruction)
}

/// Trace-generation layout: `{instruction}\n{stem}\n{options}`.
pub fn format_trace_prompt(q: &McqQuestion) -> String {
    format!(
        "{}\n{}\n{}",
        BOXED_INSTRUCTION,
        q.stem,
        format_options(&q.options)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn yes_no_maybe() -> McqQuestion {
        McqQuestion::new("p1", "Is it?", &["yes", "no", "maybe"], 'A', "PubMedQA")
    }

    #[test]
    fn options_block_matches_reference_layout() {
        assert_eq!(
            format_options(&yes_no_maybe().options),
            "A. yes\nB. no\nC. maybe"
        );
    }

    #[test]
    fn single_and_five_options() {
        let mut one = BTreeMap::new();
        one.insert('A', "x".to_string());
        assert_eq!(format_options(&one), "A. x");
        let q = McqQuestion::new("q", "s", &["a", "b", "c", "d", "e"], 'E', "src");
        let block = format_options(&q.options);
        let letters: String = block.lines().map(|l| l.chars().next().unwrap()).collect();
        assert_eq!(letters, "ABCDE");
    }

    #[test]
    fn prompt_layouts() {
        let q = yes_no_maybe();
        let p = format_prompt(&q, BOXED_INSTRUCTION);
        assert_eq!(
            p,
            "Is it?\nA. yes\nB. no\nC. maybe\nReturn your final response within \\boxed{}."
        );
        assert!(format_prompt(&q, COT_INSTRUCTION).contains("Let's think step by step."));
        let t = format_trace_prompt(&q);
        assert!(t.starts_with("Return your final response within \\boxed{"));
        assert_eq!(
            t,
            "Return your final response within \\boxed{}.\nIs it?\nA. yes\nB. no\nC. maybe"
        );
    }

    #[test]
    fn layouts_differ_only_in_ordering() {
        let q = yes_no_maybe();
        let mut a: Vec<&str> = Vec::new();
        let p = format_prompt(&q, BOXED_INSTRUCTION);
        let t = format_trace_prompt(&q);
        a.extend(p.split('\n'));
        let mut b: Vec<&str> = t.split('\n').collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert_ne!(p, t);
    }

    #[test]
    fn empty_stem_begins_with_newline() {
        let mut q = yes_no_maybe();
        q.stem.clear();
        assert!(format_prompt(&q, BOXED_INSTRUCTION).starts_with("\nA. yes"));
    }

    #[test]
    fn options_parse_back_from_trace_prompt() {
        let q = McqQuestion::new("q", "stem", &["alpha", "beta", "gamma", "delta"], 'B', "s");
        let t = format_trace_prompt(&q);
        let block = t.splitn(3, '\n').nth(2).unwrap();
        assert_eq!(parse_options(block).unwrap(), q.options);
    }

    #[test]
    fn validation() {
        assert!(yes_no_maybe().validate().is_ok());
        let mut q = yes_no_maybe();
        q.gold = 'D';
        assert!(matches!(q.validate(), Err(QuestionError::GoldNotAnOption { .. })));
        let mut q = yes_no_maybe();
        q.options.remove(&'B');
        assert!(matches!(q.validate(), Err(QuestionError::NonConsecutive { .. })));
        let q = McqQuestion::new("q", "s", &["only"], 'A', "s");
        assert!(matches!(q.validate(), Err(QuestionError::TooFewOptions { .. })));
        let qs = vec![yes_no_maybe(), yes_no_maybe()];
        assert_eq!(
            validate_dataset(&qs),
            Err(QuestionError::DuplicateId("p1".into()))
        );
    }

    #[test]
    fn json_schema() {
        let line = r#"{"id":"q1","question":"Stem?","options":{"A":"x","B":"y"},"answer":"B","source":"MedQA","domains":["Drug Therapy"]}"#;
        let q: McqQuestion = serde_json::from_str(line).unwrap();
        assert_eq!(q.gold, 'B');
        assert_eq!(q.options[&'A'], "x");
        assert_eq!(serde_json::to_string(&q).unwrap(), line);
        let no_domains = r#"{"id":"q1","question":"S","options":{"A":"x","B":"y"},"answer":"A","source":"s"}"#;
        assert!(serde_json::from_str::<McqQuestion>(no_domains).unwrap().domains.is_empty());
        let typo = r#"{"id":"q1","questoin":"S","options":{"A":"x","B":"y"},"answer":"A","source":"s"}"#;
        assert!(serde_json::from_str::<McqQuestion>(typo).is_err());
    }
}
