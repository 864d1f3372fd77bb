//! Lexicon-based domain labelling of question stems.

use std::collections::{BTreeMap, BTreeSet};

use regex::{Regex, RegexBuilder};

use crate::prompt::McqQuestion;

/// Label for items no lexicon term matches.
pub const UNLABELED: &str = "Unlabeled";

/// Term → qualifier map compiled into word-boundary matchers.
#[derive(Debug, Clone)]
pub struct Lexicon {
    rules: Vec<(Regex, String)>,
}

impl Lexicon {
    pub fn new(terms: &BTreeMap<String, String>) -> Result<Self, regex::Error> {
        let rules = terms
            .iter()
            .filter(|(t, _)| !t.trim().is_empty())
            .map(|(term, qualifier)| {
                let re = RegexBuilder::new(&format!(r"\b{}\b", regex::escape(term.trim())))
                    .case_insensitive(true)
                    .build()?;
                Ok((re, qualifier.clone()))
            })
            .collect::<Result<Vec<_>, regex::Error>>()?;
        Ok(Self { rules })
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Sorted, de-duplicated qualifiers for `text`, or `[Unlabeled]`.
    pub fn label(&self, text: &str) -> Vec<String> {
        let hits: BTreeSet<&str> = self
            .rules
            .iter()
            .filter(|(re, _)| re.is_match(text))
            .map(|(_, q)| q.as_str())
            .collect();
        if hits.is_empty() {
            vec![UNLABELED.to_owned()]
        } else {
            hits.into_iter().map(str::to_owned).collect()
        }
    }
}

/// Replaces each question's domains with the lexicon labels of its stem.
pub fn annotate_domains(questions: &[McqQuestion], lexicon: &Lexicon) -> Vec<McqQuestion> {
    questions
        .iter()
        .map(|q| McqQuestion {
            domains: lexicon.label(&q.stem),
            ..q.clone()
        })
        .collect()
}
