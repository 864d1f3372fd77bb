//! Evaluation-set decontamination by word n-gram overlap, plus exact
//! deduplication on normalized stems.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::report::{StageKind, StageRow};
use crate::prompt::McqQuestion;

pub const STAGE_NAME: &str = "Decontamination & deduplication";
pub const DEFAULT_NGRAM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecontamConfig {
    /// Window size in words.
    pub ngram: usize,
}

impl Default for DecontamConfig {
    fn default() -> Self {
        Self { ngram: DEFAULT_NGRAM }
    }
}

/// Lowercase, drop punctuation and symbols, collapse whitespace.
pub fn normalize(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Word windows of a normalized text. Texts shorter than `n` words form a
/// single window of all their words so short items can still collide.
fn windows(norm: &str, n: usize) -> Vec<String> {
    let words: Vec<&str> = norm.split(' ').filter(|w| !w.is_empty()).collect();
    if words.is_empty() {
        return Vec::new();
    }
    if words.len() < n {
        return vec![words.join(" ")];
    }
    words.windows(n).map(|w| w.join(" ")).collect()
}

/// N-gram index over evaluation stems.
#[derive(Debug, Clone, Default)]
pub struct EvalIndex {
    n: usize,
    grams: HashSet<String>,
}

impl EvalIndex {
    pub fn build<'a, I>(eval_stems: I, cfg: DecontamConfig) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let n = cfg.ngram.max(1);
        let grams = eval_stems
            .into_iter()
            .flat_map(|s| windows(&normalize(s), n))
            .collect();
        Self { n, grams }
    }

    pub fn from_sets(eval_sets: &[Vec<McqQuestion>], cfg: DecontamConfig) -> Self {
        Self::build(
            eval_sets.iter().flatten().map(|q| q.stem.as_str()),
            cfg,
        )
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn overlaps(&self, text: &str) -> bool {
        windows(&normalize(text), self.n)
            .iter()
            .any(|g| self.grams.contains(g))
    }
}

/// Splits `pool` into (clean, contaminated).
pub fn remove_eval_overlap(
    pool: &[McqQuestion],
    index: &EvalIndex,
) -> (Vec<McqQuestion>, Vec<McqQuestion>) {
    pool.iter().cloned().partition(|q| !index.overlaps(&q.stem))
}

/// Keeps the first item of each normalized-stem group, in pool order.
pub fn deduplicate(pool: &[McqQuestion]) -> Vec<McqQuestion> {
    let mut seen = HashSet::with_capacity(pool.len());
    pool.iter()
        .filter(|q| seen.insert(normalize(&q.stem)))
        .cloned()
        .collect()
}

pub fn decontaminate(
    pool: &[McqQuestion],
    eval_sets: &[Vec<McqQuestion>],
    cfg: DecontamConfig,
) -> (Vec<McqQuestion>, StageRow) {
    let index = EvalIndex::from_sets(eval_sets, cfg);
    let (clean, dropped) = remove_eval_overlap(pool, &index);
    if !dropped.is_empty() {
        log::info!("{} items overlap evaluation sets", dropped.len());
    }
    let clean = deduplicate(&clean);
    let row = StageRow::from_sources(
        STAGE_NAME,
        StageKind::Filter,
        clean.iter().map(|q| q.source.as_str()),
    );
    (clean, row)
}
