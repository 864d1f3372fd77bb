//! Keep only questions that every grader model gets wrong.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::report::{StageKind, StageRow};
use crate::client::{probe_answer, Backend, RetryPolicy, DEFAULT_SEED, DEFAULT_TEMPERATURE};
use crate::extract::{extract_answer, grade, Choices};
use crate::pool::parallel_map;
use crate::prompt::{format_prompt, McqQuestion, BOXED_INSTRUCTION};

pub const STAGE_NAME: &str = "After difficulty filtering";

/// Recorded grader outcomes for one question: `correct[g]` is grader `g`'s
/// verdict. A hard failure is recorded as `false`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub id: String,
    pub correct: Vec<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct GradeOptions {
    pub workers: usize,
    pub max_new_tokens: usize,
    pub temperature: f64,
    pub seed: u64,
    pub instruction: String,
    pub retry: RetryPolicy,
}

impl Default for GradeOptions {
    fn default() -> Self {
        Self {
            workers: 8,
            max_new_tokens: 2048,
            temperature: DEFAULT_TEMPERATURE,
            seed: DEFAULT_SEED,
            instruction: BOXED_INSTRUCTION.to_owned(),
            retry: RetryPolicy::default(),
        }
    }
}

/// Asks every grader every question. Output is in pool order.
pub fn grade_pool(
    pool: &[McqQuestion],
    graders: &[&dyn Backend],
    opts: &GradeOptions,
) -> Vec<VerdictRow> {
    parallel_map(pool, opts.workers, |q| {
        let prompt = format_prompt(q, &opts.instruction);
        let choices = Choices::of(q);
        let mut row = VerdictRow {
            id: q.id.clone(),
            correct: Vec::with_capacity(graders.len()),
            failed: Vec::new(),
        };
        for (g, grader) in graders.iter().enumerate() {
            let reply = opts.retry.run(|| {
                probe_answer(*grader, &prompt, opts.max_new_tokens, opts.temperature, opts.seed)
            });
            match reply {
                Ok(text) => row.correct.push(grade(&extract_answer(&text, &choices), q.gold)),
                Err(e) => {
                    log::warn!("grader {g} failed on {}: {e}; counted as incorrect", q.id);
                    row.correct.push(false);
                    row.failed.push(g);
                }
            }
        }
        row
    })
}

/// Applies recorded verdicts. Questions without a verdict row are dropped
/// with a warning.
pub fn filter_by_verdicts(
    pool: &[McqQuestion],
    verdicts: &[VerdictRow],
) -> (Vec<McqQuestion>, StageRow) {
    let by_id: HashMap<&str, &VerdictRow> = verdicts.iter().map(|v| (v.id.as_str(), v)).collect();
    let kept: Vec<McqQuestion> = pool
        .iter()
        .filter(|q| match by_id.get(q.id.as_str()) {
            Some(v) => !v.correct.is_empty() && v.correct.iter().all(|&c| !c),
            None => {
                log::warn!("no verdicts for {}; dropped", q.id);
                false
            }
        })
        .cloned()
        .collect();
    let row = StageRow::from_sources(
        STAGE_NAME,
        StageKind::Filter,
        kept.iter().map(|q| q.source.as_str()),
    );
    (kept, row)
}

pub fn difficulty_filter(
    pool: &[McqQuestion],
    graders: &[&dyn Backend],
    opts: &GradeOptions,
) -> (Vec<McqQuestion>, StageRow, Vec<VerdictRow>) {
    let verdicts = grade_pool(pool, graders, opts);
    let (kept, row) = filter_by_verdicts(pool, &verdicts);
    (kept, row, verdicts)
}
