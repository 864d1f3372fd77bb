//! Reasoning-trace records: generation against a teacher backend and
//! validation against the gold answer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::report::{StageKind, StageRow};
use crate::client::{generate, Backend, GenerationRequest, RetryPolicy, TRACE_TOKEN_LIMIT};
use crate::extract::{extract_answer, Choices};
use crate::pool::parallel_map;
use crate::prompt::{format_trace_prompt, Letter, McqQuestion};

pub const STAGE_NAME: &str = "Generating thinking data";

/// A question with a generated reasoning trace and final response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TraceRepr", into = "TraceRepr")]
pub struct TraceRecord {
    pub question: McqQuestion,
    pub thinking: String,
    pub response: String,
    pub extracted: Option<Letter>,
    pub verified: bool,
}

impl TraceRecord {
    /// Extracts the answer from `response` and sets `verified`.
    pub fn new(question: McqQuestion, thinking: String, response: String) -> Self {
        let extracted = extract_answer(&response, &Choices::of(&question)).letter;
        let verified = extracted == Some(question.gold);
        Self {
            question,
            thinking,
            response,
            extracted,
            verified,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceRepr {
    id: String,
    question: String,
    options: BTreeMap<Letter, String>,
    answer: Letter,
    source: String,
    #[serde(default)]
    domains: Vec<String>,
    thinking: String,
    response: String,
    extracted: Option<Letter>,
    verified: bool,
}

impl TryFrom<TraceRepr> for TraceRecord {
    type Error = String;

    fn try_from(r: TraceRepr) -> Result<Self, String> {
        let rec = TraceRecord {
            question: McqQuestion {
                id: r.id,
                stem: r.question,
                options: r.options,
                gold: r.answer,
                source: r.source,
                domains: r.domains,
            },
            thinking: r.thinking,
            response: r.response,
            extracted: r.extracted,
            verified: r.verified,
        };
        if rec.verified != (rec.extracted == Some(rec.question.gold)) {
            return Err(format!(
                "record {}: verified={} disagrees with extracted={:?} vs answer={:?}",
                rec.question.id, rec.verified, rec.extracted, rec.question.gold
            ));
        }
        Ok(rec)
    }
}

impl From<TraceRecord> for TraceRepr {
    fn from(t: TraceRecord) -> Self {
        TraceRepr {
            id: t.question.id,
            question: t.question.stem,
            options: t.question.options,
            answer: t.question.gold,
            source: t.question.source,
            domains: t.question.domains,
            thinking: t.thinking,
            response: t.response,
            extracted: t.extracted,
            verified: t.verified,
        }
    }
}

/// Keeps records whose extracted answer equals the gold letter.
pub fn validate_traces(records: &[TraceRecord]) -> (Vec<TraceRecord>, StageRow) {
    let kept: Vec<TraceRecord> = records
        .iter()
        .filter(|r| r.extracted == Some(r.question.gold))
        .cloned()
        .collect();
    let row = StageRow::from_sources(
        STAGE_NAME,
        StageKind::Filter,
        kept.iter().map(|r| r.question.source.as_str()),
    );
    (kept, row)
}

#[derive(Debug, Clone)]
pub struct TraceOptions {
    pub workers: usize,
    pub max_new_tokens: usize,
    /// Separates thinking from the response in teacher output. Output
    /// without it is treated as all response.
    pub think_close: String,
    pub temperature: f64,
    pub seed: u64,
    pub retry: RetryPolicy,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            workers: 8,
            max_new_tokens: TRACE_TOKEN_LIMIT,
            think_close: "</think>".to_owned(),
            temperature: crate::client::DEFAULT_TEMPERATURE,
            seed: crate::client::DEFAULT_SEED,
            retry: RetryPolicy::default(),
        }
    }
}

/// Generates one trace per question with the trace-generation prompt.
/// Questions whose generation fails after retries are skipped with a
/// warning.
pub fn generate_traces(
    pool: &[McqQuestion],
    teacher: &dyn Backend,
    opts: &TraceOptions,
) -> Vec<TraceRecord> {
    let results = parallel_map(pool, opts.workers, |q| {
        let req = GenerationRequest::new(format_trace_prompt(q), opts.max_new_tokens)
            .with_sampling(opts.temperature, opts.seed);
        opts.retry.run(|| generate(teacher, &req)).map(|c| {
            let text = c.text();
            let (thinking, response) = match text.split_once(&opts.think_close) {
                Some((t, r)) => (t.trim().to_owned(), r.trim().to_owned()),
                None => (String::new(), text.trim().to_owned()),
            };
            let thinking = thinking.strip_prefix("<think>").unwrap_or(&thinking).trim().to_owned();
            TraceRecord::new(q.clone(), thinking, response)
        })
    });
    pool.iter()
        .zip(results)
        .filter_map(|(q, r)| match r {
            Ok(rec) => Some(rec),
            Err(e) => {
                log::warn!("trace generation failed for {}: {e}", q.id);
                None
            }
        })
        .collect()
}
