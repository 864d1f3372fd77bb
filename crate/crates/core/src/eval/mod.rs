//! Accuracy evaluation over multiple-choice datasets, budget and forcing
//! sweeps, linear scaling fits and plot emission.

mod ols;
mod plot;
mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::{run_with_budget, BudgetError, BudgetPolicy, ReasoningTranscript, Termination};
use crate::client::{Backend, RetryPolicy};
use crate::extract::{extract_answer, grade, Choices, Method};
use crate::pool::parallel_map;
use crate::prompt::{format_prompt, Letter, McqQuestion, BOXED_INSTRUCTION};

pub use ols::{fit_linear_with_ci, FitError, RegressionFit, CONFIDENCE};
pub use plot::{emit_plot, PlotError, PlotFormat, CSV_HEADER};
pub use sweep::{
    budget_sweep, budget_sweep_truncated, fit_sweep, forcing_sweep, SweepAxis, SweepPoint,
    SweepResult, DEFAULT_BUDGET_GRID,
};

pub const DEFAULT_WORKERS: usize = 8;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset {0:?} is empty")]
    EmptyDataset(String),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Policy(#[from] BudgetError),
    #[error("macro average needs at least one dataset")]
    NoDatasets,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub workers: usize,
    pub retry: RetryPolicy,
    pub instruction: String,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            workers: DEFAULT_WORKERS,
            retry: RetryPolicy::default(),
            instruction: BOXED_INSTRUCTION.to_owned(),
        }
    }
}

/// Per-question result. The transcript is stored separately under the same
/// id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub id: String,
    pub gold: Letter,
    pub extracted: Option<Letter>,
    pub method: Method,
    pub correct: bool,
    pub thinking_tokens: usize,
    pub injections: usize,
    pub termination: Option<Termination>,
    /// Set when generation failed after retries; such questions count as
    /// incorrect.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub dataset: String,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub mean_thinking_tokens: f64,
    pub failures: usize,
    /// Sorted by question id.
    pub outcomes: Vec<EvalOutcome>,
    pub transcripts: Vec<ReasoningTranscript>,
}

fn score(q: &McqQuestion, result: Result<ReasoningTranscript, BudgetError>) -> (EvalOutcome, ReasoningTranscript) {
    match result {
        Ok(mut tr) => {
            tr.id = q.id.clone();
            let ext = extract_answer(&tr.answer_text, &Choices::of(q));
            let outcome = EvalOutcome {
                id: q.id.clone(),
                gold: q.gold,
                extracted: ext.letter,
                method: ext.method,
                correct: grade(&ext, q.gold),
                thinking_tokens: tr.thinking_tokens,
                injections: tr.injections,
                termination: Some(tr.termination),
                error: None,
            };
            (outcome, tr)
        }
        Err(e) => {
            log::warn!("question {} failed: {e}; counted as incorrect", q.id);
            let mut tr = e.partial().cloned().unwrap_or_else(|| ReasoningTranscript {
                id: String::new(),
                segments: Vec::new(),
                injections: 0,
                thinking_tokens: 0,
                answer_text: String::new(),
                termination: Termination::Natural,
                empty_answer: false,
            });
            tr.id = q.id.clone();
            let outcome = EvalOutcome {
                id: q.id.clone(),
                gold: q.gold,
                extracted: None,
                method: Method::None,
                correct: false,
                thinking_tokens: tr.thinking_tokens,
                injections: tr.injections,
                termination: None,
                error: Some(e.to_string()),
            };
            (outcome, tr)
        }
    }
}

/// Runs every question through the budget controller and grades the
/// answer. Results are merged in question-id order.
pub fn evaluate<B: Backend + ?Sized>(
    dataset: &str,
    questions: &[McqQuestion],
    backend: &B,
    policy: &BudgetPolicy,
    opts: &EvalOptions,
) -> Result<EvalRun, EvalError> {
    if questions.is_empty() {
        return Err(EvalError::EmptyDataset(dataset.to_owned()));
    }
    policy.validate()?;
    let mut order: Vec<&McqQuestion> = questions.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    let results = parallel_map(&order, opts.workers, |q| {
        let prompt = format_prompt(q, &opts.instruction);
        let r = opts.retry.run(|| run_with_budget(&prompt, policy, backend));
        score(q, r)
    });
    let (outcomes, transcripts): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(summarize(dataset, outcomes, transcripts))
}

fn summarize(dataset: &str, outcomes: Vec<EvalOutcome>, transcripts: Vec<ReasoningTranscript>) -> EvalRun {
    let n = outcomes.len();
    let correct = outcomes.iter().filter(|o| o.correct).count();
    let failures = outcomes.iter().filter(|o| o.error.is_some()).count();
    let tokens: usize = outcomes.iter().map(|o| o.thinking_tokens).sum();
    EvalRun {
        dataset: dataset.to_owned(),
        n,
        correct,
        accuracy: correct as f64 / n as f64,
        mean_thinking_tokens: tokens as f64 / n as f64,
        failures,
        outcomes,
        transcripts,
    }
}

/// Unweighted mean of per-dataset accuracies (in percent), rounded to two
/// decimals.
pub fn macro_average(per_dataset: &[f64]) -> Result<f64, EvalError> {
    if per_dataset.is_empty() {
        return Err(EvalError::NoDatasets);
    }
    let mean = per_dataset.iter().sum::<f64>() / per_dataset.len() as f64;
    Ok(round2(mean))
}

/// Question-count weighted mean of `(accuracy, n)` pairs, rounded to two
/// decimals. Not used for headline numbers.
pub fn weighted_average(per_dataset: &[(f64, usize)]) -> Result<f64, EvalError> {
    let total: usize = per_dataset.iter().map(|&(_, n)| n).sum();
    if total == 0 {
        return Err(EvalError::NoDatasets);
    }
    let sum: f64 = per_dataset.iter().map(|&(a, n)| a * n as f64).sum();
    Ok(round2(sum / total as f64))
}

pub(crate) fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}
