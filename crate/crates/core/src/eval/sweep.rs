//! Accuracy as a function of thinking budget or forcing count.

use serde::{Deserialize, Serialize};

use super::ols::{fit_linear_with_ci, FitError, RegressionFit};
use super::{evaluate, score, summarize, EvalError, EvalOptions, EvalRun};
use crate::budget::{reelicit_answer, run_with_budget, truncate_to_budget, BudgetPolicy};
use crate::client::Backend;
use crate::pool::parallel_map;
use crate::prompt::{format_prompt, McqQuestion};

pub const DEFAULT_BUDGET_GRID: [usize; 5] = [512, 1024, 2048, 4096, 8192];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    ThinkingBudget,
    ForcingCount,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            Self::ThinkingBudget => "Thinking budget (tokens)",
            Self::ForcingCount => "Forcing count",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x: usize,
    pub n: usize,
    pub correct: usize,
    /// Fraction in [0, 1].
    pub accuracy: f64,
    pub mean_thinking_tokens: f64,
    pub failures: usize,
}

impl SweepPoint {
    fn of(x: usize, run: &EvalRun) -> Self {
        Self {
            x,
            n: run.n,
            correct: run.correct,
            accuracy: run.accuracy,
            mean_thinking_tokens: run.mean_thinking_tokens,
            failures: run.failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub dataset: String,
    pub axis: SweepAxis,
    /// Ascending in `x`.
    pub points: Vec<SweepPoint>,
    /// Full per-point runs, parallel to `points`.
    #[serde(skip)]
    pub runs: Vec<EvalRun>,
}

fn check_grid(grid: &[usize], min: usize) -> Result<Vec<usize>, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::InvalidSweep("empty grid".into()));
    }
    let mut g = grid.to_vec();
    g.sort_unstable();
    if g.windows(2).any(|w| w[0] == w[1]) {
        return Err(EvalError::InvalidSweep("grid values must be distinct".into()));
    }
    if g[0] < min {
        return Err(EvalError::InvalidSweep(format!("grid values must be >= {min}")));
    }
    Ok(g)
}

/// Full evaluation at each thinking budget. Forcing settings come from
/// `template`.
pub fn budget_sweep<B: Backend + ?Sized>(
    dataset: &str,
    questions: &[McqQuestion],
    backend: &B,
    budgets: &[usize],
    template: &BudgetPolicy,
    opts: &EvalOptions,
) -> Result<SweepResult, EvalError> {
    let grid = check_grid(budgets, 1)?;
    let mut points = Vec::new();
    let mut runs = Vec::new();
    for b in grid {
        let policy = template.clone().with_budget(b);
        let run = evaluate(dataset, questions, backend, &policy, opts)?;
        log::info!("{dataset} budget {b}: {}/{}", run.correct, run.n);
        points.push(SweepPoint::of(b, &run));
        runs.push(run);
    }
    Ok(SweepResult {
        dataset: dataset.to_owned(),
        axis: SweepAxis::ThinkingBudget,
        points,
        runs,
    })
}

/// Fast approximation of [`budget_sweep`]: one run at the largest budget,
/// then each smaller budget truncates that transcript and re-elicits the
/// answer only when a cut happened. Matches the full sweep when the model
/// is deterministic and its reasoning does not depend on the budget.
pub fn budget_sweep_truncated<B: Backend + ?Sized>(
    dataset: &str,
    questions: &[McqQuestion],
    backend: &B,
    budgets: &[usize],
    template: &BudgetPolicy,
    opts: &EvalOptions,
) -> Result<SweepResult, EvalError> {
    let grid = check_grid(budgets, 1)?;
    if questions.is_empty() {
        return Err(EvalError::EmptyDataset(dataset.to_owned()));
    }
    let top = template.clone().with_budget(*grid.last().expect("nonempty"));
    top.validate()?;
    let mut order: Vec<&McqQuestion> = questions.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    let full = parallel_map(&order, opts.workers, |q| {
        let prompt = format_prompt(q, &opts.instruction);
        opts.retry.run(|| run_with_budget(&prompt, &top, backend))
    });

    let mut points = Vec::new();
    let mut runs = Vec::new();
    for &b in &grid {
        let policy = template.clone().with_budget(b);
        let jobs: Vec<_> = order.iter().zip(&full).collect();
        let scored = parallel_map(&jobs, opts.workers, |(q, base)| {
            let r = match base {
                Ok(tr) if tr.thinking_tokens > b => {
                    let cut = truncate_to_budget(tr, b);
                    let prompt = format_prompt(q, &opts.instruction);
                    opts.retry.run(|| reelicit_answer(&prompt, &policy, backend, &cut))
                }
                Ok(tr) => Ok(tr.clone()),
                Err(e) => Err(e.clone()),
            };
            score(q, r)
        });
        let (outcomes, transcripts): (Vec<_>, Vec<_>) = scored.into_iter().unzip();
        let run = summarize(dataset, outcomes, transcripts);
        points.push(SweepPoint::of(b, &run));
        runs.push(run);
    }
    Ok(SweepResult {
        dataset: dataset.to_owned(),
        axis: SweepAxis::ThinkingBudget,
        points,
        runs,
    })
}

/// Evaluates forcing counts `0..=max_forcings` at the template's thinking
/// budget and per-forcing cap.
pub fn forcing_sweep<B: Backend + ?Sized>(
    dataset: &str,
    questions: &[McqQuestion],
    backend: &B,
    max_forcings: usize,
    template: &BudgetPolicy,
    opts: &EvalOptions,
) -> Result<SweepResult, EvalError> {
    let mut points = Vec::new();
    let mut runs = Vec::new();
    for k in 0..=max_forcings {
        let policy = template.clone().with_forcing(k);
        let run = evaluate(dataset, questions, backend, &policy, opts)?;
        log::info!("{dataset} forcing {k}: {}/{}", run.correct, run.n);
        points.push(SweepPoint::of(k, &run));
        runs.push(run);
    }
    Ok(SweepResult {
        dataset: dataset.to_owned(),
        axis: SweepAxis::ForcingCount,
        points,
        runs,
    })
}

/// Linear fit of accuracy (percent) against the sweep variable.
pub fn fit_sweep(sweep: &SweepResult) -> Result<RegressionFit, FitError> {
    let pts: Vec<(f64, f64)> = sweep
        .points
        .iter()
        .map(|p| (p.x as f64, p.accuracy * 100.0))
        .collect();
    fit_linear_with_ci(&pts)
}
