//! Accuracy against thinking budget on a synthetic dataset whose scripted
//! model only gets the answer right after enough reasoning.

use ttscale::budget::{BudgetPolicy, ANSWER_MARKER, DEFAULT_ANSWER_CUE, THINK_MARKER};
use ttscale::client::{RetryPolicy, ScriptEntry, ScriptedModel, Trigger};
use ttscale::eval::{budget_sweep, budget_sweep_truncated, EvalOptions, DEFAULT_BUDGET_GRID};
use ttscale::prompt::McqQuestion;

fn main() {
    let questions: Vec<McqQuestion> = (0..20)
        .map(|i| McqQuestion::new(format!("q{i:02}"), format!("Synthetic question {i}?"), &["no", "yes"], 'B', "synthetic"))
        .collect();
    // Questions with an even index need 1000 thinking tokens, odd ones 3000.
    let chain = (1..=5000).map(|i| format!("step{i}")).collect::<Vec<_>>().join(" ");
    let model = ScriptedModel::new(vec![
        ScriptEntry::new(Trigger::regex(&format!(r"(?s)question \d*[02468]\?.*\bstep1000\b.*{DEFAULT_ANSWER_CUE}")).unwrap(), "\\boxed{B}", None),
        ScriptEntry::new(Trigger::regex(&format!(r"(?s)\bstep3000\b.*{DEFAULT_ANSWER_CUE}")).unwrap(), "\\boxed{B}", None),
        ScriptEntry::new(Trigger::suffix(DEFAULT_ANSWER_CUE), "\\boxed{A}", None),
        ScriptEntry::new(Trigger::suffix(THINK_MARKER), &chain, Some(ANSWER_MARKER)),
    ]);
    let opts = EvalOptions { retry: RetryPolicy::immediate(), ..Default::default() };
    let policy = BudgetPolicy::default();

    let full = budget_sweep("synthetic", &questions, &model, &DEFAULT_BUDGET_GRID, &policy, &opts).unwrap();
    let fast = budget_sweep_truncated("synthetic", &questions, &model, &DEFAULT_BUDGET_GRID, &policy, &opts).unwrap();
    println!("{:>7} {:>9} {:>9} {:>12}", "budget", "full", "truncated", "mean tokens");
    for (a, b) in full.points.iter().zip(&fast.points) {
        println!("{:>7} {:>8.1}% {:>8.1}% {:>12.1}", a.x, a.accuracy * 100.0, b.accuracy * 100.0, a.mean_thinking_tokens);
    }
}
