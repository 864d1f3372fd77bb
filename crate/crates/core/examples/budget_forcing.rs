//! Runs one question under a thinking budget, then again with budget
//! forcing, against a scripted model. Prints each reasoning segment.

use ttscale::budget::{run_with_budget, BudgetPolicy, ANSWER_MARKER, DEFAULT_ANSWER_CUE, DEFAULT_FORCING_TEXT, THINK_MARKER};
use ttscale::client::{ScriptEntry, ScriptedModel, Trigger};
use ttscale::extract::{extract_answer, Choices};
use ttscale::prompt::{format_prompt, McqQuestion, BOXED_INSTRUCTION};

fn main() {
    let q = McqQuestion::new(
        "demo-1",
        "Which nerve is most at risk in a fracture of the surgical neck of the humerus?",
        &["Radial", "Axillary", "Ulnar", "Median"],
        'B',
        "demo",
    );
    let model = ScriptedModel::new(vec![
        ScriptEntry::new(Trigger::suffix(DEFAULT_ANSWER_CUE), "\\boxed{B}", None),
        ScriptEntry::new(
            Trigger::suffix(DEFAULT_FORCING_TEXT),
            " The axillary nerve wraps the surgical neck, so it stays my answer.",
            Some(ANSWER_MARKER),
        ),
        ScriptEntry::new(
            Trigger::suffix(THINK_MARKER),
            " The surgical neck sits below the tubercles. The axillary nerve and posterior circumflex humeral artery run there.",
            Some(ANSWER_MARKER),
        ),
    ]);
    let prompt = format_prompt(&q, BOXED_INSTRUCTION);

    for (label, policy) in [
        ("budget 8, no forcing", BudgetPolicy::default().with_budget(8)),
        ("budget 4096, one forcing", BudgetPolicy::default().with_forcing(1)),
    ] {
        let tr = run_with_budget(&prompt, &policy, &model).expect("scripted run");
        println!("== {label}: {} thinking tokens, {:?}", tr.thinking_tokens, tr.termination);
        for (i, seg) in tr.segments.iter().enumerate() {
            println!("  segment {i} ({:?}, {} tokens):{}", seg.provenance, seg.len(), seg.text());
        }
        let out = extract_answer(&tr.answer_text, &Choices::of(&q));
        println!("  answer {:?} via {:?}", out.letter, out.method);
    }
}
