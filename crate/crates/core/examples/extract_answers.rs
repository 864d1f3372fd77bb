//! Answer extraction on a few typical model responses.

use ttscale::extract::{extract_answer, Choices, FALLBACK_CASCADE};

fn main() {
    let choices = Choices::letters(&['A', 'B', 'C', 'D']);
    let responses = [
        "The lesion is in the medulla. \\boxed{C}",
        "First guess \\boxed{A}, though later I wrote \\boxed{D}.",
        "\\boxed{\\text{B}}",
        "Weighing everything, the answer is D",
        "Answer: B",
        "answer: b (letters must be uppercase)",
        "I would pick option A here.",
        "Between the two, it has to be (C).",
        "I cannot decide.",
    ];
    println!("fallback cascade: {}", FALLBACK_CASCADE.iter().map(|p| p.name).collect::<Vec<_>>().join(" > "));
    for text in responses {
        let out = extract_answer(text, &choices);
        println!("{:<60} -> {:?} ({:?}{})", text, out.letter, out.method, out.pattern.map(|p| format!(", {p}")).unwrap_or_default());
    }
}
