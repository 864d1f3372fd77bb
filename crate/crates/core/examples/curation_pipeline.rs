//! The full curation pipeline on a small in-memory pool: difficulty
//! filtering with two graders, trace generation and validation,
//! decontamination, domain annotation, diversity sampling and SFT
//! formatting. Prints the stage ledger at the end.

use std::collections::BTreeMap;

use ttscale::client::{Backend, RetryPolicy, ScriptEntry, ScriptedModel, Trigger};
use ttscale::curation::{
    annotate_domains, decontaminate, difficulty_filter, diversity_sample, format_sft_example,
    generate_traces, validate_traces, CurationReport, DecontamConfig, GradeOptions, Lexicon,
    SamplingPlan, StageKind, StageRow, TraceOptions, COLLECTION_STAGE,
};
use ttscale::prompt::McqQuestion;

const TOPICS: [&str; 4] = ["cardiac murmur", "renal clearance", "thyroid nodule", "septic shock"];

fn pool() -> Vec<McqQuestion> {
    let mut out = Vec::new();
    for (s, source) in ["BoardPrep", "ClinicalQA"].iter().enumerate() {
        for i in 0..24 {
            // Every third item is easy enough for the graders.
            let level = if i % 3 == 0 { "easy" } else { "hard" };
            let topic = TOPICS[(i + s) % TOPICS.len()];
            let tricky = if i % 7 == 5 { " tricky" } else { "" };
            out.push(McqQuestion::new(
                format!("{source}-{i:02}"),
                format!("A {level}{tricky} case {i} from {source} about a {topic}: what is the next step?"),
                &["Observe", "Image", "Refer", "Treat"],
                'D',
                *source,
            ));
        }
    }
    out
}

fn main() {
    let pool = pool();
    let mut report = CurationReport::new();
    report.push(StageRow::from_sources(COLLECTION_STAGE, StageKind::Collection, pool.iter().map(|q| q.source.as_str())));

    // Regex triggers are anchored at the end of the prompt.
    let grader = |hit: &str| {
        ScriptedModel::new(vec![
            ScriptEntry::new(Trigger::regex(&format!("(?s)(?:{hit}).*")).unwrap(), "\\boxed{D}", None),
            ScriptEntry::new(Trigger::Any, "\\boxed{A}", None),
        ])
    };
    let small = grader(r"A easy case");
    let large = grader(r"A easy case|case 1\d ");
    let graders: [&dyn Backend; 2] = [&small, &large];
    let grade = GradeOptions { retry: RetryPolicy::immediate(), ..Default::default() };
    let (hard, row, _) = difficulty_filter(&pool, &graders, &grade);
    report.record(row, hard.len()).unwrap();

    let teacher = ScriptedModel::new(vec![
        ScriptEntry::new(Trigger::regex("(?s)tricky.*").unwrap(), "<think> Looks benign, watch first. </think> \\boxed{A}", None),
        ScriptEntry::new(Trigger::Any, "<think> Unstable findings call for treatment now. </think> The answer is \\boxed{D}", None),
    ]);
    let traces = generate_traces(&hard, &teacher, &TraceOptions { retry: RetryPolicy::immediate(), ..Default::default() });
    let (verified, row) = validate_traces(&traces);
    report.record(row, verified.len()).unwrap();

    let questions: Vec<McqQuestion> = verified.iter().map(|t| t.question.clone()).collect();
    let held_out = vec![McqQuestion::new("eval-1", &questions[0].stem, &["x", "y"], 'A', "Benchmark")];
    let (clean, row) = decontaminate(&questions, &[held_out], DecontamConfig::default());
    report.record(row, clean.len()).unwrap();

    let terms: BTreeMap<String, String> = [
        ("murmur", "Cardiology"),
        ("renal", "Nephrology"),
        ("thyroid", "Endocrinology"),
        ("septic", "Infectious disease"),
    ]
    .into_iter()
    .map(|(t, q)| (t.to_owned(), q.to_owned()))
    .collect();
    let labelled = annotate_domains(&clean, &Lexicon::new(&terms).unwrap());

    let plan = SamplingPlan::from_questions(&labelled, 8, 42);
    let sample = diversity_sample(&plan).unwrap();
    report.push(sample.row.clone());

    println!("{}", report.render_table());
    report.validate().expect("consistent ledger");

    let first = verified.iter().find(|t| t.question.id == sample.ids[0]).unwrap();
    println!("first SFT example:\n{}", format_sft_example(first).unwrap().text);
}
