mod common;

use std::fs;
use std::path::Path;

use clap::Parser;
use serde_json::Value;
use ttscale::cli::{execute, run, sidecar_path, Cli};
use ttscale::prompt::McqQuestion;

fn argv(args: &[&str]) -> Vec<String> {
    std::iter::once("ttscale").chain(args.iter().copied()).map(String::from).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn dataset(n: usize, source: &str, gold: char) -> Vec<McqQuestion> {
    (0..n)
        .map(|i| {
            McqQuestion::new(
                format!("{source}-{i:03}"),
                format!("{source} question number {i} about the renal system?"),
                &["alpha", "beta", "gamma", "delta"],
                gold,
                source,
            )
        })
        .collect()
}

const THINK_MOCK: &str = r#"{"entries": [
  {"regex": "(?s)\\bt8\\b.*Final Answer:", "emit": "\\boxed{B}"},
  {"suffix": "Final Answer:", "emit": "\\boxed{A}"},
  {"suffix": "<|im_start|>think", "emit": "t1 t2 t3 t4 t5 t6 t7 t8 t9 t10", "terminal": "<|im_start|>answer"}
]}"#;

#[test]
fn sweep_happy_path_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::write(dir.path(), "d.jsonl", &common::questions_jsonl(&dataset(5, "MedQA", 'B')));
    let mock = common::write(dir.path(), "m.json", THINK_MOCK);
    let out = dir.path().join("out");
    let code = run(argv(&[
        "sweep", "--budgets", "4,8,16", "--dataset", s(&data), "--mock", s(&mock), "--out-dir", s(&out),
    ]));
    assert_eq!(code, 0);
    let csv = fs::read_to_string(out.join("budget_sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "x,accuracy,n,ci_low,ci_high");
    assert!(rows[1].starts_with("4,0.0000,5,"));
    assert!(rows[2].starts_with("8,100.0000,5,"));
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("budget_sweep.json")).unwrap()).unwrap();
    assert_eq!(summary["sweep"]["points"][2]["mean_thinking_tokens"], 10.0);
    assert_eq!(summary["provenance"]["config"]["backend"]["seed"], 42);
    let digest = ttscale::io::file_digest(&data).unwrap();
    assert_eq!(summary["provenance"]["inputs"][s(&data)], Value::String(digest));
    assert!(sidecar_path(&out.join("budget_sweep.csv")).exists());
}

#[test]
fn malformed_line_seven_cites_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = common::questions_jsonl(&dataset(6, "MedQA", 'B'));
    text.push_str("{\"id\": \"broken\", \"question\": \n");
    let data = common::write(dir.path(), "d.jsonl", &text);
    let mock = common::write(dir.path(), "m.json", THINK_MOCK);
    let args = argv(&["eval", "--dataset", s(&data), "--mock", s(&mock), "--out-dir", s(dir.path())]);
    let err = execute(&Cli::try_parse_from(&args).unwrap()).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("line 7"), "{err}");
    assert_eq!(run(args), 1);
}

#[test]
fn invalid_question_cites_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut qs = dataset(3, "MedQA", 'B');
    qs[1].gold = 'Q';
    let data = common::write(dir.path(), "d.jsonl", &common::questions_jsonl(&qs));
    let args = argv(&["curate", "dedup", "--input", s(&data), "--out", s(&dir.path().join("o.jsonl"))]);
    let err = execute(&Cli::try_parse_from(&args).unwrap()).unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(argv(&["frobnicate"])), 2);
    assert_eq!(run(argv(&["plot", "--sweep", "x.json", "--format", "png", "--out", "y"])), 2);
    assert_eq!(run(argv(&["sweep"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::write(dir.path(), "c.toml", "[backend]\ntemprature = 0.7\n");
    let args = argv(&["report", "--ledger", "none.json", "--config", s(&cfg)]);
    let err = execute(&Cli::try_parse_from(&args).unwrap()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("temprature"));
}

#[test]
fn missing_input_exits_one() {
    assert_eq!(run(argv(&["report", "--ledger", "/nonexistent/ledger.json"])), 1);
}

#[test]
fn seed_flag_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::write(dir.path(), "d.jsonl", &common::questions_jsonl(&dataset(3, "MedQA", 'B')));
    let mock = common::write(dir.path(), "m.json", THINK_MOCK);
    let cfg = common::write(dir.path(), "c.toml", "[backend]\nseed = 42\n[policy]\nthinking_budget = 8\n");
    let out = dir.path().join("out");
    let code = run(argv(&[
        "eval", "--dataset", s(&data), "--mock", s(&mock), "--config", s(&cfg), "--seed", "7", "--out-dir", s(&out),
    ]));
    assert_eq!(code, 0);
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["provenance"]["config"]["backend"]["seed"], 7);
    assert_eq!(summary["provenance"]["config"]["policy"]["thinking_budget"], 8);
    assert_eq!(summary["datasets"][0]["accuracy"], 100.0);
    assert_eq!(summary["macro_average"], 100.0);
    assert!(out.join("d.transcripts.jsonl").exists());
}

#[test]
fn sample_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut pool = dataset(60, "MedQA", 'A');
    pool.extend(dataset(40, "HeadQA", 'B'));
    for (i, q) in pool.iter_mut().enumerate() {
        q.domains = vec![["Cardiology", "Neurology", "Pharmacology"][i % 3].to_string()];
    }
    let data = common::write(dir.path(), "pool.jsonl", &common::questions_jsonl(&pool));
    let mut outputs = Vec::new();
    for run_no in 0..2 {
        let out = dir.path().join(format!("s{run_no}.jsonl"));
        let code = run(argv(&["curate", "sample", "--n", "30", "--seed", "42", "--input", s(&data), "--out", s(&out)]));
        assert_eq!(code, 0);
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let other = dir.path().join("s9.jsonl");
    run(argv(&["curate", "sample", "--n", "30", "--seed", "9", "--input", s(&data), "--out", s(&other)]));
    assert_ne!(fs::read(&other).unwrap(), outputs[0]);
    assert_eq!(String::from_utf8(outputs[0].clone()).unwrap().lines().count(), 30);
}

#[test]
fn full_curation_pipeline_with_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut pool = dataset(20, "MedQA", 'B');
    pool.extend(dataset(10, "PubMedQA", 'A'));
    // an exact duplicate stem and an evaluation-set leak
    let mut dup = pool[3].clone();
    dup.id = "MedQA-dup".into();
    pool.push(dup);
    let eval = vec![McqQuestion::new(
        "eval-1",
        "PubMedQA question number 4 about the renal system?",
        &["yes", "no"],
        'A',
        "eval",
    )];
    let pool_path = common::write(d, "pool.jsonl", &common::questions_jsonl(&pool));
    let eval_path = common::write(d, "eval.jsonl", &common::questions_jsonl(&eval));
    // graders solve even-numbered questions
    let verdicts: String = pool
        .iter()
        .map(|q| {
            let solved = q.id.ends_with(['0', '2', '4', '6', '8']);
            format!("{{\"id\":\"{}\",\"correct\":[{solved},false]}}\n", q.id)
        })
        .collect();
    let verdict_path = common::write(d, "verdicts.jsonl", &verdicts);
    let teacher = common::write(
        d,
        "teacher.json",
        r#"{"entries":[{"emit":"<think> the tubule reabsorbs </think> \\boxed{B}"}]}"#,
    );
    let ledger = d.join("ledger.json");
    let p = |n: &str| d.join(n);
    let steps: Vec<Vec<&str>> = vec![
        vec!["curate", "filter", "--input", s(&pool_path), "--verdicts", s(&verdict_path)],
        vec!["curate", "generate", "--mock", s(&teacher), "--input"],
        vec!["curate", "validate", "--input"],
        vec!["curate", "decontaminate", "--eval", s(&eval_path), "--input"],
        vec!["curate", "dedup", "--input"],
    ];
    let names = ["hard.jsonl", "traces.jsonl", "verified.jsonl", "clean.jsonl", "m23k.jsonl"];
    let mut prev = String::new();
    let paths: Vec<_> = names.iter().map(|n| p(n)).collect();
    for (i, step) in steps.iter().enumerate() {
        let mut args = step.clone();
        if i > 0 {
            args.push(&prev);
        }
        let out = s(&paths[i]).to_string();
        let mut full = args.clone();
        full.extend(["--out", &out]);
        if i != 1 {
            full.extend(["--report", s(&ledger)]);
        }
        assert_eq!(run(argv(&full)), 0, "step {i}: {full:?}");
        prev = out;
    }
    // Odd-numbered items survive difficulty filtering: 10 MedQA + 5 PubMedQA,
    // plus the duplicate. Only MedQA has gold B, so validation keeps 11.
    // The leaked stem is PubMedQA (gold A) and already gone; dedup drops the
    // duplicate of MedQA-003.
    let report: ttscale::curation::CurationReport =
        serde_json::from_str(&fs::read_to_string(&ledger).unwrap()).unwrap();
    report.validate().unwrap();
    let totals: Vec<(String, usize)> = report.stages.iter().map(|r| (r.stage.clone(), r.total)).collect();
    assert_eq!(
        totals,
        [
            ("Initial collection".to_string(), 31),
            ("After difficulty filtering".to_string(), 16),
            ("Generating thinking data".to_string(), 11),
            ("Decontamination & deduplication".to_string(), 10),
        ]
    );
    assert_eq!(report.stage("After difficulty filtering").unwrap().count("PubMedQA"), 5);

    let sft = p("sft.jsonl");
    assert_eq!(run(argv(&["curate", "format-sft", "--input", s(&p("verified.jsonl")), "--out", s(&sft)])), 0);
    let first: Value = serde_json::from_str(fs::read_to_string(&sft).unwrap().lines().next().unwrap()).unwrap();
    let text = first["text"].as_str().unwrap();
    assert!(text.contains("<|im_start|>think\nthe tubule reabsorbs\n<|im_start|>answer\n\\boxed{B}"));

    assert_eq!(run(argv(&["report", "--ledger", s(&ledger)])), 0);
}

#[test]
fn force_sweep_and_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::write(dir.path(), "d.jsonl", &common::questions_jsonl(&dataset(4, "MedQA", 'B')));
    let mock = common::write(
        dir.path(),
        "m.json",
        r#"{"entries": [
          {"regex": "(?s)Wait\\..*Final Answer:", "emit": "\\boxed{C}"},
          {"suffix": "Final Answer:", "emit": "\\boxed{B}"},
          {"suffix": "Wait.", "emit": "on second thought", "terminal": "<|im_start|>answer"},
          {"suffix": "<|im_start|>think", "emit": "first idea", "terminal": "<|im_start|>answer"}
        ]}"#,
    );
    let out = dir.path().join("out");
    let code = run(argv(&[
        "force-sweep", "--max-forcings", "2", "--dataset", s(&data), "--mock", s(&mock), "--out-dir", s(&out),
    ]));
    assert_eq!(code, 0);
    let svg_path = dir.path().join("plot.svg");
    let code = run(argv(&[
        "plot", "--sweep", s(&out.join("forcing_sweep.json")), "--format", "svg", "--out", s(&svg_path),
    ]));
    assert_eq!(code, 0);
    assert_eq!(fs::read(&svg_path).unwrap(), fs::read(out.join("forcing_sweep.svg")).unwrap());
    let csv = fs::read_to_string(out.join("forcing_sweep.csv")).unwrap();
    let acc: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(acc, ["100.0000", "0.0000", "0.0000"]);
}
