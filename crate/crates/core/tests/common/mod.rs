#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use serde::Deserialize;
use ttscale::client::{Backend, BackendError, GenerationRequest, RawTokens};
use ttscale::extract::{extract_answer, Choices, Method};
use ttscale::prompt::{Letter, McqQuestion};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[derive(Debug, Deserialize)]
pub struct ExtractionFixture {
    pub name: String,
    pub text: String,
    pub options: Vec<String>,
    pub expected: Option<Letter>,
    pub method: Method,
    pub pattern: Option<String>,
}

impl ExtractionFixture {
    pub fn question(&self) -> McqQuestion {
        let opts: Vec<&str> = self.options.iter().map(String::as_str).collect();
        McqQuestion::new(self.name.clone(), "stem", &opts, 'A', "fixture")
    }

    pub fn choices(&self) -> Choices {
        Choices::of(&self.question())
    }

    pub fn check(&self) -> Result<(), String> {
        let out = extract_answer(&self.text, &self.choices());
        if out.letter != self.expected || out.method != self.method || out.pattern.map(str::to_owned) != self.pattern {
            return Err(format!(
                "{}: got {:?}/{:?}/{:?}, want {:?}/{:?}/{:?}",
                self.name, out.letter, out.method, out.pattern, self.expected, self.method, self.pattern
            ));
        }
        Ok(())
    }

    /// Prepending `\boxed{X}` for any allowed X must yield X.
    pub fn check_decoy(&self) -> Result<(), String> {
        let q = self.question();
        for x in q.letters() {
            let text = format!("\\boxed{{{x}}} {}", self.text);
            let out = extract_answer(&text, &self.choices());
            if out.letter != Some(x) || out.method != Method::Boxed {
                return Err(format!("{}: decoy {x} gave {:?}", self.name, out.letter));
            }
        }
        Ok(())
    }
}

pub fn extraction_fixtures() -> Vec<ExtractionFixture> {
    let path = fixture_path("extraction.jsonl");
    ttscale::io::read_jsonl(&path).expect("fixture file parses")
}

/// Answers from a fixed prompt → reply table.
pub struct TableBackend {
    pub replies: HashMap<String, String>,
}

impl Backend for TableBackend {
    fn raw_tokens(&self, req: &GenerationRequest) -> Result<RawTokens<'_>, BackendError> {
        let reply = self
            .replies
            .get(&req.context())
            .cloned()
            .ok_or_else(|| BackendError::Unscripted { tail: String::new() })?;
        Ok(Box::new(std::iter::once(Ok(reply))))
    }

    fn name(&self) -> String {
        "table".into()
    }
}

/// Writes `text` into `dir/name` and returns the path.
pub fn write(dir: &std::path::Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

pub fn questions_jsonl(qs: &[McqQuestion]) -> String {
    ttscale::io::to_jsonl(qs)
}
