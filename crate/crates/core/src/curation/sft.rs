//! SFT text format: prompt, thinking span, answer span.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::traces::TraceRecord;
use crate::budget::{ANSWER_MARKER, THINK_MARKER};
use crate::prompt::{format_prompt, BOXED_INSTRUCTION};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftExample {
    pub text: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SftError {
    #[error("record {0} is not verified")]
    Unverified(String),
    #[error("record {id}: {field} contains the delimiter {marker:?}")]
    Contaminated {
        id: String,
        field: &'static str,
        marker: &'static str,
    },
    #[error("text does not contain both markers exactly once, in order")]
    Malformed,
}

/// `{prompt}\n<|im_start|>think\n{thinking}\n<|im_start|>answer\n{response}`.
pub fn format_sft_example(record: &TraceRecord) -> Result<SftExample, SftError> {
    let id = &record.question.id;
    if !record.verified {
        return Err(SftError::Unverified(id.clone()));
    }
    let prompt = format_prompt(&record.question, BOXED_INSTRUCTION);
    for (field, value) in [
        ("prompt", prompt.as_str()),
        ("thinking", record.thinking.as_str()),
        ("response", record.response.as_str()),
    ] {
        for marker in [THINK_MARKER, ANSWER_MARKER] {
            if value.contains(marker) {
                return Err(SftError::Contaminated {
                    id: id.clone(),
                    field,
                    marker,
                });
            }
        }
    }
    Ok(SftExample {
        text: [
            prompt.as_str(),
            THINK_MARKER,
            &record.thinking,
            ANSWER_MARKER,
            &record.response,
        ]
        .join("\n"),
    })
}

/// Splits formatted text back into (prompt, thinking, response).
pub fn parse_sft_example(text: &str) -> Result<(String, String, String), SftError> {
    if text.matches(THINK_MARKER).count() != 1 || text.matches(ANSWER_MARKER).count() != 1 {
        return Err(SftError::Malformed);
    }
    let (prompt, rest) = text.split_once(THINK_MARKER).ok_or(SftError::Malformed)?;
    let (thinking, response) = rest.split_once(ANSWER_MARKER).ok_or(SftError::Malformed)?;
    let strip = |s: &str, lead: bool, trail: bool| {
        let s = if lead { s.strip_prefix('\n').unwrap_or(s) } else { s };
        let s = if trail { s.strip_suffix('\n').unwrap_or(s) } else { s };
        s.to_owned()
    };
    Ok((
        strip(prompt, false, true),
        strip(thinking, true, true),
        strip(response, true, false),
    ))
}
