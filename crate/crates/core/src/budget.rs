//! Thinking-budget enforcement and budget forcing.
//!
//! The controller streams the model's thinking phase under a token budget.
//! When the model closes its thinking early, the end-of-think marker is
//! suppressed and the forcing text (default `"Wait."`) is appended so the
//! model keeps reasoning, up to `forcing_count` times. When the budget runs
//! out mid-thought, the controller closes the thinking span itself and cues
//! the answer. Injected text never counts toward `thinking_tokens`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::client::{stream_generate, Backend, BackendError, GenerationRequest, StopCause};
use crate::client::{DEFAULT_SEED, DEFAULT_TEMPERATURE};

/// Opens the thinking span in the SFT text format.
pub const THINK_MARKER: &str = "<|im_start|>think";
/// Closes the thinking span and opens the answer span.
pub const ANSWER_MARKER: &str = "<|im_start|>answer";

pub const DEFAULT_THINKING_BUDGET: usize = 4096;
pub const DEFAULT_FORCING_TEXT: &str = "Wait.";
pub const DEFAULT_PER_FORCING_CAP: usize = 2048;
pub const DEFAULT_ANSWER_CUE: &str = "Final Answer:";
pub const DEFAULT_ANSWER_MAX_TOKENS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetPolicy {
    /// Maximum model-emitted thinking tokens before the answer is cued.
    pub thinking_budget: usize,
    pub forcing_count: usize,
    pub forcing_text: String,
    /// Cap on each forced continuation.
    pub per_forcing_cap: usize,
    /// Optional cap on all forced continuations together.
    pub aggregate_forcing_cap: Option<usize>,
    pub think_marker: String,
    pub end_of_think_marker: String,
    pub answer_cue: String,
    pub answer_max_tokens: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for BudgetPolicy {
    fn default() -> Self {
        Self {
            thinking_budget: DEFAULT_THINKING_BUDGET,
            forcing_count: 0,
            forcing_text: DEFAULT_FORCING_TEXT.to_owned(),
            per_forcing_cap: DEFAULT_PER_FORCING_CAP,
            aggregate_forcing_cap: None,
            think_marker: THINK_MARKER.to_owned(),
            end_of_think_marker: ANSWER_MARKER.to_owned(),
            answer_cue: DEFAULT_ANSWER_CUE.to_owned(),
            answer_max_tokens: DEFAULT_ANSWER_MAX_TOKENS,
            temperature: DEFAULT_TEMPERATURE,
            seed: DEFAULT_SEED,
        }
    }
}

impl BudgetPolicy {
    pub fn with_budget(mut self, budget: usize) -> Self {
        self.thinking_budget = budget;
        self
    }

    pub fn with_forcing(mut self, count: usize) -> Self {
        self.forcing_count = count;
        self
    }

    pub fn validate(&self) -> Result<(), BudgetError> {
        let bad = |m: &str| Err(BudgetError::InvalidPolicy(m.to_owned()));
        if self.thinking_budget == 0 {
            return bad("thinking_budget must be at least 1");
        }
        if self.per_forcing_cap == 0 {
            return bad("per_forcing_cap must be at least 1");
        }
        if self.forcing_count > 0 && self.forcing_text.is_empty() {
            return bad("forcing_text must be nonempty when forcing_count > 0");
        }
        if self.end_of_think_marker.is_empty() {
            return bad("end_of_think_marker must be nonempty");
        }
        if self.answer_max_tokens == 0 {
            return bad("answer_max_tokens must be at least 1");
        }
        if !(self.temperature >= 0.0) {
            return bad("temperature must be >= 0");
        }
        Ok(())
    }

    /// Upper bound on `thinking_tokens` for any run under this policy.
    pub fn max_thinking_tokens(&self) -> usize {
        let forced = self.forcing_count * self.per_forcing_cap;
        let forced = self.aggregate_forcing_cap.map_or(forced, |a| forced.min(a));
        self.thinking_budget + forced
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Initial,
    /// 1-based forcing iteration.
    Forced(usize),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Initial => f.write_str("initial"),
            Provenance::Forced(i) => write!(f, "forced({i})"),
        }
    }
}

impl Serialize for Provenance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Provenance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "initial" {
            return Ok(Provenance::Initial);
        }
        s.strip_prefix("forced(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|n| n.parse().ok())
            .filter(|&n| n >= 1)
            .map(Provenance::Forced)
            .ok_or_else(|| serde::de::Error::custom(format!("bad provenance {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub provenance: Provenance,
    pub tokens: Vec<String>,
}

impl Segment {
    pub fn text(&self) -> String {
        self.tokens.concat()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct SegmentRepr {
    provenance: Provenance,
    text: String,
    tokens: Vec<String>,
}

impl Serialize for Segment {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SegmentRepr {
            provenance: self.provenance,
            text: self.text(),
            tokens: self.tokens.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Segment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = SegmentRepr::deserialize(d)?;
        if r.tokens.concat() != r.text {
            return Err(serde::de::Error::custom("segment text does not match its tokens"));
        }
        Ok(Segment {
            provenance: r.provenance,
            tokens: r.tokens,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Natural,
    BudgetExhausted,
    ForcingExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningTranscript {
    #[serde(default)]
    pub id: String,
    pub segments: Vec<Segment>,
    pub injections: usize,
    pub thinking_tokens: usize,
    #[serde(rename = "answer")]
    pub answer_text: String,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub empty_answer: bool,
}

impl ReasoningTranscript {
    fn empty() -> Self {
        Self {
            id: String::new(),
            segments: Vec::new(),
            injections: 0,
            thinking_tokens: 0,
            answer_text: String::new(),
            termination: Termination::Natural,
            empty_answer: false,
        }
    }

    /// Concatenated thinking text with forcing text between segments, as
    /// the model saw it.
    pub fn thinking_text(&self, forcing_text: &str) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            if matches!(seg.provenance, Provenance::Forced(_)) {
                join_into(&mut out, forcing_text);
                join_into(&mut out, &seg.text());
            } else {
                out.push_str(&seg.text());
            }
        }
        out
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn check_invariants(&self, policy: &BudgetPolicy) -> Result<(), String> {
        if self.segments.is_empty() {
            return Err("no segments".into());
        }
        for (i, seg) in self.segments.iter().enumerate() {
            let want = if i == 0 {
                Provenance::Initial
            } else {
                Provenance::Forced(i)
            };
            if seg.provenance != want {
                return Err(format!("segment {i} has provenance {}", seg.provenance));
            }
            if seg.text().contains(&policy.end_of_think_marker) {
                return Err(format!("segment {i} contains the end-of-think marker"));
            }
        }
        let sum: usize = self.segments.iter().map(Segment::len).sum();
        if sum != self.thinking_tokens {
            return Err(format!("thinking_tokens {} != segment sum {sum}", self.thinking_tokens));
        }
        if self.injections != self.segments.len() - 1 {
            return Err("injections do not match forced segments".into());
        }
        if self.injections > policy.forcing_count {
            return Err("more injections than forcing_count".into());
        }
        if self.segments[0].len() > policy.thinking_budget {
            return Err("initial segment exceeds thinking budget".into());
        }
        if self.thinking_tokens > policy.max_thinking_tokens() {
            return Err("thinking tokens exceed budget bound".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone)]
pub enum BudgetError {
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("backend failed during {phase}: {source}")]
    Backend {
        phase: &'static str,
        #[source]
        source: BackendError,
        partial: Box<ReasoningTranscript>,
    },
}

impl BudgetError {
    pub fn partial(&self) -> Option<&ReasoningTranscript> {
        match self {
            BudgetError::Backend { partial, .. } => Some(partial),
            BudgetError::InvalidPolicy(_) => None,
        }
    }
}

impl crate::client::Retryable for BudgetError {
    fn is_retryable(&self) -> bool {
        matches!(self, BudgetError::Backend { source, .. } if source.is_retryable())
    }
}

/// Appends `piece`, inserting a space when neither side has whitespace at
/// the seam.
fn join_into(ctx: &mut String, piece: &str) {
    let needs_space = !ctx.is_empty()
        && !piece.is_empty()
        && !ctx.ends_with(char::is_whitespace)
        && !piece.starts_with(char::is_whitespace);
    if needs_space {
        ctx.push(' ');
    }
    ctx.push_str(piece);
}

/// Removes the first occurrence of `marker` and everything after it from
/// a token sequence. A token holding text before the marker keeps that
/// prefix; tokens left empty are dropped.
fn strip_marker(mut tokens: Vec<String>, marker: &str) -> Vec<String> {
    let joined = tokens.concat();
    let Some(cut) = joined.find(marker) else {
        return tokens;
    };
    let mut pos = 0;
    for i in 0..tokens.len() {
        let end = pos + tokens[i].len();
        if end > cut {
            let keep = cut - pos;
            tokens.truncate(i + 1);
            tokens[i].truncate(keep);
            if tokens[i].is_empty() {
                tokens.pop();
            }
            break;
        }
        pos = end;
    }
    tokens
}

fn thinking_prefill(policy: &BudgetPolicy) -> String {
    format!("{}\n", policy.think_marker)
}

fn answer_prefill(policy: &BudgetPolicy, thinking: &str) -> String {
    let mut ctx = thinking_prefill(policy);
    ctx.push_str(thinking);
    ctx.push('\n');
    ctx.push_str(&policy.end_of_think_marker);
    ctx.push('\n');
    ctx.push_str(&policy.answer_cue);
    ctx
}

fn collect(
    backend: &dyn Backend,
    req: &GenerationRequest,
    sink: &mut Vec<String>,
) -> Result<StopCause, BackendError> {
    let mut stream = stream_generate(backend, req)?;
    for ev in stream.by_ref() {
        sink.push(ev?.text);
    }
    Ok(stream.cause().unwrap_or(StopCause::BackendStop))
}

/// Runs one budgeted, optionally forced, generation for a formatted prompt.
pub fn run_with_budget<B: Backend + ?Sized>(
    prompt: &str,
    policy: &BudgetPolicy,
    backend: &B,
) -> Result<ReasoningTranscript, BudgetError> {
    policy.validate()?;
    let backend: &dyn Backend = &backend;
    let mut tr = ReasoningTranscript::empty();
    let mut thinking = String::new();
    let mut forced_used = 0usize;
    let aggregate = policy.aggregate_forcing_cap.unwrap_or(usize::MAX);

    let termination = loop {
        let provenance = if tr.segments.is_empty() {
            Provenance::Initial
        } else {
            Provenance::Forced(tr.injections)
        };
        let cap = match provenance {
            Provenance::Initial => policy.thinking_budget,
            Provenance::Forced(_) => policy.per_forcing_cap.min(aggregate - forced_used),
        };
        let mut prefill = thinking_prefill(policy);
        prefill.push_str(&thinking);
        let req = GenerationRequest::new(prompt, cap)
            .with_prefill(prefill)
            .with_stop(policy.end_of_think_marker.as_str())
            .with_sampling(policy.temperature, policy.seed);

        let mut tokens = Vec::new();
        let cause = match collect(backend, &req, &mut tokens) {
            Ok(c) => c,
            Err(source) => {
                tokens = strip_marker(tokens, &policy.end_of_think_marker);
                tr.thinking_tokens += tokens.len();
                tr.segments.push(Segment { provenance, tokens });
                tr.termination = Termination::BudgetExhausted;
                return Err(BudgetError::Backend {
                    phase: "thinking",
                    source,
                    partial: Box::new(tr),
                });
            }
        };
        let tokens = strip_marker(tokens, &policy.end_of_think_marker);
        if provenance != Provenance::Initial {
            forced_used += tokens.len();
        }
        tr.thinking_tokens += tokens.len();
        if provenance == Provenance::Initial {
            thinking.push_str(&tokens.concat());
        } else {
            join_into(&mut thinking, &tokens.concat());
        }
        tr.segments.push(Segment { provenance, tokens });

        if cause == StopCause::Cap {
            break Termination::BudgetExhausted;
        }
        let may_force = tr.injections < policy.forcing_count
            && tr.thinking_tokens < policy.thinking_budget
            && forced_used < aggregate;
        if may_force {
            tr.injections += 1;
            join_into(&mut thinking, &policy.forcing_text);
            continue;
        }
        if policy.forcing_count > 0 && tr.injections == policy.forcing_count {
            break Termination::ForcingExhausted;
        }
        if tr.thinking_tokens >= policy.thinking_budget {
            break Termination::BudgetExhausted;
        }
        break Termination::Natural;
    };
    tr.termination = termination;
    answer_phase(prompt, policy, backend, tr, &thinking)
}

fn answer_phase(
    prompt: &str,
    policy: &BudgetPolicy,
    backend: &dyn Backend,
    mut tr: ReasoningTranscript,
    thinking: &str,
) -> Result<ReasoningTranscript, BudgetError> {
    let req = GenerationRequest::new(prompt, policy.answer_max_tokens)
        .with_prefill(answer_prefill(policy, thinking))
        .with_sampling(policy.temperature, policy.seed);
    let mut tokens = Vec::new();
    match collect(backend, &req, &mut tokens) {
        Ok(_) => {
            tr.answer_text = tokens.concat().trim().to_owned();
            tr.empty_answer = tr.answer_text.is_empty();
            Ok(tr)
        }
        Err(source) => {
            tr.answer_text = tokens.concat().trim().to_owned();
            Err(BudgetError::Backend {
                phase: "answer",
                source,
                partial: Box::new(tr),
            })
        }
    }
}

/// Cuts a transcript down to at most `budget` thinking tokens. When a cut
/// happens the answer is cleared, since it has to be elicited again from
/// the shortened reasoning.
pub fn truncate_to_budget(tr: &ReasoningTranscript, budget: usize) -> ReasoningTranscript {
    let budget = budget.max(1);
    if tr.thinking_tokens <= budget {
        return tr.clone();
    }
    let mut left = budget;
    let mut segments = Vec::new();
    for seg in &tr.segments {
        if left == 0 {
            break;
        }
        let take = seg.len().min(left);
        if take == 0 && seg.provenance != Provenance::Initial {
            continue;
        }
        segments.push(Segment {
            provenance: seg.provenance,
            tokens: seg.tokens[..take].to_vec(),
        });
        left -= take;
    }
    ReasoningTranscript {
        id: tr.id.clone(),
        injections: segments.len().saturating_sub(1),
        thinking_tokens: budget - left,
        segments,
        answer_text: String::new(),
        termination: Termination::BudgetExhausted,
        empty_answer: false,
    }
}

/// Elicits a fresh answer for a (typically truncated) transcript.
pub fn reelicit_answer<B: Backend + ?Sized>(
    prompt: &str,
    policy: &BudgetPolicy,
    backend: &B,
    tr: &ReasoningTranscript,
) -> Result<ReasoningTranscript, BudgetError> {
    policy.validate()?;
    let thinking = tr.thinking_text(&policy.forcing_text);
    let backend: &dyn Backend = &backend;
    answer_phase(prompt, policy, backend, tr.clone(), &thinking)
}
