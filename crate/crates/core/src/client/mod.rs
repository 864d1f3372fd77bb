//! Streaming-token interface shared by the chat-completions wire backend and
//! the scripted mock.
//!
//! Every backend produces raw token strings; [`TokenStream`] layers the
//! common stop rules on top (token cap, stop marker, backend completion) so
//! that all backends report termination the same way.

mod mock;
mod sse;
mod wire;

use std::fmt;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mock::{ScriptEntry, ScriptedModel, Trigger};
pub use sse::{parse_chunk_content, SseEvent, SseParser};
pub use wire::{ChatBackend, ChatConfig, API_KEY_ENV, BASE_URL_ENV};

/// Hard output ceiling used when generating reasoning traces.
pub const TRACE_TOKEN_LIMIT: usize = 8192;

pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_SEED: u64 = 42;

/// Number of retries after the first attempt for retryable failures.
pub const MAX_RETRIES: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    /// User-turn text.
    pub prompt: String,
    /// Text the assistant turn is continued from. Empty for a fresh turn.
    #[serde(default)]
    pub prefill: String,
    pub max_new_tokens: usize,
    pub temperature: f64,
    pub seed: u64,
    pub stop_on: Option<String>,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>, max_new_tokens: usize) -> Self {
        Self {
            prompt: prompt.into(),
            prefill: String::new(),
            max_new_tokens,
            temperature: DEFAULT_TEMPERATURE,
            seed: DEFAULT_SEED,
            stop_on: None,
        }
    }

    pub fn with_prefill(mut self, prefill: impl Into<String>) -> Self {
        self.prefill = prefill.into();
        self
    }

    pub fn with_stop(mut self, marker: impl Into<String>) -> Self {
        self.stop_on = Some(marker.into());
        self
    }

    pub fn with_sampling(mut self, temperature: f64, seed: u64) -> Self {
        self.temperature = temperature;
        self.seed = seed;
        self
    }

    /// Full text the model conditions on: prompt followed by the prefill.
    pub fn context(&self) -> String {
        let mut ctx = String::with_capacity(self.prompt.len() + self.prefill.len());
        ctx.push_str(&self.prompt);
        ctx.push_str(&self.prefill);
        ctx
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_new_tokens == 0 {
            return Err(BackendError::InvalidRequest(
                "max_new_tokens must be at least 1".into(),
            ));
        }
        if !(self.temperature >= 0.0) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if matches!(&self.stop_on, Some(m) if m.is_empty()) {
            return Err(BackendError::InvalidRequest("stop marker is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCause {
    /// `stop_on` was emitted.
    Marker,
    /// `max_new_tokens` events were produced.
    Cap,
    /// The backend finished on its own.
    BackendStop,
}

impl fmt::Display for StopCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopCause::Marker => "marker",
            StopCause::Cap => "cap",
            StopCause::BackendStop => "backend-stop",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenEvent {
    pub text: String,
    pub ordinal: usize,
    /// Set on the final event of a stream only.
    pub cause: Option<StopCause>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("backend returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("stream ended without completion sentinel")]
    Truncated,
    #[error("malformed stream chunk: {0}")]
    Protocol(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no script entry matches the context (context ends with {tail:?})")]
    Unscripted { tail: String },
}

impl BackendError {
    /// Whether retrying the same request may succeed.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Connection(_) | BackendError::Timeout(_) | BackendError::Truncated => {
                true
            }
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            BackendError::Protocol(_)
            | BackendError::InvalidRequest(_)
            | BackendError::Unscripted { .. } => false,
        }
    }
}

pub type RawTokens<'a> = Box<dyn Iterator<Item = Result<String, BackendError>> + Send + 'a>;

/// A source of raw token strings.
///
/// Implementations only produce tokens; cap and stop-marker handling live in
/// [`TokenStream`].
pub trait Backend: Send + Sync {
    fn raw_tokens(&self, req: &GenerationRequest) -> Result<RawTokens<'_>, BackendError>;

    fn name(&self) -> String;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn raw_tokens(&self, req: &GenerationRequest) -> Result<RawTokens<'_>, BackendError> {
        (**self).raw_tokens(req)
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn raw_tokens(&self, req: &GenerationRequest) -> Result<RawTokens<'_>, BackendError> {
        (**self).raw_tokens(req)
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn raw_tokens(&self, req: &GenerationRequest) -> Result<RawTokens<'_>, BackendError> {
        (**self).raw_tokens(req)
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

/// Ordered stream of [`TokenEvent`]s with uniform termination rules.
pub struct TokenStream<'a> {
    raw: RawTokens<'a>,
    lookahead: Option<Result<String, BackendError>>,
    ordinal: usize,
    cap: usize,
    stop_on: Option<String>,
    window: String,
    cause: Option<StopCause>,
    done: bool,
}

impl<'a> TokenStream<'a> {
    fn new(raw: RawTokens<'a>, req: &GenerationRequest) -> Self {
        Self {
            raw,
            lookahead: None,
            ordinal: 0,
            cap: req.max_new_tokens,
            stop_on: req.stop_on.clone(),
            window: String::new(),
            cause: None,
            done: false,
        }
    }

    /// Termination cause, available once the stream is exhausted.
    pub fn cause(&self) -> Option<StopCause> {
        self.cause
    }

    fn pull(&mut self) -> Option<Result<String, BackendError>> {
        self.lookahead.take().or_else(|| self.raw.next())
    }

    fn marker_seen(&mut self, text: &str) -> bool {
        let Some(marker) = self.stop_on.as_deref() else {
            return false;
        };
        self.window.push_str(text);
        if self.window.contains(marker) {
            return true;
        }
        // Keep only enough tail to catch a marker split across events.
        let keep = marker.len().saturating_sub(1);
        if self.window.len() > keep {
            let mut cut = self.window.len() - keep;
            while !self.window.is_char_boundary(cut) {
                cut -= 1;
            }
            self.window.drain(..cut);
        }
        false
    }
}

impl Iterator for TokenStream<'_> {
    type Item = Result<TokenEvent, BackendError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let text = match self.pull() {
            None => {
                self.done = true;
                self.cause = Some(StopCause::BackendStop);
                return None;
            }
            Some(Err(e)) => {
                self.done = true;
                return Some(Err(e));
            }
            Some(Ok(t)) => t,
        };
        let ordinal = self.ordinal;
        self.ordinal += 1;
        let mut cause = None;
        if self.marker_seen(&text) {
            cause = Some(StopCause::Marker);
        } else if self.ordinal >= self.cap {
            cause = Some(StopCause::Cap);
        } else {
            // Peek so the final event can carry the backend-stop cause.
            match self.raw.next() {
                None => cause = Some(StopCause::BackendStop),
                Some(next) => self.lookahead = Some(next),
            }
        }
        if cause.is_some() {
            self.done = true;
            self.cause = cause;
        }
        Some(Ok(TokenEvent {
            text,
            ordinal,
            cause,
        }))
    }
}

pub fn stream_generate<'a, B: Backend + ?Sized>(
    backend: &'a B,
    req: &GenerationRequest,
) -> Result<TokenStream<'a>, BackendError> {
    req.validate()?;
    let raw = backend.raw_tokens(req)?;
    Ok(TokenStream::new(raw, req))
}

/// Result of draining a stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub tokens: Vec<String>,
    pub cause: StopCause,
}

impl Completion {
    pub fn text(&self) -> String {
        self.tokens.concat()
    }
}

pub fn generate<B: Backend + ?Sized>(
    backend: &B,
    req: &GenerationRequest,
) -> Result<Completion, BackendError> {
    let mut stream = stream_generate(backend, req)?;
    let mut tokens = Vec::new();
    for ev in stream.by_ref() {
        tokens.push(ev?.text);
    }
    let cause = stream.cause().unwrap_or(StopCause::BackendStop);
    Ok(Completion { tokens, cause })
}

/// Full non-streamed completion for a grading prompt. No partial text is
/// returned on failure.
pub fn probe_answer<B: Backend + ?Sized>(
    backend: &B,
    prompt: &str,
    max_new_tokens: usize,
    temperature: f64,
    seed: u64,
) -> Result<String, BackendError> {
    let req = GenerationRequest::new(prompt, max_new_tokens).with_sampling(temperature, seed);
    generate(backend, &req).map(|c| c.text())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: MAX_RETRIES,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate() -> Self {
        Self {
            max_retries: MAX_RETRIES,
            base_delay: Duration::ZERO,
        }
    }

    /// Runs `op`, retrying retryable failures with exponential backoff.
    pub fn run<T, E, F>(&self, mut op: F) -> Result<T, E>
    where
        F: FnMut() -> Result<T, E>,
        E: Retryable,
    {
        let mut attempt = 0;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < self.max_retries => {
                    let delay = self.base_delay * 2u32.pow(attempt);
                    log::warn!("retryable failure (attempt {}): {e}", attempt + 1);
                    if !delay.is_zero() {
                        thread::sleep(delay);
                    }
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

pub trait Retryable: fmt::Display {
    fn is_retryable(&self) -> bool;
}

impl Retryable for BackendError {
    fn is_retryable(&self) -> bool {
        BackendError::is_retryable(self)
    }
}
