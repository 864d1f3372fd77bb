//! Chat-completions backend over HTTP with server-sent-event streaming.

use std::collections::VecDeque;
use std::io::Read;
use std::time::Duration;

use reqwest::blocking::{Client, Response};
use reqwest::header::{ACCEPT, CONTENT_TYPE};
use serde_json::json;

use super::sse::{parse_chunk_content, SseEvent, SseParser};
use super::{Backend, BackendError, GenerationRequest, RawTokens};

pub const API_KEY_ENV: &str = "M1_API_KEY";
pub const BASE_URL_ENV: &str = "M1_BASE_URL";

#[derive(Debug, Clone, PartialEq)]
pub struct ChatConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl ChatConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key: None,
            timeout: Duration::from_secs(600),
        }
    }

    /// Reads the bearer token from `M1_API_KEY` when set.
    pub fn with_env_key(mut self) -> Self {
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }

    pub fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

/// Wire backend. The client is shareable across worker threads; each call
/// opens its own stream.
#[derive(Debug, Clone)]
pub struct ChatBackend {
    config: ChatConfig,
    client: Client,
}

impl ChatBackend {
    pub fn new(config: ChatConfig) -> Result<Self, BackendError> {
        let client = Client::builder()
            .timeout(config.timeout)
            .connect_timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| BackendError::Connection(e.to_string()))?;
        Ok(Self { config, client })
    }

    pub fn config(&self) -> &ChatConfig {
        &self.config
    }

    /// Request body. A non-empty prefill is sent as a trailing assistant
    /// message for the server to continue.
    pub fn request_body(&self, req: &GenerationRequest) -> serde_json::Value {
        let mut messages = vec![json!({"role": "user", "content": req.prompt})];
        if !req.prefill.is_empty() {
            messages.push(json!({"role": "assistant", "content": req.prefill}));
        }
        json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": req.temperature,
            "seed": req.seed,
            "max_tokens": req.max_new_tokens,
            "stream": true,
        })
    }
}

fn classify(e: reqwest::Error) -> BackendError {
    if e.is_timeout() {
        BackendError::Timeout(e.to_string())
    } else if e.is_connect() || e.is_request() {
        BackendError::Connection(e.to_string())
    } else if e.is_body() || e.is_decode() {
        BackendError::Truncated
    } else {
        BackendError::Connection(e.to_string())
    }
}

impl Backend for ChatBackend {
    fn raw_tokens(&self, req: &GenerationRequest) -> Result<RawTokens<'_>, BackendError> {
        let body = serde_json::to_vec(&self.request_body(req))
            .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let mut call = self
            .client
            .post(self.config.endpoint())
            .header(CONTENT_TYPE, "application/json")
            .header(ACCEPT, "text/event-stream")
            .body(body);
        if let Some(key) = &self.config.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().map_err(classify)?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(BackendError::Status {
                status: status.as_u16(),
                body,
            });
        }
        Ok(Box::new(SseTokens {
            resp,
            parser: SseParser::new(),
            pending: VecDeque::new(),
            eof: false,
            finished: false,
        }))
    }

    fn name(&self) -> String {
        format!("chat({} @ {})", self.config.model, self.config.base_url)
    }
}

struct SseTokens {
    resp: Response,
    parser: SseParser,
    pending: VecDeque<SseEvent>,
    eof: bool,
    finished: bool,
}

impl Iterator for SseTokens {
    type Item = Result<String, BackendError>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut buf = [0u8; 4096];
        loop {
            if self.finished {
                return None;
            }
            while let Some(ev) = self.pending.pop_front() {
                match ev {
                    SseEvent::Done => {
                        self.finished = true;
                        return None;
                    }
                    SseEvent::Data(payload) => match parse_chunk_content(&payload) {
                        Ok(Some(text)) => return Some(Ok(text)),
                        Ok(None) => {}
                        Err(e) => {
                            self.finished = true;
                            return Some(Err(e));
                        }
                    },
                }
            }
            if self.eof {
                self.finished = true;
                return Some(Err(BackendError::Truncated));
            }
            match self.resp.read(&mut buf) {
                Ok(0) => {
                    self.eof = true;
                    self.pending.extend(self.parser.finish());
                }
                Ok(n) => self.pending.extend(self.parser.feed(&buf[..n])),
                Err(e) => {
                    self.finished = true;
                    let err = if e.kind() == std::io::ErrorKind::TimedOut {
                        BackendError::Timeout(e.to_string())
                    } else {
                        BackendError::Truncated
                    };
                    return Some(Err(err));
                }
            }
        }
    }
}
