//! Incremental parser for chat-completions server-sent events.

use serde_json::Value;

use super::BackendError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SseEvent {
    /// Payload of one `data:` event (multi-line payloads joined by `\n`).
    Data(String),
    /// The `data: [DONE]` sentinel.
    Done,
}

/// Line-oriented SSE decoder. Feed it arbitrary byte chunks; complete events
/// come out in order.
#[derive(Debug, Default)]
pub struct SseParser {
    buf: Vec<u8>,
    data: Vec<String>,
}

impl SseParser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn feed(&mut self, chunk: &[u8]) -> Vec<SseEvent> {
        self.buf.extend_from_slice(chunk);
        let mut out = Vec::new();
        while let Some(pos) = self.buf.iter().position(|&b| b == b'\n') {
            let line: Vec<u8> = self.buf.drain(..=pos).collect();
            let line = String::from_utf8_lossy(&line[..line.len() - 1]);
            let line = line.strip_suffix('\r').unwrap_or(&line);
            self.line(line, &mut out);
        }
        out
    }

    /// Flushes a trailing event not followed by a blank line.
    pub fn finish(&mut self) -> Vec<SseEvent> {
        let mut out = Vec::new();
        if !self.buf.is_empty() {
            let rest = std::mem::take(&mut self.buf);
            let line = String::from_utf8_lossy(&rest).into_owned();
            self.line(line.trim_end_matches('\r'), &mut out);
        }
        self.dispatch(&mut out);
        out
    }

    fn line(&mut self, line: &str, out: &mut Vec<SseEvent>) {
        if line.is_empty() {
            self.dispatch(out);
            return;
        }
        if line.starts_with(':') {
            return;
        }
        let (field, value) = match line.split_once(':') {
            Some((f, v)) => (f, v.strip_prefix(' ').unwrap_or(v)),
            None => (line, ""),
        };
        if field == "data" {
            if value == "[DONE]" && self.data.is_empty() {
                out.push(SseEvent::Done);
                return;
            }
            self.data.push(value.to_owned());
        }
    }

    fn dispatch(&mut self, out: &mut Vec<SseEvent>) {
        if !self.data.is_empty() {
            out.push(SseEvent::Data(self.data.join("\n")));
            self.data.clear();
        }
    }
}

/// Extracts `choices[0].delta.content` from a chunk. Returns `Ok(None)` for
/// chunks without content (role preambles, finish markers).
pub fn parse_chunk_content(payload: &str) -> Result<Option<String>, BackendError> {
    let v: Value = serde_json::from_str(payload)
        .map_err(|e| BackendError::Protocol(format!("{e}: {payload}")))?;
    if let Some(err) = v.get("error") {
        let status = err.get("code").and_then(Value::as_u64).unwrap_or(500) as u16;
        let msg = err
            .get("message")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .unwrap_or_else(|| err.to_string());
        return Err(BackendError::Status { status, body: msg });
    }
    let choice = v.get("choices").and_then(|c| c.get(0));
    let content = choice
        .and_then(|c| c.get("delta"))
        .and_then(|d| d.get("content"))
        .and_then(Value::as_str);
    Ok(content.filter(|s| !s.is_empty()).map(str::to_owned))
}
