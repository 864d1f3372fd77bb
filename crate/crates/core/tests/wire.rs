//! Chat backend against an in-process HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::Value;
use ttscale::client::{
    generate, stream_generate, BackendError, ChatBackend, ChatConfig, GenerationRequest,
    RetryPolicy, StopCause,
};

#[derive(Clone)]
enum Reply {
    /// 200 with these SSE chunks, each written and flushed separately.
    Stream(Vec<String>),
    Status(u16, &'static str),
}

struct Server {
    url: String,
    requests: Arc<Mutex<Vec<(String, Value)>>>,
}

fn sse(contents: &[&str], done: bool) -> Vec<String> {
    let mut out: Vec<String> = contents
        .iter()
        .map(|c| {
            let chunk = serde_json::json!({"choices": [{"delta": {"content": c}}]});
            format!("data: {chunk}\n\n")
        })
        .collect();
    if done {
        out.push("data: [DONE]\n\n".into());
    }
    out
}

/// Serves `replies` in order, one per connection.
fn serve(replies: Vec<Reply>) -> Server {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let log = requests.clone();
    thread::spawn(move || {
        for reply in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = String::new();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
                headers.push_str(&line);
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            log.lock()
                .unwrap()
                .push((headers, serde_json::from_slice(&body).unwrap()));
            let mut w = stream;
            match reply {
                Reply::Stream(chunks) => {
                    write!(
                        w,
                        "HTTP/1.1 200 OK\r\nContent-Type: text/event-stream\r\nConnection: close\r\n\r\n"
                    )
                    .unwrap();
                    for c in chunks {
                        w.write_all(c.as_bytes()).unwrap();
                        w.flush().unwrap();
                    }
                }
                Reply::Status(code, body) => {
                    write!(
                        w,
                        "HTTP/1.1 {code} Oops\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                        body.len()
                    )
                    .unwrap();
                }
            }
        }
    });
    Server { url, requests }
}

fn backend(url: &str, key: Option<&str>) -> ChatBackend {
    let mut cfg = ChatConfig::new(url, "m1-7b-23k");
    cfg.api_key = key.map(str::to_owned);
    ChatBackend::new(cfg).unwrap()
}

#[test]
fn streams_tokens_until_done() {
    let srv = serve(vec![Reply::Stream(sse(&["Hel", "lo", " world"], true))]);
    let b = backend(&srv.url, Some("k123"));
    let req = GenerationRequest::new("Say hi", 64).with_sampling(0.0, 42);
    let c = generate(&b, &req).unwrap();
    assert_eq!(c.tokens, ["Hel", "lo", " world"]);
    assert_eq!(c.cause, StopCause::BackendStop);

    let reqs = srv.requests.lock().unwrap();
    let (headers, body) = &reqs[0];
    assert!(headers.starts_with("POST /v1/chat/completions"));
    assert!(headers.to_ascii_lowercase().contains("authorization: bearer k123"));
    assert_eq!(body["model"], "m1-7b-23k");
    assert_eq!(body["stream"], true);
    assert_eq!(body["max_tokens"], 64);
    assert_eq!(body["seed"], 42);
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(body["messages"][0]["content"], "Say hi");
    assert_eq!(body["messages"].as_array().unwrap().len(), 1);
}

#[test]
fn prefill_sent_as_assistant_turn() {
    let srv = serve(vec![Reply::Stream(sse(&["ok"], true))]);
    let b = backend(&srv.url, None);
    let req = GenerationRequest::new("Q", 4).with_prefill("<|im_start|>think\nso far");
    generate(&b, &req).unwrap();
    let reqs = srv.requests.lock().unwrap();
    let (headers, body) = &reqs[0];
    assert!(!headers.to_ascii_lowercase().contains("authorization"));
    assert_eq!(body["messages"][1]["role"], "assistant");
    assert_eq!(body["messages"][1]["content"], "<|im_start|>think\nso far");
}

#[test]
fn marker_split_across_chunks_stops_stream() {
    let srv = serve(vec![Reply::Stream(sse(
        &["a", " b", " <|im_st", "art|>answer", " never"],
        true,
    ))]);
    let b = backend(&srv.url, None);
    let req = GenerationRequest::new("Q", 64).with_stop("<|im_start|>answer");
    let mut stream = stream_generate(&b, &req).unwrap();
    let events: Vec<_> = stream.by_ref().map(Result::unwrap).collect();
    assert_eq!(events.len(), 4);
    assert_eq!(events.last().unwrap().cause, Some(StopCause::Marker));
    assert_eq!(stream.cause(), Some(StopCause::Marker));
}

#[test]
fn cap_stops_stream() {
    let srv = serve(vec![Reply::Stream(sse(&["1", "2", "3", "4", "5"], true))]);
    let c = generate(&backend(&srv.url, None), &GenerationRequest::new("Q", 3)).unwrap();
    assert_eq!(c.tokens, ["1", "2", "3"]);
    assert_eq!(c.cause, StopCause::Cap);
}

#[test]
fn eof_without_done_is_truncated() {
    let srv = serve(vec![Reply::Stream(sse(&["x", "y"], false))]);
    let err = generate(&backend(&srv.url, None), &GenerationRequest::new("Q", 64)).unwrap_err();
    assert_eq!(err, BackendError::Truncated);
    assert!(err.is_retryable());
}

#[test]
fn server_error_status_surfaces() {
    let srv = serve(vec![Reply::Status(500, "boom")]);
    let err = generate(&backend(&srv.url, None), &GenerationRequest::new("Q", 8)).unwrap_err();
    assert_eq!(err, BackendError::Status { status: 500, body: "boom".into() });
    assert!(err.is_retryable());
}

#[test]
fn client_error_not_retried() {
    let srv = serve(vec![Reply::Status(400, "bad"), Reply::Stream(sse(&["late"], true))]);
    let b = backend(&srv.url, None);
    let req = GenerationRequest::new("Q", 8);
    let r = RetryPolicy::immediate().run(|| generate(&b, &req));
    assert!(matches!(r, Err(BackendError::Status { status: 400, .. })));
    assert_eq!(srv.requests.lock().unwrap().len(), 1);
}

#[test]
fn retries_then_succeeds() {
    let srv = serve(vec![
        Reply::Status(503, "busy"),
        Reply::Stream(sse(&["par"], false)),
        Reply::Stream(sse(&["fine"], true)),
    ]);
    let b = backend(&srv.url, None);
    let req = GenerationRequest::new("Q", 8);
    let c = RetryPolicy::immediate().run(|| generate(&b, &req)).unwrap();
    assert_eq!(c.text(), "fine");
    assert_eq!(srv.requests.lock().unwrap().len(), 3);
}

#[test]
fn gives_up_after_two_retries() {
    let srv = serve(vec![Reply::Status(500, "a"), Reply::Status(500, "b"), Reply::Status(500, "c")]);
    let b = backend(&srv.url, None);
    let req = GenerationRequest::new("Q", 8);
    let err = RetryPolicy::immediate().run(|| generate(&b, &req)).unwrap_err();
    assert_eq!(err, BackendError::Status { status: 500, body: "c".into() });
}

#[test]
fn unreachable_is_connection_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let b = backend(&format!("http://127.0.0.1:{port}"), None);
    let err = generate(&b, &GenerationRequest::new("Q", 8)).unwrap_err();
    assert!(matches!(err, BackendError::Connection(_)), "{err:?}");
}

#[test]
fn error_chunk_is_reported() {
    let srv = serve(vec![Reply::Stream(vec![
        "data: {\"error\": {\"message\": \"overloaded\", \"code\": 429}}\n\n".into(),
    ])]);
    let err = generate(&backend(&srv.url, None), &GenerationRequest::new("Q", 8)).unwrap_err();
    assert!(matches!(err, BackendError::Status { .. }), "{err:?}");
}
