//! Streams a completion from an OpenAI-compatible chat endpoint, stopping
//! at the end-of-think marker. Uses `M1_BASE_URL` (and `M1_API_KEY`) when
//! set; otherwise serves one canned streamed reply from a local socket.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;

use ttscale::budget::{ANSWER_MARKER, THINK_MARKER};
use ttscale::client::{stream_generate, ChatBackend, ChatConfig, GenerationRequest, BASE_URL_ENV};

fn local_server() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut line = String::new();
        // Headers only; the body is left unread.
        while reader.read_line(&mut line).unwrap() > 2 {
            line.clear();
        }
        let mut w = stream;
        write!(w, "HTTP/1.1 200 OK\r\nContent-Type: text/event-stream\r\nConnection: close\r\n\r\n").unwrap();
        for piece in ["Lateral", " medullary", " syndrome", " fits.", " <|im_st", "art|>answer", " \\boxed{C}"] {
            let chunk = serde_json::json!({"choices": [{"delta": {"content": piece}}]});
            write!(w, "data: {chunk}\n\n").unwrap();
            w.flush().unwrap();
        }
        write!(w, "data: [DONE]\n\n").unwrap();
    });
    url
}

fn main() {
    let url = std::env::var(BASE_URL_ENV).unwrap_or_else(|_| local_server());
    let backend = ChatBackend::new(ChatConfig::new(&url, "m1-7b-23k").with_env_key()).expect("client");
    let req = GenerationRequest::new("Vertigo, ipsilateral Horner sign and contralateral pain loss. Diagnosis?", 256)
        .with_prefill(format!("{THINK_MARKER}\n"))
        .with_stop(ANSWER_MARKER);

    let mut stream = stream_generate(&backend, &req).expect("request");
    for event in stream.by_ref() {
        match event {
            Ok(ev) => println!("{:>3} {:?}{}", ev.ordinal, ev.text, ev.cause.map(|c| format!("  [{c:?}]")).unwrap_or_default()),
            Err(e) => {
                eprintln!("stream failed: {e}");
                std::process::exit(1);
            }
        }
    }
    println!("stopped: {:?}", stream.cause());
}
