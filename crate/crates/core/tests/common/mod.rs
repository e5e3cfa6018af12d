//! A throwaway HTTP model service on a local port.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use serde_json::{json, Value};

pub struct Reply {
    pub status: u16,
    pub body: String,
}

impl Reply {
    pub fn ok(v: Value) -> Self {
        Reply {
            status: 200,
            body: v.to_string(),
        }
    }
}

pub struct MockService {
    pub url: String,
    pub hits: Arc<AtomicUsize>,
}

/// Serve until the test process exits. `handler(path, body, hit)` sees the
/// request path, its JSON body and a 0-based request counter.
pub fn serve<F>(handler: F) -> MockService
where
    F: Fn(&str, &Value, usize) -> Reply + Send + Sync + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    let handler = Arc::new(handler);
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let handler = handler.clone();
            let counter = counter.clone();
            thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                if reader.read_line(&mut request_line).is_err() {
                    return;
                }
                let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some((k, v)) = line.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap_or(0);
                        }
                    }
                }
                let mut body = vec![0; len];
                let _ = reader.read_exact(&mut body);
                let body: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
                let hit = counter.fetch_add(1, Ordering::SeqCst);
                let reply = handler(&path, &body, hit);
                let mut stream = stream;
                let _ = write!(
                    stream,
                    "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    reply.status,
                    reply.body.len(),
                    reply.body
                );
            });
        }
    });
    MockService { url, hits }
}

/// Answers with the first passage sentence that names the question's last
/// word; scores No when the prompt mentions losing.
pub fn keyword_service() -> MockService {
    serve(|path, body, _| match path {
        "/answer" => {
            let passage = body["passage"].as_str().unwrap_or("");
            let question = body["question"].as_str().unwrap_or("").trim_end_matches('?');
            let key = question.split_whitespace().last().unwrap_or("").to_lowercase();
            let answer = passage
                .split(". ")
                .find(|s| s.to_lowercase().contains(&key))
                .unwrap_or("");
            Reply::ok(json!({ "answer": answer }))
        }
        "/score" => {
            let prompt = body["prompt"].as_str().unwrap_or("").to_lowercase();
            let scores = if prompt.contains("lose") { [0.1, 0.9] } else { [0.8, 0.2] };
            Reply::ok(json!({ "scores": scores }))
        }
        _ => Reply {
            status: 404,
            body: "{}".into(),
        },
    })
}
