use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use kgreason::llm::{ChatClient, HttpBackend, LlmError, RequestTemplate, RetryPolicy};

/// Serves the canned `(status, body)` responses in order, one per connection,
/// and records each request body.
fn serve(responses: Vec<(u16, &'static str)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0usize;
            let mut auth = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = line.trim().to_string();
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut request_body = vec![0; length];
            reader.read_exact(&mut request_body).unwrap();
            log.lock()
                .unwrap()
                .push(format!("{auth}|{}", String::from_utf8(request_body).unwrap()));
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        max_attempts: 5,
        base_delay: Duration::from_millis(5),
        max_delay: Duration::from_millis(20),
    }
}

const OK_BODY: &str = r#"{"choices":[{"message":{"role":"assistant","content":"dbr:Brad_Pitt"}}]}"#;

#[test]
fn server_error_is_retried() {
    let (url, seen) = serve(vec![(500, "{}"), (503, "{}"), (200, OK_BODY)]);
    let backend = HttpBackend::new(url, Some("secret".into()), Duration::from_secs(5), fast_retry());
    let request = RequestTemplate::new("gpt-4").request("Complete the following DBPedia relation:\ndbr:Moneyball_(film) - dbo:starring - ");
    assert_eq!(backend.complete(&request, 0).unwrap(), "dbr:Brad_Pitt");
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    assert!(seen[0].to_ascii_lowercase().starts_with("authorization: bearer secret|"), "{}", seen[0]);
    let body: serde_json::Value = serde_json::from_str(seen[0].split_once('|').unwrap().1).unwrap();
    assert_eq!(body["model"], "gpt-4");
    assert_eq!(body["temperature"], 0.0);
}

#[test]
fn client_error_fails_fast_with_body() {
    let (url, seen) = serve(vec![(400, r#"{"error":"bad model"}"#)]);
    let backend = HttpBackend::new(url, None, Duration::from_secs(5), fast_retry());
    let request = RequestTemplate::new("nope").request("hi");
    match backend.complete(&request, 0) {
        Err(LlmError::Client { status, body }) => {
            assert_eq!(status, 400);
            assert!(body.contains("bad model"));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn retries_are_bounded() {
    let (url, seen) = serve(vec![(429, "{}"); 3]);
    let policy = RetryPolicy {
        max_attempts: 3,
        ..fast_retry()
    };
    let backend = HttpBackend::new(url, None, Duration::from_secs(5), policy);
    let request = RequestTemplate::new("m").request("hi");
    assert!(matches!(
        backend.complete(&request, 0),
        Err(LlmError::RetriesExhausted { attempts: 3, .. })
    ));
    assert_eq!(seen.lock().unwrap().len(), 3);
}
