//! OpenAI-compatible chat and embedding clients against a local fake server.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use aerkit::cache::ContentCache;
use aerkit::embedding::{Embedder, RemoteEmbedder};
use aerkit::llm::{ChatRequest, LlmBackend, LlmSettings, OpenAiChat};
use aerkit::retry::RetryPolicy;
use aerkit::{EmbeddingVector64, Error};

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    authorization: Option<String>,
    body: serde_json::Value,
}

struct FakeServer {
    url: String,
    seen: Arc<Mutex<Vec<Seen>>>,
}

/// Serves `replies` in order, one per connection, then answers 500.
fn serve(replies: Vec<(u16, String)>) -> FakeServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    let mut queue: VecDeque<(u16, String)> = replies.into();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut length = 0;
            let mut authorization = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap();
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => length = value.trim().parse().unwrap(),
                    "authorization" => authorization = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(Seen {
                path: request_line.split_whitespace().nth(1).unwrap_or("").to_string(),
                authorization,
                body: serde_json::from_slice(&body).unwrap_or_default(),
            });
            let (status, text) = queue.pop_front().unwrap_or((500, "exhausted".into()));
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
        }
    });
    FakeServer { url, seen }
}

fn completion(content: &str) -> (u16, String) {
    (200, serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string())
}

fn request() -> ChatRequest {
    ChatRequest {
        system_text: "sys".into(),
        user_text: "Target utterance: A: hi".into(),
        max_tokens: 16,
        subject: Some("c#0".into()),
        round_index: 0,
    }
}

fn backend(url: &str, budget: u32) -> LlmBackend {
    let chat = OpenAiChat::new(url, "llama", Some("sk-test".into()), Duration::from_secs(5));
    LlmBackend::new(Arc::new(chat), LlmSettings::default(), RetryPolicy::immediate(budget)).unwrap()
}

#[test]
fn chat_request_shape_and_verbatim_answer() {
    let server = serve(vec![completion(" Happy.\n")]);
    let ex = backend(&server.url, 0).complete_request(&request()).unwrap();
    assert_eq!(ex.response_text, " Happy.\n");
    assert!(!ex.cached);
    let seen = server.seen.lock().unwrap();
    assert_eq!(seen.len(), 1);
    assert_eq!(seen[0].path, "/v1/chat/completions");
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer sk-test"));
    let body = &seen[0].body;
    assert_eq!(body["model"], "llama");
    assert_eq!(body["temperature"], 0.0001);
    assert_eq!(body["max_tokens"], 16);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][0]["content"], "sys");
    assert_eq!(body["messages"][1]["role"], "user");
    assert_eq!(body["messages"][1]["content"], "Target utterance: A: hi");
    assert!(body.get("subject").is_none());
}

#[test]
fn server_errors_are_retried_within_budget() {
    let server = serve(vec![(503, "busy".into()), (429, "slow down".into()), completion("sad")]);
    let llm = backend(&server.url, 2);
    assert_eq!(llm.complete_request(&request()).unwrap().response_text, "sad");
    assert_eq!(llm.transport_calls(), 3);
}

#[test]
fn exhausted_budget_surfaces_the_transport_error() {
    let server = serve(vec![(503, "busy".into()), (503, "busy".into())]);
    let err = backend(&server.url, 1).complete_request(&request()).unwrap_err();
    assert!(matches!(err, Error::Transport { retryable: true, .. }), "{err}");
}

#[test]
fn client_errors_are_not_retried() {
    let server = serve(vec![(400, "bad request".into()), completion("happy")]);
    let llm = backend(&server.url, 3);
    let err = llm.complete_request(&request()).unwrap_err();
    assert!(matches!(err, Error::Transport { retryable: false, .. }), "{err}");
    assert_eq!(llm.transport_calls(), 1);
}

#[test]
fn malformed_body_is_reported() {
    let server = serve(vec![(200, "{\"choices\": []}".into()), (200, "not json".into())]);
    let llm = backend(&server.url, 0);
    assert!(matches!(llm.complete_request(&request()), Err(Error::MalformedResponse(_))));
    assert!(matches!(llm.complete_request(&request()), Err(Error::MalformedResponse(_))));
}

#[test]
fn cached_answers_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let server = serve(vec![completion("angry")]);
    let first = backend(&server.url, 0).with_cache(ContentCache::open(Some(dir.path()), "llm").unwrap());
    assert!(!first.complete_request(&request()).unwrap().cached);
    assert!(first.complete_request(&request()).unwrap().cached);
    let second = backend(&server.url, 0).with_cache(ContentCache::open(Some(dir.path()), "llm").unwrap());
    let ex = second.complete_request(&request()).unwrap();
    assert!(ex.cached);
    assert_eq!(ex.response_text, "angry");
    assert_eq!(second.transport_calls(), 0);
    assert_eq!(server.seen.lock().unwrap().len(), 1);
}

#[test]
fn embeddings_are_batched_reordered_and_normalized() {
    let server = serve(vec![
        (200, r#"{"data": [{"index": 1, "embedding": [0, 2, 0]}, {"index": 0, "embedding": [3, 0, 4]}]}"#.into()),
        (200, r#"{"data": [{"index": 0, "embedding": [0, 0, -5]}]}"#.into()),
    ]);
    let url = format!("{}/v1/embeddings", server.url);
    let remote = RemoteEmbedder::new(url, "minilm", None, 3, Duration::from_secs(5));
    let embedder = Embedder::new(Arc::new(remote), 3, ContentCache::in_memory(), RetryPolicy::immediate(0))
        .unwrap()
        .with_batch_size(2);
    let out: Vec<EmbeddingVector64> = embedder.embed_texts(&["a", "b", "c", "a"]).unwrap();
    assert_eq!(out[0].as_slice(), [0.6, 0.0, 0.8]);
    assert_eq!(out[1].as_slice(), [0.0, 1.0, 0.0]);
    assert_eq!(out[2].as_slice(), [0.0, 0.0, -1.0]);
    assert_eq!(out[3], out[0]);
    let seen = server.seen.lock().unwrap();
    assert_eq!(seen.len(), 2);
    assert_eq!(seen[0].body["input"], serde_json::json!(["a", "b"]));
    assert_eq!(seen[0].body["model"], "minilm");
    assert_eq!(seen[1].body["input"], serde_json::json!(["c"]));
}

#[test]
fn zero_vector_from_the_service_is_rejected() {
    let server = serve(vec![(200, r#"{"data": [{"index": 0, "embedding": [0, 0, 0]}]}"#.into())]);
    let remote = RemoteEmbedder::new(server.url.clone(), "m", None, 3, Duration::from_secs(5));
    let embedder = Embedder::new(Arc::new(remote), 3, ContentCache::in_memory(), RetryPolicy::immediate(0)).unwrap();
    assert!(matches!(embedder.embed_one::<f32>("x"), Err(Error::DegenerateVector)));
}
