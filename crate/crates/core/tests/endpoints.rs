//! Endpoint clients against a scripted local HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};

use ragate_core::llm::openai::{OpenAiClient, OpenAiConfig};
use ragate_core::llm::{DecodeConfig, LanguageModel};
use ragate_core::model::validate_trace;
use ragate_core::retrieval::{RemoteSearch, Retriever};
use ragate_core::Error;

struct Server {
    base: String,
    requests: Arc<Mutex<Vec<(String, Value)>>>,
}

/// Serves the scripted `(status, body)` replies in order, one per connection,
/// and records each request line with its JSON body.
fn serve(replies: Vec<(u16, String)>) -> Server {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&requests);
    thread::spawn(move || {
        for (status, body) in replies {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let mut length = 0;
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                if h.trim().is_empty() {
                    break;
                }
                if let Some((k, v)) = h.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap();
                    }
                }
            }
            let mut payload = vec![0; length];
            reader.read_exact(&mut payload).unwrap();
            let parsed = serde_json::from_slice(&payload).unwrap_or(Value::Null);
            log.lock().unwrap().push((line.trim().to_owned(), parsed));
            let mut stream = stream;
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    Server { base, requests }
}

fn client(base: &str, attempts: u32) -> OpenAiClient {
    OpenAiClient::new(OpenAiConfig {
        api_base: base.to_owned(),
        api_key: Some("secret".into()),
        model: "test-model".into(),
        timeout_secs: 5,
        max_attempts: attempts,
    })
}

fn choice(tokens: &[(&str, f64)]) -> Value {
    let content: Vec<Value> = tokens
        .iter()
        .map(|(t, lp)| {
            json!({"token": t, "logprob": lp, "top_logprobs": [
                {"token": t, "logprob": lp},
                {"token": "other", "logprob": -3.0},
            ]})
        })
        .collect();
    json!({"message": {"content": ""}, "logprobs": {"content": content}})
}

fn chat(choices: Vec<Value>) -> String {
    json!({ "choices": choices }).to_string()
}

#[test]
fn greedy_completion_parses_logprobs() {
    let server = serve(vec![(200, chat(vec![choice(&[("Par", -0.1), ("is", -0.2)])]))]);
    let llm = client(&server.base, 1);
    let trace = llm.generate("Q: capital of France?", &DecodeConfig::greedy()).unwrap();
    assert_eq!(trace.text, "Paris");
    assert_eq!(trace.steps.len(), 2);
    assert!((trace.total_logprob + 0.3).abs() < 1e-12);
    assert!(validate_trace(&trace).is_empty());
    let reqs = server.requests.lock().unwrap();
    assert!(reqs[0].0.starts_with("POST /chat/completions"));
    assert_eq!(reqs[0].1["model"], "test-model");
    assert_eq!(reqs[0].1["logprobs"], true);
}

#[test]
fn server_errors_are_retried() {
    let server =
        serve(vec![(503, "busy".into()), (429, "slow down".into()), (200, chat(vec![choice(&[("yes", -0.5)])]))]);
    let trace = client(&server.base, 3).generate("p", &DecodeConfig::greedy()).unwrap();
    assert_eq!(trace.text, "yes");
    assert_eq!(server.requests.lock().unwrap().len(), 3);
}

#[test]
fn exhausted_retries_surface_a_transport_error() {
    let server = serve(vec![(500, "down".into()), (500, "down".into())]);
    let err = client(&server.base, 2).generate("p", &DecodeConfig::greedy()).unwrap_err();
    assert!(matches!(err, Error::Transport { attempts: 2, .. }), "{err}");
}

#[test]
fn missing_logprobs_is_a_configuration_error() {
    let body = chat(vec![json!({"message": {"content": "hi"}})]);
    let server = serve(vec![(200, body)]);
    let err = client(&server.base, 1).generate("p", &DecodeConfig::greedy()).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn refused_batch_falls_back_to_sequential_samples() {
    let mut replies = vec![(400, "n must be 1".to_owned())];
    for word in ["a", "b", "c"] {
        replies.push((200, chat(vec![choice(&[(word, -1.0)])])));
    }
    let server = serve(replies);
    let set = client(&server.base, 1).generate_n("p", &DecodeConfig::sampling(3)).unwrap();
    assert!(set.sequential_fallback);
    assert_eq!(set.texts(), vec!["a", "b", "c"]);
    let reqs = server.requests.lock().unwrap();
    assert_eq!(reqs[0].1["n"], 3);
    assert!(reqs[1..].iter().all(|(_, b)| b["n"] == 1));
}

#[test]
fn batched_samples_use_one_request() {
    let server = serve(vec![(200, chat(vec![choice(&[("x", -0.3)]), choice(&[("y", -0.9)])]))]);
    let set = client(&server.base, 1).generate_n("p", &DecodeConfig::sampling(2)).unwrap();
    assert!(!set.sequential_fallback);
    assert_eq!(set.texts(), vec!["x", "y"]);
    assert_eq!(server.requests.lock().unwrap().len(), 1);
}

#[test]
fn remote_search_ranks_and_remembers_documents() {
    let body = json!({"hits": [
        {"doc_id": "b", "score": 1.0, "title": "B", "body": "beta"},
        {"doc_id": "a", "score": 1.0, "title": "A", "body": "alpha"},
        {"doc_id": "c", "score": 3.0},
    ]})
    .to_string();
    let server = serve(vec![(200, body), (200, r#"{"hits": [{"doc_id": "z", "score": NaN}]}"#.into())]);
    let search = RemoteSearch::new(server.base.clone(), std::time::Duration::from_secs(5), 1);
    let hits = search.search("greek letters", 2).unwrap();
    let ids: Vec<&str> = hits.iter().map(|h| h.doc_id.as_str()).collect();
    assert_eq!(ids, vec!["c", "a"]);
    assert_eq!(search.document("a").unwrap().body, "alpha");
    assert!(search.document("c").is_none());
    assert!(search.search("again", 2).is_err());
    assert_eq!(search.calls(), 2);
    let reqs = server.requests.lock().unwrap();
    assert!(reqs[0].0.starts_with("GET /search?"), "{}", reqs[0].0);
}
