//! Contract tests for the HTTP embedding and summarisation paths,
//! exercised against a local stub endpoint.

mod common;

use std::time::Duration;

use common::StubServer;
use textclust::corpus::Document;
use textclust::llm::{
    DecodeParams, EmbeddingSource, EmbeddingSourceKind, HttpEndpoint, LlmClient, LlmError,
    RetryPolicy, SummariserConfig, DEFAULT_PROMPT_TEMPLATE,
};

fn fast_client(cache_dir: &std::path::Path) -> LlmClient {
    LlmClient::with_retry(
        cache_dir,
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(1),
        },
    )
    .unwrap()
}

fn http_source(server: &StubServer, batch_size: usize) -> EmbeddingSource {
    EmbeddingSource {
        kind: EmbeddingSourceKind::Http(HttpEndpoint {
            url: server.url("/v1/embeddings"),
            model_id: "stub-embed".into(),
            api_key_env: None,
            batch_size,
        }),
        model_name: "stub".into(),
        family: None,
    }
}

/// Stub that derives a deterministic vector from each input text.
fn echo_embeddings(_: usize, body: &serde_json::Value) -> (u16, serde_json::Value) {
    let inputs = body["input"].as_array().expect("input array");
    let data: Vec<serde_json::Value> = inputs
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let text = text.as_str().unwrap();
            let checksum = text.bytes().map(|b| b as f64).sum::<f64>();
            serde_json::json!({"index": i, "embedding": [checksum, text.len() as f64]})
        })
        .collect();
    (200, serde_json::json!({"data": data}))
}

fn expected_vector(text: &str) -> Vec<f64> {
    vec![text.bytes().map(|b| b as f64).sum::<f64>(), text.len() as f64]
}

#[test]
fn empty_batch_makes_no_requests() {
    let dir = tempfile::tempdir().unwrap();
    let server = StubServer::start(echo_embeddings);
    let client = fast_client(dir.path());
    let out = client.embed_batch(&[], &http_source(&server, 4)).unwrap();
    assert!(out.is_empty());
    assert_eq!(server.hits(), 0);
}

#[test]
fn batch_preserves_order() {
    let dir = tempfile::tempdir().unwrap();
    let server = StubServer::start(echo_embeddings);
    let client = fast_client(dir.path());
    let texts: Vec<String> = vec!["alpha".into(), "beta".into(), "gamma".into()];
    let out = client.embed_batch(&texts, &http_source(&server, 8)).unwrap();
    assert_eq!(out.len(), 3);
    for (text, vector) in texts.iter().zip(&out) {
        assert_eq!(vector, &expected_vector(text));
    }
    assert_eq!(server.hits(), 1);
}

#[test]
fn identical_texts_hit_cache_not_network() {
    let dir = tempfile::tempdir().unwrap();
    let server = StubServer::start(echo_embeddings);
    let client = fast_client(dir.path());
    let source = http_source(&server, 8);

    let texts = vec!["same text".to_string(), "same text".to_string()];
    let out = client.embed_batch(&texts, &source).unwrap();
    assert_eq!(out[0], out[1]);
    assert_eq!(server.hits(), 1);
    // only the single distinct text went over the wire
    assert_eq!(server.requests()[0]["input"].as_array().unwrap().len(), 1);

    // a later call — and even a fresh client on the same cache — is free
    let out2 = client.embed_batch(&texts, &source).unwrap();
    assert_eq!(out2, out);
    assert_eq!(server.hits(), 1);
    let fresh = fast_client(dir.path());
    let out3 = fresh.embed_batch(&texts, &source).unwrap();
    assert_eq!(out3, out);
    assert_eq!(server.hits(), 1);
}

#[test]
fn requests_are_chunked_by_batch_size() {
    let dir = tempfile::tempdir().unwrap();
    let server = StubServer::start(echo_embeddings);
    let client = fast_client(dir.path());
    let texts: Vec<String> = (0..5).map(|i| format!("text number {i}")).collect();
    let out = client.embed_batch(&texts, &http_source(&server, 2)).unwrap();
    assert_eq!(out.len(), 5);
    assert_eq!(server.hits(), 3); // 2 + 2 + 1
    for request in server.requests() {
        assert!(request["input"].as_array().unwrap().len() <= 2);
    }
}

#[test]
fn transient_failures_are_retried_with_backoff() {
    let dir = tempfile::tempdir().unwrap();
    let server = StubServer::start(|index, body| {
        if index < 2 {
            (500, serde_json::json!({"error": "boom"}))
        } else {
            echo_embeddings(index, body)
        }
    });
    let client = fast_client(dir.path());
    let out = client
        .embed_batch(&["hello".to_string()], &http_source(&server, 4))
        .unwrap();
    assert_eq!(out[0], expected_vector("hello"));
    assert_eq!(server.hits(), 3);
}

#[test]
fn persistent_server_errors_surface_as_transient() {
    let dir = tempfile::tempdir().unwrap();
    let server = StubServer::start(|_, _| (503, serde_json::json!({"error": "down"})));
    let client = fast_client(dir.path());
    let err = client
        .embed_batch(&["hello".to_string()], &http_source(&server, 4))
        .unwrap_err();
    assert!(err.is_transient(), "{err}");
    assert_eq!(server.hits(), 3); // exhausted the attempt budget
}

#[test]
fn client_errors_are_fatal_and_not_retried() {
    let dir = tempfile::tempdir().unwrap();
    let server = StubServer::start(|_, _| (400, serde_json::json!({"error": "bad model"})));
    let client = fast_client(dir.path());
    let err = client
        .embed_batch(&["hello".to_string()], &http_source(&server, 4))
        .unwrap_err();
    assert!(matches!(err, LlmError::Config(_)), "{err}");
    assert!(!err.is_transient());
    assert_eq!(server.hits(), 1);
}

#[test]
fn api_key_is_sent_as_bearer_header() {
    let dir = tempfile::tempdir().unwrap();
    let server = StubServer::start(echo_embeddings);
    std::env::set_var("TEXTCLUST_TEST_API_KEY", "sk-test-123");
    let mut source = http_source(&server, 4);
    if let EmbeddingSourceKind::Http(endpoint) = &mut source.kind {
        endpoint.api_key_env = Some("TEXTCLUST_TEST_API_KEY".into());
    }
    let client = fast_client(dir.path());
    client.embed_batch(&["hi there".to_string()], &source).unwrap();
    let headers = server.headers();
    assert!(headers[0]
        .iter()
        .any(|h| h.eq_ignore_ascii_case("authorization: bearer sk-test-123")));

    // a declared but unset variable is a configuration error
    if let EmbeddingSourceKind::Http(endpoint) = &mut source.kind {
        endpoint.api_key_env = Some("TEXTCLUST_TEST_API_KEY_MISSING".into());
    }
    let err = client
        .embed_batch(&["other".to_string()], &source)
        .unwrap_err();
    assert!(matches!(err, LlmError::Config(_)));
}

fn summariser(server: &StubServer) -> SummariserConfig {
    SummariserConfig {
        endpoint: HttpEndpoint {
            url: server.url("/v1/chat/completions"),
            model_id: "stub-chat".into(),
            api_key_env: None,
            batch_size: 1,
        },
        max_input_tokens: 4096,
        prompt_template: DEFAULT_PROMPT_TEMPLATE.to_string(),
        decode: DecodeParams::default(),
    }
}

fn fixed_summary(_: usize, _: &serde_json::Value) -> (u16, serde_json::Value) {
    (
        200,
        serde_json::json!({"choices": [{"message": {"role": "assistant", "content": "S."}}]}),
    )
}

fn doc(text: &str) -> Document {
    Document {
        id: "doc-1".into(),
        text: text.into(),
        label: "news".into(),
        label2: Some("sports".into()),
    }
}

#[test]
fn summarise_replaces_text_and_keeps_identity() {
    let dir = tempfile::tempdir().unwrap();
    let server = StubServer::start(fixed_summary);
    let client = fast_client(dir.path());
    let out = client.summarise(&doc("A long article."), &summariser(&server)).unwrap();
    assert_eq!(out.text, "S.");
    assert_eq!(out.id, "doc-1");
    assert_eq!(out.label, "news");
    assert_eq!(out.label2.as_deref(), Some("sports"));
}

#[test]
fn summarise_sends_the_verbatim_prompt_and_decode_params() {
    let dir = tempfile::tempdir().unwrap();
    let server = StubServer::start(fixed_summary);
    let client = fast_client(dir.path());
    let cfg = summariser(&server);
    client.summarise(&doc("Hello world"), &cfg).unwrap();

    let body = &server.requests()[0];
    let expected_prompt = DEFAULT_PROMPT_TEMPLATE.replacen("{text}", "Hello world", 1);
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(body["messages"][0]["content"], expected_prompt.as_str());
    assert_eq!(body["model"], "stub-chat");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["max_tokens"], 800);
    assert_eq!(body["do_sample"], true);
    assert_eq!(body["top_k"], 10);
    assert_eq!(body["num_return_sequences"], 1);
}

#[test]
fn summarise_truncates_input_to_the_token_budget() {
    let dir = tempfile::tempdir().unwrap();
    let server = StubServer::start(fixed_summary);
    let client = fast_client(dir.path());
    let cfg = summariser(&server); // max_input_tokens = 4096

    let words: Vec<String> = (0..10_000).map(|i| format!("w{i}")).collect();
    client.summarise(&doc(&words.join(" ")), &cfg).unwrap();

    let body = &server.requests()[0];
    let expected_text = words[..4096].join(" ");
    let expected_prompt = DEFAULT_PROMPT_TEMPLATE.replacen("{text}", &expected_text, 1);
    assert_eq!(body["messages"][0]["content"], expected_prompt.as_str());
}

#[test]
fn summarise_is_cached_per_document() {
    let dir = tempfile::tempdir().unwrap();
    let server = StubServer::start(fixed_summary);
    let client = fast_client(dir.path());
    let cfg = summariser(&server);
    let d = doc("An article to summarise twice.");
    let first = client.summarise(&d, &cfg).unwrap();
    let second = client.summarise(&d, &cfg).unwrap();
    assert_eq!(first, second);
    assert_eq!(server.hits(), 1);
}

#[test]
fn unsummarised_documents_fall_back_to_original_text() {
    use textclust::corpus::Corpus;
    let dir = tempfile::tempdir().unwrap();
    // first document fails all attempts, the second succeeds
    let server = StubServer::start(|index, body| {
        if index < 3 {
            (500, serde_json::json!({"error": "overloaded"}))
        } else {
            fixed_summary(index, body)
        }
    });
    let client = fast_client(dir.path());
    let corpus = Corpus::new(
        "c",
        vec![
            Document {
                id: "a".into(),
                text: "first text".into(),
                label: "x".into(),
                label2: None,
            },
            Document {
                id: "b".into(),
                text: "second text".into(),
                label: "y".into(),
                label2: None,
            },
        ],
    )
    .unwrap();
    let (out, unsummarised) = client.summarise_corpus(&corpus, &summariser(&server)).unwrap();
    assert_eq!(unsummarised, vec!["a".to_string()]);
    assert_eq!(out.documents()[0].text, "first text"); // fallback
    assert_eq!(out.documents()[1].text, "S.");
}
