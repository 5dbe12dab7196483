mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::http::StatusCode as AxumStatus;
use axum::routing::post;
use axum::{Json, Router};
use hitloop_core::grammar::{parse_generation, ExportFormat};
use hitloop_core::orchestrator::adapter::{AdapterError, AuthorAdapter, GenerateRequest, GenerateResponse};
use hitloop_core::orchestrator::{Assignment, Orchestrator};
use hitloop_core::record::{GenerationChunk, PairRecord};
use hitloop_core::sim::{seed_version, MockAuthor, MockAuthorConfig, ScriptedReviewer, ScriptedReviewerConfig};
use hitloop_core::store::CorpusStore;
use hitloop_service::client::{AuthorClientConfig, HttpAuthor, NoAuthor};
use hitloop_service::{api, mock_server};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

fn mock_author_url(seed: u64) -> String {
    let author = MockAuthor::new(MockAuthorConfig { seed, ..Default::default() });
    common::spawn(mock_server::router(Arc::new(author)))
}

fn reviewer() -> ScriptedReviewer {
    ScriptedReviewer::new(ScriptedReviewerConfig::default(), Arc::new(MockAuthorConfig::default())).unwrap()
}

/// A store seeded with a frozen `V1` of 20 pairs.
fn seeded_store() -> Arc<CorpusStore> {
    let store = Arc::new(CorpusStore::in_memory());
    seed_version(&store, &MockAuthor::new(MockAuthorConfig::default()), &reviewer(), 20).unwrap();
    store
}

fn api_url(store: Arc<CorpusStore>, author: Arc<dyn AuthorAdapter>) -> String {
    common::spawn(api::router(Arc::new(Orchestrator::new(store, author))))
}

fn error_kind(response: reqwest::blocking::Response) -> String {
    let body: Value = response.json().unwrap();
    assert!(body["message"].is_string(), "{body}");
    body["error"].as_str().unwrap().to_string()
}

#[test]
fn quota_ten_loop_over_http_with_remote_author() {
    let author = HttpAuthor::new(&AuthorClientConfig::new(mock_author_url(3))).unwrap();
    let base = api_url(seeded_store(), Arc::new(author));
    let http = Client::new();

    let r = http.post(format!("{base}/loops")).json(&json!({"name": "V2", "strategy": "LAB", "quota": 10})).send().unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    let handle: Value = r.json().unwrap();
    assert_eq!(handle["version"]["predecessors"], json!(["V1"]));
    assert_eq!(handle["training_pairs"], 20);

    let mut reviewer = reviewer();
    let (mut accepted, mut reviewed, mut generated) = (0, 0, 0);
    while accepted < 10 {
        let r = http.get(format!("{base}/review/next?annotator=alice&loop=V2")).send().unwrap();
        if r.status() == StatusCode::NO_CONTENT {
            let r = http.post(format!("{base}/loops/V2/generate")).json(&json!({"n_chunks": 2})).send().unwrap();
            assert_eq!(r.status(), StatusCode::OK);
            let chunks: Vec<GenerationChunk> = serde_json::from_value(r.json::<Value>().unwrap()["chunks"].clone()).unwrap();
            assert_eq!(chunks.len(), 2);
            assert!(chunks.iter().all(|c| c.failure.is_none() && c.condition.starts_with("<|startofhs: ")));
            generated += 1;
            assert!(generated < 50, "loop does not converge");
            continue;
        }
        assert_eq!(r.status(), StatusCode::OK);
        let assignment: Assignment = r.json().unwrap();
        assert_eq!(assignment.lease.annotator, "alice");
        let decision = reviewer.review(&assignment.record, "alice");
        let r = http.post(format!("{base}/review/{}", assignment.record.id)).json(&decision).send().unwrap();
        assert_eq!(r.status(), StatusCode::OK, "{:?}", r.text());
        let record: PairRecord = r.json().unwrap();
        reviewed += 1;
        if record.is_accepted() {
            accepted += 1;
        }
    }

    let r = http.post(format!("{base}/loops/V2/close")).send().unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let closed: Value = r.json().unwrap();
    assert_eq!(closed["version"]["frozen"], true);
    assert_eq!(closed["report"]["counts"]["untouched"].as_u64().unwrap() + closed["report"]["counts"]["modified"].as_u64().unwrap(), 10);

    let r = http.get(format!("{base}/versions/V2/report")).send().unwrap();
    assert_eq!(r.headers()["content-type"], "application/json");
    let stored: Value = r.json().unwrap();
    assert_eq!(stored, closed["report"]);
    assert!(stored["counts"]["discarded_by_reviewer"].as_u64().unwrap() + 10 <= reviewed as u64);

    let r = http.get(format!("{base}/versions/V2/export?format=labeled")).send().unwrap();
    assert!(r.headers()["content-type"].to_str().unwrap().starts_with("text/plain"));
    let text = r.text().unwrap();
    let parsed = parse_generation(&text, ExportFormat::Labeled);
    assert!(parsed.diagnostics.is_empty());
    assert_eq!(parsed.candidates.len(), 30);
    assert!(parsed.candidates.iter().all(|c| c.label.is_some()));

    let versions: Value = http.get(format!("{base}/versions")).send().unwrap().json().unwrap();
    let names: Vec<&str> = versions.as_array().unwrap().iter().map(|v| v["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["V1", "V2"]);
    let v2: Value = http.get(format!("{base}/versions/V2")).send().unwrap().json().unwrap();
    assert_eq!(v2["quota"], 10);
}

#[test]
fn error_statuses() {
    let author = MockAuthor::new(MockAuthorConfig::default());
    let base = api_url(seeded_store(), Arc::new(author));
    let http = Client::new();
    let post = |path: &str, body: Value| http.post(format!("{base}{path}")).json(&body).send().unwrap();

    let r = http.get(format!("{base}/versions/V9")).send().unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
    assert_eq!(error_kind(r), "not_found");
    assert_eq!(http.get(format!("{base}/versions/V9/report")).send().unwrap().status(), StatusCode::NOT_FOUND);
    assert_eq!(post("/loops/V9/generate", json!({"n_chunks": 1})).status(), StatusCode::NOT_FOUND);

    // Bad loop requests.
    assert_eq!(post("/loops", json!({"name": "V2", "strategy": "SBF"})).status(), StatusCode::BAD_REQUEST);
    assert_eq!(post("/loops", json!({"name": "V2", "strategy": "NOPE"})).status(), StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(post("/loops", json!({"name": "V2", "strategy": "PLAIN", "colour": 1})).status(), StatusCode::UNPROCESSABLE_ENTITY);
    let r = post("/loops", json!({"name": "V2", "strategy": "SBF", "pool": "nonsense-label\tsome text"}));
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let r = post("/loops", json!({"name": "V1", "strategy": "PLAIN"}));
    assert_eq!(r.status(), StatusCode::CONFLICT);

    assert_eq!(post("/loops", json!({"name": "V2", "strategy": "PLAIN", "quota": 1})).status(), StatusCode::CREATED);
    // V2 is still open, so a loop on top of it is refused.
    assert_eq!(post("/loops", json!({"name": "V3", "strategy": "PLAIN"})).status(), StatusCode::CONFLICT);
    assert_eq!(http.get(format!("{base}/versions/V2/report")).send().unwrap().status(), StatusCode::CONFLICT);
    assert_eq!(post("/loops/V2/generate", json!({"n_chunks": 0})).status(), StatusCode::BAD_REQUEST);
    let r = post("/loops/V2/close", json!({}));
    assert_eq!(r.status(), StatusCode::CONFLICT);

    assert_eq!(post("/loops/V2/generate", json!({"n_chunks": 1})).status(), StatusCode::OK);
    let a: Assignment = http.get(format!("{base}/review/next?annotator=ann")).send().unwrap().json().unwrap();
    let id = a.record.id.clone();

    // Someone else's lease.
    let r = post(&format!("/review/{id}"), json!({"verdict": "UNTOUCHED", "target": "WOMEN", "annotator": "mallory"}));
    assert_eq!(r.status(), StatusCode::CONFLICT);
    assert_eq!(error_kind(r), "stale_lease");
    // Malformed verdicts.
    let r = post(&format!("/review/{id}"), json!({"verdict": "UNTOUCHED", "annotator": "ann"}));
    assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY);
    let r = post(&format!("/review/{id}"), json!({"verdict": "UNTOUCHED", "target": "WOMEN", "annotator": "ann", "pair_id": "other"}));
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let r = post(&format!("/review/{id}"), json!({"verdict": "MAYBE", "annotator": "ann"}));
    assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(post("/review/ghost", json!({"verdict": "DISCARDED", "annotator": "ann"})).status(), StatusCode::NOT_FOUND);

    let r = post(&format!("/review/{id}"), json!({"verdict": "UNTOUCHED", "target": "WOMEN", "annotator": "ann", "elapsed_seconds": 12.5}));
    assert_eq!(r.status(), StatusCode::OK);
    // The quota of one is reached: no more work, a second accept is refused.
    assert_eq!(http.get(format!("{base}/review/next?annotator=ann")).send().unwrap().status(), StatusCode::NO_CONTENT);
    assert_eq!(post(&format!("/review/{id}"), json!({"verdict": "DISCARDED", "annotator": "ann"})).status(), StatusCode::CONFLICT);

    assert_eq!(http.get(format!("{base}/versions/V1/export?format=xml")).send().unwrap().status(), StatusCode::BAD_REQUEST);
    assert_eq!(post("/loops/V2/close", json!({})).status(), StatusCode::OK);
    let plain = http.get(format!("{base}/versions/V2/export")).send().unwrap().text().unwrap();
    assert_eq!(plain.lines().count(), 21);
    assert!(plain.lines().all(|l| l.starts_with("<|startofhs|> ")));
    assert_eq!(post("/loops/V2/close", json!({})).status(), StatusCode::NOT_FOUND);
}

#[test]
fn unreachable_author_marks_chunks_failed() {
    let base = api_url(seeded_store(), Arc::new(NoAuthor));
    let http = Client::new();
    http.post(format!("{base}/loops")).json(&json!({"name": "V2", "strategy": "PLAIN"})).send().unwrap();
    let r: Value = http.post(format!("{base}/loops/V2/generate")).json(&json!({"n_chunks": 3})).send().unwrap().json().unwrap();
    let chunks = r["chunks"].as_array().unwrap();
    assert_eq!(chunks.len(), 3);
    assert!(chunks.iter().all(|c| c["failure"].is_string() && c["admitted"] == 0));
}

// ------------------------------------------------------------ wire protocol

#[test]
fn mock_author_speaks_the_wire_protocol() {
    let url = mock_author_url(1);
    let http = Client::new();
    for condition in ["<|startofhs|>", "<|startofhs: JEWS|>", "<|startofhs|> migrants take our jobs"] {
        let r = http
            .post(format!("{url}/generate"))
            .json(&json!({"condition": condition, "n_chunks": 3, "max_tokens": 256}))
            .send()
            .unwrap();
        assert_eq!(r.status(), StatusCode::OK);
        let body: Value = r.json().unwrap();
        assert_eq!(body.as_object().unwrap().keys().collect::<Vec<_>>(), ["chunks"]);
        let chunks = body["chunks"].as_array().unwrap();
        assert_eq!(chunks.len(), 3);
        let format = if condition.contains(':') { ExportFormat::Labeled } else { ExportFormat::Plain };
        for c in chunks {
            let out = parse_generation(c.as_str().unwrap(), format);
            assert!(out.diagnostics.is_empty() && !out.candidates.is_empty());
        }
    }
    let send = |body: Value| http.post(format!("{url}/generate")).json(&body).send().unwrap().status();
    assert!(send(json!({"condition": "<|startofhs|>", "n_chunks": 3})).is_client_error());
    assert!(send(json!({"condition": "<|startofhs|>", "n_chunks": -1, "max_tokens": 5})).is_client_error());
    assert_eq!(send(json!({"condition": "<|startofhs|>", "n_chunks": 5000, "max_tokens": 5})), StatusCode::BAD_REQUEST);
    assert_eq!(http.get(format!("{url}/health")).send().unwrap().text().unwrap(), "ok");
}

fn request(n: usize) -> GenerateRequest {
    GenerateRequest { condition: "<|startofhs|>".into(), n_chunks: n, max_tokens: 64 }
}

/// Author that answers 500 for the first `failures` calls.
fn flaky_author(failures: usize) -> (String, Arc<AtomicUsize>) {
    let calls = Arc::new(AtomicUsize::new(0));
    let seen = calls.clone();
    let app = Router::new().route(
        "/generate",
        post(move |Json(req): Json<GenerateRequest>| {
            let calls = seen.clone();
            async move {
                if calls.fetch_add(1, Ordering::SeqCst) < failures {
                    return Err((AxumStatus::INTERNAL_SERVER_ERROR, "warming up"));
                }
                let chunks = vec!["<|startofhs|> a <|endofhs|> <|startofcn|> b <|endofcn|>".to_string(); req.n_chunks];
                Ok(Json(GenerateResponse { chunks }))
            }
        }),
    );
    (common::spawn(app), calls)
}

#[test]
fn client_retries_server_errors() {
    let (url, calls) = flaky_author(2);
    let author = HttpAuthor::new(&AuthorClientConfig { url, timeout_secs: 5, retries: 2 }).unwrap();
    assert_eq!(author.generate(&request(2)).unwrap().chunks.len(), 2);
    assert_eq!(calls.load(Ordering::SeqCst), 3);

    let (url, calls) = flaky_author(5);
    let author = HttpAuthor::new(&AuthorClientConfig { url, timeout_secs: 5, retries: 1 }).unwrap();
    assert!(matches!(author.generate(&request(1)), Err(AdapterError::Protocol(_))));
    assert_eq!(calls.load(Ordering::SeqCst), 2);
}

#[test]
fn client_reports_timeouts_and_bad_bodies() {
    let slow = Router::new().route(
        "/generate",
        post(|| async {
            tokio::time::sleep(Duration::from_secs(3)).await;
            "{}"
        }),
    );
    let author = HttpAuthor::new(&AuthorClientConfig { url: common::spawn(slow), timeout_secs: 1, retries: 0 }).unwrap();
    assert_eq!(author.generate(&request(1)), Err(AdapterError::Timeout));

    let calls = Arc::new(AtomicUsize::new(0));
    let seen = calls.clone();
    let garbage = Router::new().route(
        "/generate",
        post(move || {
            seen.fetch_add(1, Ordering::SeqCst);
            async { "{\"pieces\": []}" }
        }),
    );
    let author = HttpAuthor::new(&AuthorClientConfig { url: common::spawn(garbage), timeout_secs: 5, retries: 3 }).unwrap();
    assert!(matches!(author.generate(&request(1)), Err(AdapterError::Protocol(_))));
    assert_eq!(calls.load(Ordering::SeqCst), 1, "bad bodies are not retried");

    let closed = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let dead = format!("http://{}", closed.local_addr().unwrap());
    drop(closed);
    let author = HttpAuthor::new(&AuthorClientConfig { url: dead, timeout_secs: 1, retries: 0 }).unwrap();
    assert!(matches!(author.generate(&request(1)), Err(AdapterError::Transport(_))));
}

#[test]
fn short_author_answers_fail_the_chunk() {
    let app = Router::new().route(
        "/generate",
        post(|| async { Json(json!({"chunks": ["<|startofhs|> a <|endofhs|> <|startofcn|> b <|endofcn|>"]})) }),
    );
    let author = HttpAuthor::new(&AuthorClientConfig::new(common::spawn(app))).unwrap();
    let store = seeded_store();
    let o = Orchestrator::new(store, Arc::new(author));
    o.start_loop("V2", hitloop_core::orchestrator::LoopConfig::new("PLAIN".parse().unwrap()), None).unwrap();
    let chunks = o.request_generation("V2", 3).unwrap();
    assert_eq!(chunks.len(), 3);
    assert!(chunks.iter().all(|c| c.failure.as_deref().is_some_and(|f| f.contains("protocol"))), "{chunks:?}");
}
