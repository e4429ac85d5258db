use std::net::SocketAddr;
use std::time::{Duration, Instant};

use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};

use coursemate_core::index::{EmbedError, EmbeddingProvider};
use coursemate_core::rag::{BackendError, BackendKind, GenerationBackend, GenerationRequest, GenerationResponse};
use coursemate_service::adapters::{EmbedRequest, EmbedResponse, ExternalBackend, HttpEmbeddingProvider};

const KEY: &str = "test-key";

fn authorized(headers: &HeaderMap) -> bool {
    headers.get("authorization").and_then(|v| v.to_str().ok()) == Some(&format!("Bearer {KEY}"))
}

async fn generate(headers: HeaderMap, Json(req): Json<GenerationRequest>) -> Result<Json<GenerationResponse>, StatusCode> {
    if !authorized(&headers) {
        return Err(StatusCode::UNAUTHORIZED);
    }
    Ok(Json(GenerationResponse {
        body: format!("{} context passages; asked: {}", req.context_texts.len(), req.user_text),
    }))
}

async fn embed(Json(req): Json<EmbedRequest>) -> Json<EmbedResponse> {
    Json(EmbedResponse {
        embedding: vec![req.input.len() as f32, 0.0, 0.0, 0.0],
    })
}

/// Serves the mock endpoints on a runtime owned by a background thread.
fn mock_server() -> SocketAddr {
    let app = Router::new()
        .route("/generate", post(generate))
        .route("/fail", post(|| async { (StatusCode::SERVICE_UNAVAILABLE, "model overloaded") }))
        .route(
            "/slow",
            post(|| async {
                tokio::time::sleep(Duration::from_secs(3)).await;
                Json(GenerationResponse { body: "late".into() })
            }),
        )
        .route("/garbage", post(|| async { "not json" }))
        .route("/embed", post(embed))
        .route("/embed-short", post(|| async { Json(EmbedResponse { embedding: vec![1.0, 2.0] }) }));
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

fn request() -> GenerationRequest {
    GenerationRequest {
        system_directive: "Answer in English.".into(),
        user_text: "What is a loop?".into(),
        context_texts: vec!["A loop repeats code.".into(), "A for loop has three parts.".into()],
    }
}

#[test]
fn external_backend_round_trip() {
    let addr = mock_server();
    let backend = ExternalBackend::new(format!("http://{addr}/generate"), KEY, 2_000);
    assert_eq!(backend.kind(), BackendKind::External);
    let resp = backend.generate(&request()).unwrap();
    assert_eq!(resp.body, "2 context passages; asked: What is a loop?");

    let wrong_key = ExternalBackend::new(format!("http://{addr}/generate"), "nope", 2_000);
    let err = wrong_key.generate(&request()).unwrap_err();
    assert!(matches!(&err, BackendError::Failed(m) if m.contains("401")), "{err}");
}

#[test]
fn external_backend_errors_carry_status_and_endpoint() {
    let addr = mock_server();
    let url = format!("http://{addr}/fail");
    let err = ExternalBackend::new(url.clone(), KEY, 2_000).generate(&request()).unwrap_err();
    match err {
        BackendError::Failed(m) => {
            assert!(m.contains(&url), "{m}");
            assert!(m.contains("503"), "{m}");
            assert!(m.contains("model overloaded"), "{m}");
        }
        other => panic!("expected a failure, got {other:?}"),
    }

    let err = ExternalBackend::new(format!("http://{addr}/garbage"), KEY, 2_000)
        .generate(&request())
        .unwrap_err();
    assert!(matches!(&err, BackendError::Failed(m) if m.contains("invalid response body")), "{err}");
}

#[test]
fn external_backend_times_out() {
    let addr = mock_server();
    let backend = ExternalBackend::new(format!("http://{addr}/slow"), KEY, 300);
    let started = Instant::now();
    let err = backend.generate(&request()).unwrap_err();
    assert_eq!(err, BackendError::Timeout { after_ms: 300 });
    assert!(started.elapsed() < Duration::from_secs(2), "{:?}", started.elapsed());
}

#[test]
fn unreachable_endpoint_is_a_failure() {
    // port 9 (discard) is closed on the loopback interface
    let err = ExternalBackend::new("http://127.0.0.1:9/generate", KEY, 1_000)
        .generate(&request())
        .unwrap_err();
    assert!(matches!(err, BackendError::Failed(_) | BackendError::Timeout { .. }), "{err:?}");
}

#[test]
fn http_embeddings_are_normalized_and_checked() {
    let addr = mock_server();
    let provider = HttpEmbeddingProvider::new(format!("http://{addr}/embed"), KEY, 4, 2_000);
    assert_eq!(provider.name(), "http");
    assert_eq!(provider.dim(), 4);
    let e = provider.embed("abc").unwrap();
    assert_eq!(e.values(), &[1.0, 0.0, 0.0, 0.0]);
    assert!(matches!(provider.embed("  "), Err(EmbedError::EmptyText)));

    let short = HttpEmbeddingProvider::new(format!("http://{addr}/embed-short"), KEY, 4, 2_000);
    assert!(matches!(
        short.embed("abc"),
        Err(EmbedError::DimensionMismatch { expected: 4, got: 2 })
    ));

    let failing = HttpEmbeddingProvider::new(format!("http://{addr}/fail"), KEY, 4, 2_000);
    assert!(matches!(failing.embed("abc"), Err(EmbedError::Provider(m)) if m.contains("503")));
}
