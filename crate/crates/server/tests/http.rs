use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use streammap_core::ingest::{Query, Window};
use streammap_core::mapgen::validate_wire;
use streammap_core::pipeline::{PipelineConfig, Resources};
use streammap_server::http::router;
use streammap_server::{Hub, IngestHandle, Instance, StepFn};
use tower::ServiceExt;

fn hub(tick_ms: u64, max_queries: usize) -> Arc<Hub> {
    let config = PipelineConfig { tick_ms, ..PipelineConfig::default() };
    let ingest = IngestHandle::spawn(Window::new(config.window_capacity, None).unwrap());
    Hub::new(config, Resources::builtin(), ingest, max_queries)
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, String) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

async fn latest(app: &Router, q: &str) -> Value {
    let (status, body) = call(app, get(&format!("/frames/latest?q={q}"))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    validate_wire(&v).unwrap();
    v
}

/// Polls until the latest frame for `q` satisfies `pred`.
async fn latest_until(app: &Router, q: &str, pred: impl Fn(&Value) -> bool) -> Value {
    for _ in 0..200 {
        let v = latest(app, q).await;
        if pred(&v) {
            return v;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    panic!("condition never held for query `{q}`");
}

const BODY: &str = concat!(
    r#"{"id":"a1","ts":1000,"text":"storm surge floods the coast"}"#,
    "\n",
    r#"{"id":"a2","ts":1100,"text":"coast storm surge warning issued"}"#,
    "\n\n",
    "not json\n",
    r#"{"id":"a1","ts":1200,"text":"duplicate id"}"#,
    "\n",
);

#[tokio::test]
async fn health_check() {
    let app = router(hub(50, 8));
    assert_eq!(call(&app, get("/healthz")).await, (StatusCode::OK, "ok".to_string()));
}

#[tokio::test]
async fn empty_query_serves_the_default_instance() {
    let h = hub(50, 8);
    let app = router(Arc::clone(&h));
    let v = latest(&app, "").await;
    assert_eq!(v["nodes"].as_array().unwrap().len(), 0);
    // a second empty-query request and the match-all key share one instance
    latest(&app, "").await;
    h.instance(&Query::match_all()).unwrap();
    assert_eq!(h.instance_count(), 1);
}

#[tokio::test]
async fn malformed_queries_are_client_errors() {
    let app = router(hub(50, 8));
    for q in ["%21%21%21", "a%00b"] {
        let (status, _) = call(&app, get(&format!("/frames/latest?q={q}"))).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{q}");
    }
}

#[tokio::test]
async fn ingest_reports_counts_and_feeds_frames() {
    let app = router(hub(30, 8));
    let req = Request::post("/ingest").body(Body::from(BODY)).unwrap();
    let (status, body) = call(&app, req).await;
    assert_eq!(status, StatusCode::OK);
    let counts: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(counts, serde_json::json!({"accepted": 2, "duplicates": 1, "malformed": 1}));

    let v = latest_until(&app, "", |v| v["nodes"].as_array().unwrap().len() == 2).await;
    assert_eq!(v["countries"].as_array().unwrap().len(), 1);
    let storm = latest_until(&app, "STORM", |v| v["nodes"].as_array().unwrap().len() == 2).await;
    assert!(storm["seq"].as_u64().unwrap() >= 1);
}

#[tokio::test]
async fn unmatched_query_still_ticks_with_empty_frames() {
    let app = router(hub(20, 8));
    let req = Request::post("/ingest").body(Body::from(BODY)).unwrap();
    call(&app, req).await;
    let first = latest(&app, "volcano").await;
    let later = latest_until(&app, "volcano", |v| v["seq"].as_u64() > first["seq"].as_u64()).await;
    assert_eq!(later["nodes"].as_array().unwrap().len(), 0);
    assert_eq!(later["countries"].as_array().unwrap().len(), 0);
}

#[tokio::test]
async fn query_limit_is_enforced() {
    let app = router(hub(50, 2));
    latest(&app, "a").await;
    latest(&app, "b").await;
    let (status, _) = call(&app, get("/frames/latest?q=c")).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    // existing queries keep working, in any spelling
    latest(&app, "A").await;
}

#[tokio::test]
async fn non_utf8_ingest_is_rejected() {
    let app = router(hub(50, 8));
    let req = Request::post("/ingest").body(Body::from(vec![0xff, 0xfe])).unwrap();
    let (status, _) = call(&app, req).await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn slow_subscriber_skips_to_latest() {
    let h = hub(5, 8);
    let inst = h.instance(&Query::match_all()).unwrap();
    let mut sub = inst.subscribe();
    let first = match sub.next().await {
        Some(p) => p.seq,
        None => panic!("instance closed"),
    };
    // fall far behind the fan-out buffer
    tokio::time::sleep(Duration::from_millis(400)).await;
    let mut last = first;
    for _ in 0..5 {
        let p = sub.next().await.unwrap();
        assert!(p.seq > last);
        last = p.seq;
    }
    assert!(last - first > 5, "expected a skip, went {first} → {last}");
}

#[tokio::test]
async fn failed_ticks_keep_the_previous_frame_and_subscribers() {
    let ingest = IngestHandle::spawn(Window::new(16, None).unwrap());
    let mut n = 0u64;
    let step: StepFn = Box::new(move |_, _| {
        n += 1;
        match n % 3 {
            0 => Err("boom".to_string()),
            1 => Ok((n, format!("{{\"n\":{n}}}"))),
            _ => panic!("tick {n} panicked"),
        }
    });
    let inst = Instance::spawn(Query::match_all(), ingest, Duration::from_millis(5), step);
    let mut sub = inst.subscribe();
    let mut seen = Vec::new();
    for _ in 0..4 {
        let p = tokio::time::timeout(Duration::from_secs(5), sub.next()).await.unwrap().unwrap();
        assert_eq!(p.json.as_str(), format!("{{\"n\":{}}}", p.seq));
        seen.push(p.seq);
    }
    // only every third tick succeeds; the rest fail or panic in between
    assert!(seen.iter().all(|s| s % 3 == 1), "{seen:?}");
    assert!(seen.windows(2).all(|w| w[1] > w[0]));
    let latest = inst.latest().unwrap();
    assert_eq!(latest.seq % 3, 1);
}
