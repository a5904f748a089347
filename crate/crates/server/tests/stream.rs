use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use futures_util::StreamExt;
use serde_json::Value;
use streammap_core::ingest::SourceConfig;
use streammap_core::mapgen::validate_wire;
use streammap_core::pipeline::PipelineConfig;
use streammap_server::{ServeOptions, Server};
use tokio_tungstenite::tungstenite::{self, Message};

async fn start(tick_ms: u64, source: SourceConfig) -> SocketAddr {
    let opts = ServeOptions {
        listen: "127.0.0.1:0".parse().unwrap(),
        source,
        config: PipelineConfig { tick_ms, ..PipelineConfig::default() },
        max_queries: 8,
    };
    let server = Server::bind(opts).await.unwrap();
    let addr = server.local_addr().unwrap();
    tokio::spawn(server.run(std::future::pending()));
    addr
}

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/stream-200.ndjson")
}

type Client = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn connect(addr: SocketAddr, q: &str) -> Client {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/stream?q={q}")).await.unwrap();
    ws
}

async fn next_frame(ws: &mut Client) -> (u64, String) {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("frame within 10 s")
            .expect("stream open")
            .unwrap();
        if let Message::Text(t) = msg {
            let v: Value = serde_json::from_str(t.as_str()).unwrap();
            validate_wire(&v).unwrap();
            return (v["seq"].as_u64().unwrap(), t.to_string());
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn frames_arrive_in_strictly_increasing_order() {
    let addr = start(20, SourceConfig::Http).await;
    let mut ws = connect(addr, "").await;
    let mut last = None;
    for _ in 0..15 {
        let (seq, _) = next_frame(&mut ws).await;
        assert!(last.is_none_or(|l| seq > l), "{last:?} then {seq}");
        last = Some(seq);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn same_query_subscribers_see_identical_frames() {
    let source = SourceConfig::parse(&format!("replay:{}", fixture().display()), Some(20.0)).unwrap();
    let addr = start(50, source).await;
    let mut a = connect(addr, "people").await;
    let mut b = connect(addr, "PEOPLE").await;
    let mut seen_a = Vec::new();
    let mut seen_b = Vec::new();
    for _ in 0..12 {
        seen_a.push(next_frame(&mut a).await);
        seen_b.push(next_frame(&mut b).await);
    }
    // both joined the same instance; align on the later starting point
    let start = seen_a[0].0.max(seen_b[0].0);
    let tail_a: Vec<_> = seen_a.iter().filter(|f| f.0 >= start).collect();
    let tail_b: Vec<_> = seen_b.iter().filter(|f| f.0 >= start).collect();
    let n = tail_a.len().min(tail_b.len());
    assert!(n >= 8);
    assert_eq!(tail_a[..n], tail_b[..n]);
    for w in tail_a.windows(2) {
        assert_eq!(w[1].0, w[0].0 + 1, "gap in a fast subscriber's frames");
    }
    assert!(tail_a.iter().any(|f| f.1.contains("\"cluster_id\"")), "replay never produced nodes");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn unmatched_query_keeps_ticking() {
    let source = SourceConfig::parse(&format!("replay:{}", fixture().display()), None).unwrap();
    let addr = start(20, source).await;
    let mut ws = connect(addr, "xylophone").await;
    let (s0, _) = next_frame(&mut ws).await;
    for _ in 0..5 {
        let (seq, text) = next_frame(&mut ws).await;
        let v: Value = serde_json::from_str(&text).unwrap();
        assert!(seq > s0);
        assert_eq!(v["nodes"].as_array().unwrap().len(), 0);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn malformed_stream_query_is_refused() {
    let addr = start(50, SourceConfig::Http).await;
    let err = tokio_tungstenite::connect_async(format!("ws://{addr}/stream?q=%21%21")).await.unwrap_err();
    match err {
        tungstenite::Error::Http(resp) => assert_eq!(resp.status(), 400),
        other => panic!("unexpected error {other}"),
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn closing_one_subscriber_leaves_others_running() {
    let addr = start(20, SourceConfig::Http).await;
    let mut a = connect(addr, "").await;
    let mut b = connect(addr, "").await;
    next_frame(&mut a).await;
    a.close(None).await.unwrap();
    let (s1, _) = next_frame(&mut b).await;
    let (s2, _) = next_frame(&mut b).await;
    assert!(s2 > s1);
}
