use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use futures::StreamExt;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use hydrodiag_core::harness::default_template;
use hydrodiag_service::{router, HostConfig, SessionHost, TelemetryFrame};

fn scenario_json() -> String {
    serde_json::to_string(&default_template::<f64>()).unwrap()
}

async fn call(host: &SessionHost, method: &str, uri: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_owned()))
        .unwrap();
    let resp = router(host.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn start(host: &SessionHost, query: &str) -> u64 {
    let (status, body) = call(host, "POST", &format!("/session{query}"), &scenario_json()).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    body["id"].as_u64().unwrap()
}

async fn state_t(host: &SessionHost, id: u64) -> f64 {
    let (status, body) = call(host, "GET", &format!("/session/{id}/state"), "").await;
    assert_eq!(status, StatusCode::OK);
    body["t"].as_f64().unwrap()
}

#[tokio::test(flavor = "multi_thread")]
async fn session_lifecycle_over_http() {
    let host = SessionHost::new(HostConfig::default());
    let id = start(&host, "?speed=50").await;
    let t0 = state_t(&host, id).await;
    tokio::time::sleep(Duration::from_millis(200)).await;
    let t1 = state_t(&host, id).await;
    assert!(t1 > t0, "{t0} -> {t1}");

    let (status, ack) = call(&host, "POST", &format!("/session/{id}/command"), r#"{"type":"pause"}"#).await;
    assert_eq!(status, StatusCode::OK);
    assert!(ack["tick"].as_u64().is_some() && ack["t"].as_f64().is_some());
    tokio::time::sleep(Duration::from_millis(50)).await;
    let p0 = state_t(&host, id).await;
    tokio::time::sleep(Duration::from_millis(200)).await;
    assert_eq!(state_t(&host, id).await, p0);
    call(&host, "POST", &format!("/session/{id}/command"), r#"{"type":"resume"}"#).await;
    tokio::time::sleep(Duration::from_millis(200)).await;
    assert!(state_t(&host, id).await > p0);

    let bad = r#"{"type":"setFuzzyPartition","residual":1,"a1":0.2,"a2":0.1,"a3":0.3,"a4":0.4}"#;
    let (status, body) = call(&host, "POST", &format!("/session/{id}/command"), bad).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("a2"), "{body}");

    let (status, log) = call(&host, "GET", &format!("/session/{id}/log"), "").await;
    assert_eq!(status, StatusCode::OK);
    let kinds: Vec<&str> = log["commands"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["command"]["type"].as_str().unwrap())
        .collect();
    assert_eq!(kinds, ["setSpeed", "pause", "resume"]);

    let (status, _) = call(&host, "DELETE", &format!("/session/{id}"), "").await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = call(&host, "GET", &format!("/session/{id}/state"), "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn bad_requests_are_rejected() {
    let host = SessionHost::new(HostConfig::default());
    let mut s: Value = serde_json::from_str(&scenario_json()).unwrap();
    s["params"]["r12"] = Value::from(-5.0);
    let (status, body) = call(&host, "POST", "/session", &s.to_string()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("r12"), "{body}");
    assert_eq!(host.session_count(), 0);

    let (status, body) = call(&host, "POST", "/session", r#"{"inputProfile": 3}"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("inputProfile"), "{body}");

    let (status, _) = call(&host, "POST", "/session?mode=fuzzy", &scenario_json()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = call(&host, "POST", "/session/77/command", r#"{"type":"pause"}"#).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let id = start(&host, "").await;
    let (status, body) = call(&host, "POST", &format!("/session/{id}/command"), r#"{"type":"warp"}"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
}

#[tokio::test(flavor = "multi_thread")]
async fn session_limit_is_enforced() {
    let host = SessionHost::new(HostConfig {
        max_sessions: 2,
        ..HostConfig::default()
    });
    let a = start(&host, "").await;
    start(&host, "").await;
    let (status, _) = call(&host, "POST", "/session", &scenario_json()).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    host.stop(a).unwrap();
    start(&host, "").await;
}

#[tokio::test(flavor = "multi_thread")]
async fn sessions_are_isolated() {
    let host = SessionHost::new(HostConfig::default());
    let a = start(&host, "?speed=20").await;
    let b = start(&host, "?speed=20").await;
    call(&host, "POST", &format!("/session/{a}/command"), r#"{"type":"pause"}"#).await;
    let tb = state_t(&host, b).await;
    tokio::time::sleep(Duration::from_millis(150)).await;
    assert!(state_t(&host, b).await > tb);
}

#[tokio::test(flavor = "multi_thread")]
async fn websocket_streams_ordered_frames() {
    let host = SessionHost::new(HostConfig::default());
    let id = host
        .start(default_template(), hydrodiag_core::DetectionMode::Hybrid, 100.0)
        .await
        .unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(host.clone());
    tokio::spawn(async move { axum::serve(listener, app).await });

    let url = format!("ws://{addr}/session/{id}/telemetry");
    let (mut ws, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    let mut last = f64::NEG_INFINITY;
    let mut ticks = Vec::new();
    for _ in 0..30 {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next())
            .await
            .unwrap()
            .unwrap()
            .unwrap();
        let frame: TelemetryFrame = serde_json::from_str(msg.to_text().unwrap()).unwrap();
        assert!(frame.t > last, "{} after {last}", frame.t);
        last = frame.t;
        ticks.push(frame.tick);
    }
    // After the initial snapshot, frames arrive at the decimated rate.
    assert!(ticks[2..].iter().all(|t| t % 4 == 0), "{ticks:?}");
    drop(ws);

    // The session outlives its consumer and a reconnect starts at current state.
    tokio::time::sleep(Duration::from_millis(100)).await;
    let (mut ws, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    let msg = ws.next().await.unwrap().unwrap();
    let frame: TelemetryFrame = serde_json::from_str(msg.to_text().unwrap()).unwrap();
    assert!(frame.t > last);

    let bad = format!("ws://{addr}/session/999/telemetry");
    assert!(tokio_tungstenite::connect_async(&bad).await.is_err());
}
