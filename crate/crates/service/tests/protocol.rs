use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use linevox_service::protocol::{decode_frame, FrameFormat};
use linevox_service::server::{bind, ServiceConfig};
use linevox_service::session::SessionConfig;
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

#[derive(Debug)]
enum Event {
    Json(Value),
    Frame { id: u32, width: u16, height: u16, format: FrameFormat, payload_len: usize },
}

async fn start() -> (String, Option<std::net::SocketAddr>) {
    let config = ServiceConfig {
        ws_port: 0,
        http_port: Some(0),
        session: SessionConfig { width: 1280, height: 720, ..Default::default() },
        ..Default::default()
    };
    let bound = bind(config).await.unwrap();
    let url = format!("ws://{}/ws", bound.ws_addr());
    let http = bound.http_addr();
    tokio::spawn(bound.serve());
    (url, http)
}

async fn send(ws: &mut Ws, v: Value) {
    ws.send(Message::Text(v.to_string().into())).await.unwrap();
}

async fn next_event(ws: &mut Ws, timeout: Duration) -> Option<Event> {
    loop {
        let msg = tokio::time::timeout(timeout, ws.next()).await.ok()??.ok()?;
        match msg {
            Message::Text(t) => return Some(Event::Json(serde_json::from_str(t.as_str()).unwrap())),
            Message::Binary(b) => {
                let (h, payload) = decode_frame(&b).expect("well-formed frame");
                return Some(Event::Frame { id: h.frame_id, width: h.width, height: h.height, format: h.format, payload_len: payload.len() });
            }
            _ => {}
        }
    }
}

async fn expect_json(ws: &mut Ws, kind: &str) -> Value {
    match next_event(ws, Duration::from_secs(60)).await {
        Some(Event::Json(v)) if v["type"] == kind => v,
        other => panic!("expected {kind}, got {other:?}"),
    }
}

/// A stats message followed by its binary frame.
async fn expect_frame(ws: &mut Ws) -> (Value, Event) {
    let stats = expect_json(ws, "stats").await;
    let frame = next_event(ws, Duration::from_secs(60)).await.expect("frame after stats");
    match &frame {
        Event::Frame { id, .. } => assert_eq!(*id as u64, stats["frameId"].as_u64().unwrap()),
        other => panic!("expected a binary frame, got {other:?}"),
    }
    (stats, frame)
}

async fn loaded(url: &str) -> Ws {
    let (mut ws, _) = connect_async(url).await.unwrap();
    send(&mut ws, json!({"type": "loadScene", "name": "tornado-small"})).await;
    let v = expect_json(&mut ws, "sceneLoaded").await;
    assert!(v["segments"].as_u64().unwrap() > 0);
    ws
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn load_then_request_yields_one_still_frame() {
    let (url, _) = start().await;
    let mut ws = loaded(&url).await;
    send(&mut ws, json!({"type": "requestFrame"})).await;
    let (stats, frame) = expect_frame(&mut ws).await;
    assert_eq!(stats["frameId"], 1);
    assert_eq!(stats["quality"], "still");
    assert_eq!(stats["neighbors"], true);
    let Event::Frame { width, height, format, .. } = frame else { unreachable!() };
    assert_eq!((width, height, format), (1280, 720, FrameFormat::Png));
    assert!(next_event(&mut ws, Duration::from_millis(600)).await.is_none(), "no unprompted frames without motion");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn camera_updates_coalesce_then_refine() {
    let (url, _) = start().await;
    let mut ws = loaded(&url).await;
    let cam = |x: f64| json!({"type": "camera", "pos": [x, -60.0, 50.0], "target": [32.0, 32.0, 16.0], "up": [0.0, 0.0, 1.0], "fov": 45.0});
    send(&mut ws, cam(10.0)).await;
    send(&mut ws, cam(20.0)).await;
    let sent = Instant::now();

    let (moving, frame) = expect_frame(&mut ws).await;
    assert_eq!(moving["quality"], "moving");
    assert_eq!(moving["epoch"], 3, "frame must use the latest camera (load, camera, camera)");
    assert_eq!(moving["neighbors"], false);
    let Event::Frame { width, height, format, payload_len, .. } = frame else { unreachable!() };
    assert_eq!((width, height, format), (640, 360, FrameFormat::Rgba8));
    assert_eq!(payload_len, 640 * 360 * 4);

    let (still, frame) = expect_frame(&mut ws).await;
    let waited = sent.elapsed().as_secs_f64() * 1e3;
    assert_eq!(still["quality"], "still");
    assert_eq!(still["epoch"], 3);
    assert_eq!(still["neighbors"], true);
    assert!(still["frameId"].as_u64() > moving["frameId"].as_u64());
    let budget = 300.0 + moving["renderMs"].as_f64().unwrap() + still["renderMs"].as_f64().unwrap() + 250.0;
    assert!(waited <= budget, "refined frame after {waited:.0} ms, budget {budget:.0} ms");
    assert!(matches!(frame, Event::Frame { width: 1280, height: 720, format: FrameFormat::Png, .. }));
    assert!(next_event(&mut ws, Duration::from_millis(600)).await.is_none());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn frame_ids_increase_over_a_drag() {
    let (url, _) = start().await;
    let mut ws = loaded(&url).await;
    for i in 0..12 {
        let a = i as f64 * 0.2;
        send(&mut ws, json!({"type": "camera", "pos": [32.0 + 90.0 * a.cos(), 32.0 + 90.0 * a.sin(), 40.0], "target": [32.0, 32.0, 16.0], "fov": 45.0, "width": 320, "height": 180})).await;
        tokio::time::sleep(Duration::from_millis(30)).await;
    }
    send(&mut ws, json!({"type": "params", "base_opacity": 0.5})).await;
    let mut ids = Vec::new();
    let mut epochs = Vec::new();
    let mut last_quality = Value::Null;
    while let Some(ev) = next_event(&mut ws, Duration::from_millis(1500)).await {
        match ev {
            Event::Json(v) if v["type"] == "stats" => {
                epochs.push(v["epoch"].as_u64().unwrap());
                last_quality = v["quality"].clone();
            }
            Event::Frame { id, .. } => ids.push(id),
            other => panic!("unexpected {other:?}"),
        }
    }
    assert!(!ids.is_empty());
    assert!(ids.windows(2).all(|w| w[0] < w[1]), "{ids:?}");
    assert!(epochs.windows(2).all(|w| w[0] <= w[1]), "{epochs:?}");
    assert_eq!(*epochs.last().unwrap(), 14);
    assert_eq!(last_quality, "still");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn bad_messages_keep_session_alive() {
    let (url, _) = start().await;
    let (mut ws, _) = connect_async(&url).await.unwrap();
    send(&mut ws, json!({"type": "requestFrame"})).await;
    assert!(expect_json(&mut ws, "error").await["message"].as_str().unwrap().contains("no scene"));
    send(&mut ws, json!({"type": "teleport"})).await;
    expect_json(&mut ws, "error").await;
    send(&mut ws, json!({"type": "loadScene", "name": "nowhere"})).await;
    expect_json(&mut ws, "error").await;
    send(&mut ws, json!({"type": "loadScene", "path": "../etc/passwd"})).await;
    expect_json(&mut ws, "error").await;
    ws.send(Message::Text("not json".into())).await.unwrap();
    expect_json(&mut ws, "error").await;
    send(&mut ws, json!({"type": "params", "tube_radius": -1.0})).await;
    expect_json(&mut ws, "error").await;

    send(&mut ws, json!({"type": "loadScene", "name": "tornado-small"})).await;
    expect_json(&mut ws, "sceneLoaded").await;
    send(&mut ws, json!({"type": "requestFrame"})).await;
    let (stats, _) = expect_frame(&mut ws).await;
    assert_eq!(stats["frameId"], 1);
}

async fn http_get(addr: std::net::SocketAddr, path: &str) -> String {
    let mut s = TcpStream::connect(addr).await.unwrap();
    s.write_all(format!("GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").as_bytes()).await.unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).await.unwrap();
    out
}

#[tokio::test]
async fn serves_viewer_bundle() {
    let (_, http) = start().await;
    let addr = http.unwrap();
    let index = http_get(addr, "/").await;
    assert!(index.starts_with("HTTP/1.1 200"), "{index}");
    assert!(index.contains("viewer.js"));
    let js = http_get(addr, "/viewer.js").await;
    assert!(js.starts_with("HTTP/1.1 200"));
    assert!(js.to_lowercase().contains("content-type: text/javascript") || js.to_lowercase().contains("content-type: application/javascript"));
    assert!(js.contains("loadScene"));
    assert!(http_get(addr, "/../Cargo.toml").await.starts_with("HTTP/1.1 404"));
    assert!(http_get(addr, "/missing.css").await.starts_with("HTTP/1.1 404"));
}
