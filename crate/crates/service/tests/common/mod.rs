#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use base64::Engine;
use denom_core::config::Config;
use denom_core::features::MockBackbone;
use denom_core::head::{DetectionHead, HeadConfig, NUM_ANCHORS};
use denom_core::imgproc::{Image, PreprocessConfig};
use denom_core::pipeline::Detector;
use denom_service::protocol::ServerMessage;
use denom_service::server::{serve, AppState};
use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

/// A head whose prediction layers ignore their input and put one confident
/// `class` box on every P5 cell through the first anchor.
pub fn fixed_class_head(class: usize) -> DetectionHead<f32> {
    let cfg = HeadConfig::default();
    let no = cfg.outputs_per_anchor();
    let mut head = DetectionHead::init(cfg, 0).unwrap();
    let last = head.stages().len() - 1;
    for (s, stage) in head.stages_mut().iter_mut().enumerate() {
        stage.predict.weight.data_mut().fill(0.0);
        let bias = stage.predict.bias.as_mut().unwrap().data_mut();
        for a in 0..NUM_ANCHORS {
            let ch = &mut bias[a * no..(a + 1) * no];
            ch[..4].fill(0.0);
            let on = s == last && a == 0;
            ch[4] = if on { 8.0 } else { -30.0 };
            for (c, v) in ch[5..].iter_mut().enumerate() {
                *v = if on && c == class { 8.0 } else { -8.0 };
            }
        }
    }
    head
}

pub fn fixed_class_detector(class: usize) -> Detector {
    let head = fixed_class_head(class);
    let provider = Arc::new(MockBackbone::new(head.config(), 0).unwrap());
    Detector::new(head, provider, PreprocessConfig::default(), 0.25, 0.45)
}

pub fn frame_b64(seed: u8) -> String {
    let img = Image::from_fn(160, 120, 3, |x, y, c| (x as u8).wrapping_mul(3).wrapping_add((y + c) as u8).wrapping_add(seed));
    base64::engine::general_purpose::STANDARD.encode(img.encode_jpeg(80).unwrap())
}

pub fn frame_msg(seq: u64, ts_ms: u64) -> String {
    json!({"type": "frame", "seq": seq, "ts_ms": ts_ms, "jpeg_b64": frame_b64(seq as u8)}).to_string()
}

/// Serves `state` on an ephemeral loopback port.
pub async fn spawn_server(state: Arc<AppState>) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { serve(listener, state).await.unwrap() });
    addr
}

pub fn state_with(detector: Detector, config: Config) -> Arc<AppState> {
    AppState::new(config, detector)
}

pub type Socket = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

pub struct Client {
    ws: Socket,
    pub session: u64,
    pub config: Value,
}

impl Client {
    pub async fn connect(addr: SocketAddr) -> Client {
        let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
        let mut c = Client { ws, session: 0, config: Value::Null };
        let hello = c.recv().await;
        assert_eq!(hello["type"], "config");
        c.session = hello["session"].as_u64().unwrap();
        c.config = hello;
        c
    }

    pub async fn send(&mut self, text: impl Into<String>) {
        self.ws.send(Message::Text(text.into())).await.unwrap();
    }

    pub async fn recv(&mut self) -> Value {
        loop {
            let msg = tokio::time::timeout(Duration::from_secs(30), self.ws.next())
                .await
                .expect("server reply within 30 s")
                .expect("socket open")
                .unwrap();
            if let Message::Text(t) = msg {
                let v: Value = serde_json::from_str(&t).unwrap();
                // every push must parse back into the typed enum
                serde_json::from_value::<ServerMessage>(v.clone()).unwrap();
                return v;
            }
        }
    }

    /// Reads until a message of `ty` arrives, returning it and everything before.
    pub async fn recv_until(&mut self, ty: &str) -> (Value, Vec<Value>) {
        let mut seen = Vec::new();
        loop {
            let v = self.recv().await;
            if v["type"] == ty {
                return (v, seen);
            }
            seen.push(v);
        }
    }
}
