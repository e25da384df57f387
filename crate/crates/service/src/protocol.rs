//! JSON messages exchanged over `/ws`. Every message carries `"type"`.
//!
//! Client to server: `frame`, `gesture`, `played`. Server to client:
//! `config` (once, on connect), `detections`, `announce`, `ledger`,
//! `dropped`, `error`.

use denom_core::assist::{AssistConfig, GestureKind, Totals};
use denom_core::metrics::ClassKey;
use denom_core::pipeline::StageTimings;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Frame { seq: u64, ts_ms: u64, jpeg_b64: String },
    /// `kind` stays a string so an unknown kind can be reported as such.
    Gesture { kind: String, #[serde(default)] ts_ms: Option<u64> },
    Played { cls: ClassKey },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireBox {
    pub cls: String,
    pub conf: f64,
    pub xyxy: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadMessage,
    UnknownType,
    BadFrame,
    TooLarge,
    BadGesture,
    BadTimestamp,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Config {
        session: u64,
        assist: AssistConfig,
        max_frame_bytes: usize,
        input_size: usize,
    },
    Detections {
        seq: u64,
        boxes: Vec<WireBox>,
        timing_ms: StageTimings,
    },
    Announce {
        seq: u64,
        cls: String,
        speech: String,
    },
    Ledger {
        speech: String,
        totals: Totals,
    },
    Dropped {
        seq: u64,
    },
    Error {
        code: ErrorCode,
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<u64>,
    },
}

impl ServerMessage {
    pub fn error(code: ErrorCode, message: impl Into<String>, seq: Option<u64>) -> Self {
        ServerMessage::Error { code, message: message.into(), seq }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

pub fn parse_gesture_kind(kind: &str) -> Option<GestureKind> {
    GestureKind::parse(kind)
}

/// Parses one text frame. Failures come back as the `error` message to send.
pub fn parse_client_message(text: &str) -> Result<ClientMessage, ServerMessage> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| ServerMessage::error(ErrorCode::BadMessage, format!("invalid JSON: {e}"), None))?;
    let seq = value.get("seq").and_then(Value::as_u64);
    let ty = match value.get("type") {
        Some(Value::String(t)) => t.clone(),
        _ => return Err(ServerMessage::error(ErrorCode::BadMessage, "missing string field \"type\"", seq)),
    };
    if !matches!(ty.as_str(), "frame" | "gesture" | "played") {
        return Err(ServerMessage::error(ErrorCode::UnknownType, format!("unknown message type {ty:?}"), seq));
    }
    serde_json::from_value(value).map_err(|e| {
        let code = if ty == "frame" { ErrorCode::BadFrame } else { ErrorCode::BadMessage };
        ServerMessage::error(code, format!("malformed {ty} message: {e}"), seq)
    })
}
