//! Per-connection state and message handling, independent of the transport.

use std::collections::VecDeque;
use std::sync::Arc;

use base64::Engine;
use denom_core::assist::{AssistConfig, LedgerState, SpeechTemplates, StabilizerState};
use denom_core::datakit::ClassTable;
use denom_core::imgproc::Image;
use denom_core::pipeline::{Detector, StageTimings};

use crate::protocol::{parse_gesture_kind, ClientMessage, ErrorCode, ServerMessage, WireBox};

/// Running per-stage totals over the frames a session has processed.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TimingTotals {
    pub frames: u64,
    pub sum: StageTimings,
}

impl TimingTotals {
    fn add(&mut self, t: &StageTimings) {
        self.frames += 1;
        self.sum.pre += t.pre;
        self.sum.inf += t.inf;
        self.sum.post += t.post;
        self.sum.total += t.total;
    }

    pub fn mean(&self) -> StageTimings {
        let n = self.frames.max(1) as f64;
        StageTimings { pre: self.sum.pre / n, inf: self.sum.inf / n, post: self.sum.post / n, total: self.sum.total / n }
    }
}

pub struct Session {
    pub id: u64,
    pub stabilizer: StabilizerState,
    pub ledger: LedgerState,
    pub last_seq: Option<u64>,
    pub timings: TimingTotals,
    last_ts: Option<u64>,
    detector: Arc<Detector>,
    assist: AssistConfig,
    speech: SpeechTemplates,
    max_frame_bytes: usize,
}

impl Session {
    pub fn new(id: u64, detector: Arc<Detector>, assist: AssistConfig, speech: SpeechTemplates, max_frame_bytes: usize) -> Self {
        Session {
            id,
            stabilizer: StabilizerState::new(),
            ledger: LedgerState::new(),
            last_seq: None,
            timings: TimingTotals::default(),
            last_ts: None,
            detector,
            assist,
            speech,
            max_frame_bytes,
        }
    }

    pub fn greeting(&self) -> ServerMessage {
        ServerMessage::Config {
            session: self.id,
            assist: self.assist.clone(),
            max_frame_bytes: self.max_frame_bytes,
            input_size: self.detector.input_size(),
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Vec<ServerMessage> {
        match msg {
            ClientMessage::Frame { seq, ts_ms, jpeg_b64 } => self.handle_frame(seq, ts_ms, &jpeg_b64),
            ClientMessage::Gesture { kind, .. } => vec![self.handle_gesture(&kind)],
            ClientMessage::Played { cls } => {
                if let Ok(class) = cls.resolve() {
                    self.stabilizer.mark_played(class);
                }
                Vec::new()
            }
        }
    }

    fn handle_frame(&mut self, seq: u64, ts_ms: u64, jpeg_b64: &str) -> Vec<ServerMessage> {
        if self.last_seq.is_some_and(|last| seq <= last) {
            return vec![ServerMessage::Dropped { seq }];
        }
        self.last_seq = Some(seq);
        let too_large = |n: usize| {
            ServerMessage::error(ErrorCode::TooLarge, format!("frame of {n} bytes exceeds {} bytes", self.max_frame_bytes), Some(seq))
        };
        // cheap bound before decoding
        if jpeg_b64.len() / 4 * 3 > self.max_frame_bytes + 3 {
            return vec![too_large(jpeg_b64.len() / 4 * 3)];
        }
        let bytes = match base64::engine::general_purpose::STANDARD.decode(jpeg_b64.trim()) {
            Ok(b) => b,
            Err(e) => return vec![ServerMessage::error(ErrorCode::BadFrame, format!("invalid base64: {e}"), Some(seq))],
        };
        if bytes.len() > self.max_frame_bytes {
            return vec![too_large(bytes.len())];
        }
        let img = match Image::decode(&bytes) {
            Ok(img) => img,
            Err(e) => return vec![ServerMessage::error(ErrorCode::BadFrame, e.to_string(), Some(seq))],
        };
        if self.last_ts.is_some_and(|last| ts_ms < last) {
            return vec![ServerMessage::error(
                ErrorCode::BadTimestamp,
                format!("ts_ms {ts_ms} precedes the previous frame"),
                Some(seq),
            )];
        }
        self.last_ts = Some(ts_ms);
        let result = match self.detector.detect(&img) {
            Ok(r) => r,
            Err(e) => return vec![ServerMessage::error(ErrorCode::Internal, e.to_string(), Some(seq))],
        };
        self.timings.add(&result.timing_ms);
        let top = result
            .detections
            .iter()
            .max_by(|a, b| a.confidence.total_cmp(&b.confidence))
            .map(|d| (d.class_id, d.confidence));
        let boxes = result
            .detections
            .iter()
            .map(|d| WireBox {
                cls: ClassTable.name(d.class_id).unwrap_or("unknown").to_string(),
                conf: d.confidence,
                xyxy: d.bbox,
            })
            .collect();
        let mut out = vec![ServerMessage::Detections { seq, boxes, timing_ms: result.timing_ms }];
        match self.stabilizer.update(&self.assist, ts_ms, top, &self.speech) {
            Ok(Some(event)) => {
                let cls = self.stabilizer.locked_class().and_then(|c| ClassTable.name(c)).unwrap_or("unknown");
                out.push(ServerMessage::Announce { seq, cls: cls.to_string(), speech: event.text });
            }
            Ok(None) => {}
            Err(e) => out.push(ServerMessage::error(ErrorCode::BadTimestamp, e.to_string(), Some(seq))),
        }
        out
    }

    fn handle_gesture(&mut self, kind: &str) -> ServerMessage {
        let Some(kind) = parse_gesture_kind(kind) else {
            return ServerMessage::error(ErrorCode::BadGesture, format!("unknown gesture kind {kind:?}"), None);
        };
        let event = self.ledger.apply(kind, self.stabilizer.eligible_class(), &self.speech);
        ServerMessage::Ledger { speech: event.text, totals: self.ledger.totals() }
    }
}

/// Takes the next message to process from an arrival-ordered queue. A frame
/// with a newer frame queued behind it is skipped and reported as dropped;
/// everything else is handed out in order.
pub fn take_next(pending: &mut VecDeque<ClientMessage>, dropped: &mut Vec<ServerMessage>) -> Option<ClientMessage> {
    while let Some(msg) = pending.pop_front() {
        if let ClientMessage::Frame { seq, .. } = &msg {
            if pending.iter().any(|m| matches!(m, ClientMessage::Frame { .. })) {
                dropped.push(ServerMessage::Dropped { seq: *seq });
                continue;
            }
        }
        return Some(msg);
    }
    None
}
