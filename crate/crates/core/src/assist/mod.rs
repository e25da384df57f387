//! Assistive interaction: the announcement stabilizer, tap-gesture
//! classification, and the per-currency counting ledger.

mod gesture;
mod ledger;
mod speech;
mod stabilizer;

use serde::{Deserialize, Serialize};

pub use gesture::{classify_gesture, classify_gestures, Gesture, GestureClassifier, GestureKind};
pub use ledger::{ledger_apply, LedgerState, Totals};
pub use speech::{SpeechEvent, SpeechKind, SpeechTemplates};
pub use stabilizer::{stabilizer_update, StabilizerState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssistConfig {
    pub window_ms: u64,
    pub grace_ms: u64,
    pub min_frames: u32,
    pub conf_threshold: f64,
    pub hold_ms: u64,
    /// Longest press that still counts as a tap.
    pub tap_ms: u64,
    pub tap_gap_ms: u64,
}

impl Default for AssistConfig {
    fn default() -> Self {
        AssistConfig {
            window_ms: 3000,
            grace_ms: 1000,
            min_frames: 5,
            conf_threshold: 0.5,
            hold_ms: 1500,
            tap_ms: 300,
            tap_gap_ms: 400,
        }
    }
}
