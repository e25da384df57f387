use serde::{Deserialize, Serialize};

use super::AssistConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GestureKind {
    DoubleTap,
    TripleTap,
    LongPress,
}

impl GestureKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "double_tap" => Some(GestureKind::DoubleTap),
            "triple_tap" => Some(GestureKind::TripleTap),
            "long_press" => Some(GestureKind::LongPress),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gesture {
    pub kind: GestureKind,
    pub ts_ms: u64,
}

/// Incremental touch classifier. Feed `down`/`up` in time order and call
/// `poll` as time passes; each returns a gesture when one completes.
#[derive(Debug, Clone)]
pub struct GestureClassifier {
    hold_ms: u64,
    tap_ms: u64,
    gap_ms: u64,
    pressed_at: Option<u64>,
    long_fired: bool,
    taps: u32,
    last_up: u64,
    last_event: u64,
}

impl GestureClassifier {
    pub fn new(cfg: &AssistConfig) -> Self {
        GestureClassifier {
            hold_ms: cfg.hold_ms,
            tap_ms: cfg.tap_ms,
            gap_ms: cfg.tap_gap_ms,
            pressed_at: None,
            long_fired: false,
            taps: 0,
            last_up: 0,
            last_event: 0,
        }
    }

    fn check_time(&mut self, t: u64) -> Result<()> {
        if t < self.last_event {
            return Err(Error::InvalidArgument(format!("touch event at {t} ms precedes {} ms", self.last_event)));
        }
        self.last_event = t;
        Ok(())
    }

    /// Resolves anything that has completed by `now`.
    pub fn poll(&mut self, now: u64) -> Option<Gesture> {
        if let Some(down) = self.pressed_at {
            if !self.long_fired && now.saturating_sub(down) >= self.hold_ms {
                self.long_fired = true;
                self.taps = 0;
                return Some(Gesture { kind: GestureKind::LongPress, ts_ms: down + self.hold_ms });
            }
            return None;
        }
        if self.taps > 0 && now.saturating_sub(self.last_up) > self.gap_ms {
            let taps = std::mem::take(&mut self.taps);
            let kind = match taps {
                2 => GestureKind::DoubleTap,
                3 => GestureKind::TripleTap,
                _ => return None,
            };
            return Some(Gesture { kind, ts_ms: self.last_up + self.gap_ms });
        }
        None
    }

    pub fn down(&mut self, t: u64) -> Result<Option<Gesture>> {
        self.check_time(t)?;
        if self.pressed_at.is_some() {
            return Err(Error::InvalidArgument(format!("overlapping touch at {t} ms")));
        }
        let done = self.poll(t);
        self.pressed_at = Some(t);
        self.long_fired = false;
        Ok(done)
    }

    pub fn up(&mut self, t: u64) -> Result<Option<Gesture>> {
        self.check_time(t)?;
        let Some(down) = self.pressed_at else {
            return Err(Error::InvalidArgument(format!("touch released at {t} ms without a press")));
        };
        let done = self.poll(t);
        self.pressed_at = None;
        if self.long_fired {
            self.long_fired = false;
        } else if t - down < self.tap_ms {
            self.taps += 1;
            self.last_up = t;
        } else {
            // too long for a tap, too short for a hold
            self.taps = 0;
        }
        Ok(done)
    }
}

/// Every gesture in a complete list of `(down_ms, up_ms)` touches.
pub fn classify_gestures(touches: &[(u64, u64)], cfg: &AssistConfig) -> Result<Vec<Gesture>> {
    let mut c = GestureClassifier::new(cfg);
    let mut out = Vec::new();
    for &(down, up) in touches {
        if up < down {
            return Err(Error::InvalidArgument(format!("touch released at {up} ms before press at {down} ms")));
        }
        out.extend(c.down(down)?);
        out.extend(c.up(up)?);
    }
    out.extend(c.poll(u64::MAX));
    Ok(out)
}

/// The first gesture of the touch list, if any.
pub fn classify_gesture(touches: &[(u64, u64)], cfg: &AssistConfig) -> Result<Option<Gesture>> {
    Ok(classify_gestures(touches, cfg)?.into_iter().next())
}
