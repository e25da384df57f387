use serde::Serialize;

use super::speech::{SpeechEvent, SpeechTemplates};
use super::AssistConfig;
use crate::datakit::ClassTable;
use crate::error::{Error, Result};

/// Announcement debounce for one session.
///
/// A class must be the top detection on consecutive updates for at least
/// `window_ms` and `min_frames` before it is announced, once. A frame without
/// a qualifying detection breaks the streak; the lock itself survives until
/// the candidate has been absent for `grace_ms`, so the same note shown again
/// after that is announced again. A different class replaces the candidate
/// and drops the lock at once.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StabilizerState {
    pub candidate_class: Option<usize>,
    pub window_start: u64,
    pub last_seen: u64,
    pub frames: u32,
    pub locked: bool,
    /// Set by the client once the announcement has been spoken.
    pub played: bool,
    streak_broken: bool,
    last_update: Option<u64>,
}

impl StabilizerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn locked_class(&self) -> Option<usize> {
        self.candidate_class.filter(|_| self.locked)
    }

    /// Locked and acknowledged as played.
    pub fn eligible_class(&self) -> Option<usize> {
        self.locked_class().filter(|_| self.played)
    }

    /// Marks the lock as spoken when `class` is the locked class.
    pub fn mark_played(&mut self, class: usize) -> bool {
        if self.locked_class() == Some(class) {
            self.played = true;
            return true;
        }
        false
    }

    fn clear(&mut self) {
        self.candidate_class = None;
        self.locked = false;
        self.played = false;
        self.frames = 0;
        self.streak_broken = false;
    }

    /// Advances to `now` with the frame's top detection, if any.
    pub fn update(
        &mut self,
        cfg: &AssistConfig,
        now: u64,
        top: Option<(usize, f64)>,
        speech: &SpeechTemplates,
    ) -> Result<Option<SpeechEvent>> {
        if let Some(prev) = self.last_update {
            if now < prev {
                return Err(Error::InvalidArgument(format!("stabilizer time went backwards: {now} < {prev}")));
            }
        }
        self.last_update = Some(now);
        let observed = top.filter(|&(_, conf)| conf >= cfg.conf_threshold).map(|(c, _)| c);
        let Some(class) = observed else {
            self.streak_broken = true;
            if self.candidate_class.is_some() && now - self.last_seen >= cfg.grace_ms {
                self.clear();
            }
            return Ok(None);
        };
        if self.candidate_class == Some(class) && !self.streak_broken {
            self.frames += 1;
        } else {
            if self.candidate_class != Some(class) {
                self.clear();
                self.candidate_class = Some(class);
            }
            self.window_start = now;
            self.frames = 1;
            self.streak_broken = false;
        }
        self.last_seen = now;
        if !self.locked && now - self.window_start >= cfg.window_ms && self.frames >= cfg.min_frames {
            self.locked = true;
            self.played = false;
            let entry = ClassTable.by_id(class)?;
            return Ok(Some(speech.announce(&entry)));
        }
        Ok(None)
    }
}

/// Functional form of [`StabilizerState::update`] with default speech.
pub fn stabilizer_update(
    state: &StabilizerState,
    cfg: &AssistConfig,
    now: u64,
    top: Option<(usize, f64)>,
) -> Result<(StabilizerState, Option<SpeechEvent>)> {
    let mut next = state.clone();
    let event = next.update(cfg, now, top, &SpeechTemplates::default())?;
    Ok((next, event))
}
