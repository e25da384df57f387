use serde::{Deserialize, Serialize};

use crate::datakit::ClassEntry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeechKind {
    Announce,
    Total,
    Undo,
    Cancel,
    NoCurrency,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeechEvent {
    pub kind: SpeechKind,
    pub text: String,
}

/// Utterance templates. Placeholders: `{value}`, `{unit}`, `{total}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeechTemplates {
    pub announce: String,
    pub total: String,
    pub undo: String,
    pub nothing_to_undo: String,
    pub cancel: String,
    pub no_currency: String,
}

impl Default for SpeechTemplates {
    fn default() -> Self {
        SpeechTemplates {
            announce: "{value} {unit}".into(),
            total: "total {total} {unit}".into(),
            undo: "removed {value} {unit}, total {total} {unit}".into(),
            nothing_to_undo: "nothing to undo".into(),
            cancel: "canceled".into(),
            no_currency: "no currency detected".into(),
        }
    }
}

fn fill(template: &str, value: u64, unit: &str, total: u64) -> String {
    template
        .replace("{value}", &value.to_string())
        .replace("{unit}", unit)
        .replace("{total}", &total.to_string())
}

impl SpeechTemplates {
    pub fn announce(&self, entry: &ClassEntry) -> SpeechEvent {
        let text = fill(&self.announce, entry.value as u64, entry.group.unit(), 0);
        SpeechEvent { kind: SpeechKind::Announce, text }
    }

    pub fn total(&self, unit: &str, total: u64) -> SpeechEvent {
        SpeechEvent { kind: SpeechKind::Total, text: fill(&self.total, 0, unit, total) }
    }

    pub fn undo(&self, unit: &str, value: u64, total: u64) -> SpeechEvent {
        SpeechEvent { kind: SpeechKind::Undo, text: fill(&self.undo, value, unit, total) }
    }

    pub fn nothing_to_undo(&self) -> SpeechEvent {
        SpeechEvent { kind: SpeechKind::Undo, text: self.nothing_to_undo.clone() }
    }

    pub fn cancel(&self) -> SpeechEvent {
        SpeechEvent { kind: SpeechKind::Cancel, text: self.cancel.clone() }
    }

    pub fn no_currency(&self) -> SpeechEvent {
        SpeechEvent { kind: SpeechKind::NoCurrency, text: self.no_currency.clone() }
    }
}
