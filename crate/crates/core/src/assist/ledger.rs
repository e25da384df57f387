use serde::{Deserialize, Serialize};

use super::gesture::GestureKind;
use super::speech::{SpeechEvent, SpeechTemplates};
use super::stabilizer::StabilizerState;
use crate::datakit::{ClassTable, CurrencyGroup};

/// Running totals per group, in each group's own unit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub usd: u64,
    pub eur: u64,
    pub eurcent: u64,
    pub bdt: u64,
}

impl Totals {
    pub fn get(&self, g: CurrencyGroup) -> u64 {
        match g {
            CurrencyGroup::Usd => self.usd,
            CurrencyGroup::Eur => self.eur,
            CurrencyGroup::Eurcent => self.eurcent,
            CurrencyGroup::Bdt => self.bdt,
        }
    }

    fn slot(&mut self, g: CurrencyGroup) -> &mut u64 {
        match g {
            CurrencyGroup::Usd => &mut self.usd,
            CurrencyGroup::Eur => &mut self.eur,
            CurrencyGroup::Eurcent => &mut self.eurcent,
            CurrencyGroup::Bdt => &mut self.bdt,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerState {
    totals: Totals,
    history: Vec<(CurrencyGroup, u64)>,
}

impl LedgerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn totals(&self) -> Totals {
        self.totals
    }

    pub fn history(&self) -> &[(CurrencyGroup, u64)] {
        &self.history
    }

    /// Applies a gesture given the class currently eligible for adding.
    /// Unknown class ids count as no lock.
    pub fn apply(&mut self, gesture: GestureKind, lock: Option<usize>, speech: &SpeechTemplates) -> SpeechEvent {
        match gesture {
            GestureKind::DoubleTap => match lock.and_then(|c| ClassTable.by_id(c).ok()) {
                Some(entry) => {
                    let slot = self.totals.slot(entry.group);
                    *slot += entry.value as u64;
                    let total = *slot;
                    self.history.push((entry.group, entry.value as u64));
                    speech.total(entry.group.unit(), total)
                }
                None => speech.no_currency(),
            },
            GestureKind::TripleTap => match self.history.pop() {
                Some((group, value)) => {
                    let slot = self.totals.slot(group);
                    *slot -= value;
                    let total = *slot;
                    speech.undo(group.unit(), value, total)
                }
                None => speech.nothing_to_undo(),
            },
            GestureKind::LongPress => {
                *self = LedgerState::default();
                speech.cancel()
            }
        }
    }
}

/// Pure transition using the stabilizer's lock and default speech.
pub fn ledger_apply(
    ledger: &LedgerState,
    gesture: GestureKind,
    stabilizer: &StabilizerState,
    _table: &ClassTable,
) -> (LedgerState, SpeechEvent) {
    let mut next = ledger.clone();
    let event = next.apply(gesture, stabilizer.locked_class(), &SpeechTemplates::default());
    (next, event)
}
