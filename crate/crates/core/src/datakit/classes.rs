use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four separately tracked currency groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurrencyGroup {
    Usd,
    Eur,
    Eurcent,
    Bdt,
}

impl CurrencyGroup {
    pub const ALL: [CurrencyGroup; 4] = [CurrencyGroup::Usd, CurrencyGroup::Eur, CurrencyGroup::Eurcent, CurrencyGroup::Bdt];

    /// Unit word used in speech ("15 taka").
    pub fn unit(self) -> &'static str {
        match self {
            CurrencyGroup::Usd => "dollar",
            CurrencyGroup::Eur => "euro",
            CurrencyGroup::Eurcent => "eurocent",
            CurrencyGroup::Bdt => "taka",
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            CurrencyGroup::Usd => "USD",
            CurrencyGroup::Eur => "EUR",
            CurrencyGroup::Eurcent => "EURCENT",
            CurrencyGroup::Bdt => "BDT",
        }
    }
}

impl fmt::Display for CurrencyGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClassEntry {
    pub class_id: usize,
    pub name: &'static str,
    pub group: CurrencyGroup,
    pub value: u32,
}

impl ClassEntry {
    /// "100 dollar", "50 eurocent".
    pub fn spoken(&self) -> String {
        format!("{} {}", self.value, self.group.unit())
    }
}

use CurrencyGroup::*;

// ids follow the byte-wise sorted order of the names
const TABLE: [(&str, CurrencyGroup, u32); 30] = [
    ("1000taka", Bdt, 1000),
    ("100dollar", Usd, 100),
    ("100euro", Eur, 100),
    ("100taka", Bdt, 100),
    ("10dollar", Usd, 10),
    ("10euro", Eur, 10),
    ("10eurocent", Eurcent, 10),
    ("10taka", Bdt, 10),
    ("1dollar", Usd, 1),
    ("1euro", Eur, 1),
    ("1eurocent", Eurcent, 1),
    ("1taka", Bdt, 1),
    ("200taka", Bdt, 200),
    ("20dollar", Usd, 20),
    ("20euro", Eur, 20),
    ("20eurocent", Eurcent, 20),
    ("20taka", Bdt, 20),
    ("2dollar", Usd, 2),
    ("2euro", Eur, 2),
    ("2eurocent", Eurcent, 2),
    ("2taka", Bdt, 2),
    ("500taka", Bdt, 500),
    ("50dollar", Usd, 50),
    ("50euro", Eur, 50),
    ("50eurocent", Eurcent, 50),
    ("50taka", Bdt, 50),
    ("5dollar", Usd, 5),
    ("5euro", Eur, 5),
    ("5eurocent", Eurcent, 5),
    ("5taka", Bdt, 5),
];

pub const NUM_CLASSES: usize = TABLE.len();

/// The fixed 30-class table.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClassTable;

impl ClassTable {
    pub fn len(&self) -> usize {
        NUM_CLASSES
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn entries(&self) -> impl Iterator<Item = ClassEntry> {
        (0..NUM_CLASSES).map(entry)
    }

    pub fn by_id(&self, id: usize) -> Result<ClassEntry> {
        if id < NUM_CLASSES {
            Ok(entry(id))
        } else {
            Err(Error::Lookup(format!("id {id}")))
        }
    }

    pub fn by_name(&self, name: &str) -> Result<ClassEntry> {
        TABLE
            .iter()
            .position(|(n, ..)| *n == name)
            .map(entry)
            .ok_or_else(|| Error::Lookup(name.to_string()))
    }

    pub fn name(&self, id: usize) -> Option<&'static str> {
        TABLE.get(id).map(|e| e.0)
    }

    /// `classes.txt`: one name per line in id order.
    pub fn to_classes_txt(&self) -> String {
        TABLE.iter().map(|e| format!("{}\n", e.0)).collect()
    }
}

fn entry(id: usize) -> ClassEntry {
    let (name, group, value) = TABLE[id];
    ClassEntry { class_id: id, name, group, value }
}

/// Lookup by class name, or by id when the key parses as an integer.
pub fn class_lookup(key: &str) -> Result<ClassEntry> {
    match key.parse::<usize>() {
        Ok(id) => ClassTable.by_id(id),
        Err(_) => ClassTable.by_name(key),
    }
}
