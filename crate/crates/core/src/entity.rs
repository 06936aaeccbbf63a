use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Drug,
    Protein,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Drug => "drug",
            Side::Protein => "protein",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drug" => Ok(Side::Drug),
            "protein" => Ok(Side::Protein),
            other => Err(Error::Input(format!(
                "unknown entity side `{other}` (expected drug or protein)"
            ))),
        }
    }
}

/// Ordered entity identifiers with reverse lookup.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EntityIndex {
    ids: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl EntityIndex {
    /// Fails on duplicate identifiers.
    pub fn new(ids: Vec<String>) -> Result<Self> {
        let mut lookup = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if lookup.insert(id.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate entity id `{id}`")));
            }
        }
        Ok(EntityIndex { ids, lookup })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    pub fn require(&self, id: &str, what: &str) -> Result<usize> {
        self.get(id)
            .ok_or_else(|| Error::Input(format!("unknown {what} id `{id}`")))
    }
}
