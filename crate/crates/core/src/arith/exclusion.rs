use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{canonical_key, Operand, Problem};
use crate::error::{Error, Result};

/// Problems that must never be used for trace generation, stored as
/// canonical `"a×b"` keys with `a <= b`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExclusionSet {
    keys: BTreeSet<String>,
}

impl ExclusionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_problems<'a>(problems: impl IntoIterator<Item = &'a Problem>) -> Self {
        Self { keys: problems.into_iter().map(Problem::canonical_key).collect() }
    }

    pub fn insert(&mut self, p: &Problem) {
        self.keys.insert(p.canonical_key());
    }

    pub fn extend(&mut self, other: &ExclusionSet) {
        self.keys.extend(other.keys.iter().cloned());
    }

    pub fn contains(&self, a: &Operand, b: &Operand) -> bool {
        self.keys.contains(&canonical_key(a, b))
    }

    pub fn contains_problem(&self, p: &Problem) -> bool {
        self.contains(&p.a, &p.b)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.keys.iter().map(String::as_str)
    }

    /// Reads a JSON array of keys. Keys are re-canonicalised so `"60×47"`
    /// and `"47×60"` name the same problem.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: Vec<String> = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let mut keys = BTreeSet::new();
        for k in raw {
            keys.insert(parse_key(&k)?);
        }
        Ok(Self { keys })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.keys).map_err(|e| Error::json("exclusions", e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

fn parse_key(k: &str) -> Result<String> {
    let bad = || Error::invalid(format!("exclusion key {k:?} is not of the form a×b"));
    let (a, b) = k.split_once('×').or_else(|| k.split_once('x')).ok_or_else(bad)?;
    let parse = |s: &str| -> Result<Operand> {
        let s = s.trim();
        if s.is_empty() || !s.bytes().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        Ok(Operand::new(s.parse().map_err(|_| bad())?))
    };
    Ok(canonical_key(&parse(a)?, &parse(b)?))
}
