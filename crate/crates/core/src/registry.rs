//! Name-keyed registry of trait-object strategies.

use crate::error::{Error, Result};

/// Anything that can be registered under a stable name.
pub trait Named {
    fn name(&self) -> &'static str;
}

/// An ordered set of boxed strategies, looked up by name at runtime.
pub struct Registry<T: ?Sized + Named> {
    kind: &'static str,
    entries: Vec<Box<T>>,
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: Vec::new(),
        }
    }

    /// Adds a strategy, replacing any earlier one with the same name.
    pub fn register(&mut self, entry: Box<T>) -> &mut Self {
        let name = entry.name();
        match self.entries.iter().position(|e| e.name() == name) {
            Some(i) => self.entries[i] = entry,
            None => self.entries.push(entry),
        }
        self
    }

    pub fn get(&self, name: &str) -> Result<&T> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|b| b.as_ref())
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown {} {name:?} (available: {})",
                    self.kind,
                    self.names().join(", ")
                ))
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.entries.iter().map(|b| b.as_ref())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
