//! Per-name login throttling.
//!
//! After `threshold` consecutive failures a name is refused outright for
//! `cooldown_secs`, whatever is supplied. The refusal looks exactly like a
//! bad secret.

use std::collections::HashMap;

use crate::clock::Timestamp;

#[derive(Debug, Clone, Copy, Default)]
struct Entry {
    failures: u32,
    locked_until: Option<Timestamp>,
}

#[derive(Debug, Clone)]
pub(crate) struct LockoutTracker {
    threshold: u32,
    cooldown_secs: u64,
    entries: HashMap<String, Entry>,
}

impl LockoutTracker {
    pub(crate) fn new(threshold: u32, cooldown_secs: u64) -> Self {
        LockoutTracker { threshold: threshold.max(1), cooldown_secs, entries: HashMap::new() }
    }

    /// Whether `name` is currently refused. An expired lock is cleared.
    pub(crate) fn is_locked(&mut self, name: &str, now: Timestamp) -> bool {
        let Some(entry) = self.entries.get(name) else {
            return false;
        };
        match entry.locked_until {
            Some(until) if now < until => true,
            Some(_) => {
                self.entries.remove(name);
                false
            }
            None => false,
        }
    }

    pub(crate) fn record_failure(&mut self, name: &str, now: Timestamp) {
        let entry = self.entries.entry(name.to_owned()).or_default();
        entry.failures += 1;
        if entry.failures >= self.threshold {
            entry.locked_until = Some(now.plus_secs(self.cooldown_secs));
        }
    }

    pub(crate) fn record_success(&mut self, name: &str) {
        self.entries.remove(name);
    }

    #[cfg(any(test, feature = "inspect"))]
    pub(crate) fn failures(&self, name: &str) -> u32 {
        self.entries.get(name).map_or(0, |e| e.failures)
    }
}
