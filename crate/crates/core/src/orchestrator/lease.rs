//! Review leases: which annotator currently holds which pending pair.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub const DEFAULT_LEASE: Duration = Duration::from_secs(30 * 60);

/// Milliseconds on some monotone-enough timeline.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// A clock that only moves when told to.
#[derive(Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn advance(&self, by: Duration) {
        self.0.fetch_add(by.as_millis() as u64, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lease {
    pub pair_id: String,
    pub version: String,
    pub annotator: String,
    pub expires_at_ms: u64,
}

#[derive(Default)]
pub struct LeaseTable {
    by_pair: HashMap<String, Lease>,
}

impl LeaseTable {
    pub fn expire(&mut self, now_ms: u64) {
        self.by_pair.retain(|_, l| l.expires_at_ms > now_ms);
    }

    pub fn get(&self, pair_id: &str) -> Option<&Lease> {
        self.by_pair.get(pair_id)
    }

    pub fn held_by(&self, annotator: &str) -> Option<&Lease> {
        // Annotators hold at most one lease, so the first match is the one.
        self.by_pair.values().find(|l| l.annotator == annotator)
    }

    pub fn is_leased(&self, pair_id: &str) -> bool {
        self.by_pair.contains_key(pair_id)
    }

    pub fn grant(&mut self, lease: Lease) {
        self.by_pair.insert(lease.pair_id.clone(), lease);
    }

    pub fn release(&mut self, pair_id: &str) -> Option<Lease> {
        self.by_pair.remove(pair_id)
    }

    pub fn release_version(&mut self, version: &str) {
        self.by_pair.retain(|_, l| l.version != version);
    }
}
