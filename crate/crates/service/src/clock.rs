//! Time and id sources, swappable so replays are deterministic.

use std::sync::atomic::{AtomicI64, AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use threadwise_core::model::{SessionId, Timestamp};

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        let ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or(0);
        Timestamp(ms)
    }
}

/// A clock that only moves when told to.
#[derive(Default)]
pub struct ManualClock(AtomicI64);

impl ManualClock {
    pub fn new(start: i64) -> Self {
        Self(AtomicI64::new(start))
    }

    pub fn set(&self, ms: i64) {
        self.0.store(ms, Ordering::SeqCst);
    }

    pub fn advance(&self, ms: i64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        Timestamp(self.0.load(Ordering::SeqCst))
    }
}

pub enum IdGen {
    Uuid,
    /// `session-0001`, `session-0002`, ...
    Sequential(AtomicU64),
}

impl IdGen {
    pub fn sequential() -> Self {
        IdGen::Sequential(AtomicU64::new(1))
    }

    pub fn next(&self) -> SessionId {
        match self {
            IdGen::Uuid => SessionId(uuid::Uuid::new_v4().simple().to_string()),
            IdGen::Sequential(n) => SessionId(format!("session-{:04}", n.fetch_add(1, Ordering::SeqCst))),
        }
    }
}
