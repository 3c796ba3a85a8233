//! Injected time sources. Nothing in the crate reads the wall clock directly
//! except [`SystemClock`].

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Duration, TimeZone, Utc};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        // Whole seconds: transcripts and the event log carry second precision.
        let now = Utc::now();
        Utc.timestamp_opt(now.timestamp(), 0).single().unwrap_or(now)
    }
}

/// A manually advanced clock with one-second resolution.
#[derive(Debug, Clone)]
pub struct VirtualClock {
    secs: Arc<AtomicI64>,
}

impl VirtualClock {
    pub fn starting_at(start: DateTime<Utc>) -> Self {
        Self {
            secs: Arc::new(AtomicI64::new(start.timestamp())),
        }
    }

    pub fn advance(&self, by: Duration) {
        self.secs.fetch_add(by.num_seconds(), Ordering::AcqRel);
    }

    /// Moves the clock forward to `t`. Never moves it backwards.
    pub fn advance_to(&self, t: DateTime<Utc>) {
        self.secs.fetch_max(t.timestamp(), Ordering::AcqRel);
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> DateTime<Utc> {
        Utc.timestamp_opt(self.secs.load(Ordering::Acquire), 0)
            .single()
            .expect("virtual clock out of range")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn virtual_clock_is_monotone() {
        let start = Utc.with_ymd_and_hms(2022, 7, 12, 0, 0, 0).unwrap();
        let clock = VirtualClock::starting_at(start);
        clock.advance(Duration::days(21));
        assert_eq!(clock.now(), start + Duration::days(21));
        clock.advance_to(start);
        assert_eq!(clock.now(), start + Duration::days(21));
    }
}
