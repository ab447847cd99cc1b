//! Clock abstraction.
//!
//! Mock runs must produce byte-identical output files, so anything that
//! stamps a time goes through a [`Clock`]. The mock pipeline uses
//! [`FixedClock`]; live runs use [`SystemClock`].

use chrono::{DateTime, TimeZone, Utc};

/// Source of wall-clock timestamps and a monotonic millisecond counter
/// (used for budget enforcement).
pub trait Clock: Send + Sync {
    /// Current UTC time, used for record timestamps.
    fn now(&self) -> DateTime<Utc>;
    /// Monotonic milliseconds since some fixed origin.
    fn monotonic_ms(&self) -> u64;
}

/// Real system clock.
#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        #[cfg(not(target_arch = "wasm32"))]
        {
            Utc::now()
        }
        #[cfg(target_arch = "wasm32")]
        {
            fixed_epoch()
        }
    }

    fn monotonic_ms(&self) -> u64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            use std::sync::OnceLock;
            use std::time::Instant;
            static ORIGIN: OnceLock<Instant> = OnceLock::new();
            ORIGIN.get_or_init(Instant::now).elapsed().as_millis() as u64
        }
        #[cfg(target_arch = "wasm32")]
        {
            0
        }
    }
}

/// Reference instant used by deterministic runs.
pub fn fixed_epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap()
}

/// Clock frozen at [`fixed_epoch`]. Wall-time budgets never fire under it.
#[derive(Debug, Default)]
pub struct FixedClock;

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        fixed_epoch()
    }

    fn monotonic_ms(&self) -> u64 {
        0
    }
}

/// Clock that advances a fixed step on every `monotonic_ms` call.
/// Lets tests drive wall-time budget exhaustion deterministically.
#[derive(Debug)]
pub struct StepClock {
    step_ms: u64,
    ticks: std::sync::atomic::AtomicU64,
}

impl StepClock {
    pub fn new(step_ms: u64) -> Self {
        Self {
            step_ms,
            ticks: std::sync::atomic::AtomicU64::new(0),
        }
    }
}

impl Clock for StepClock {
    fn now(&self) -> DateTime<Utc> {
        fixed_epoch()
    }

    fn monotonic_ms(&self) -> u64 {
        self.ticks
            .fetch_add(1, std::sync::atomic::Ordering::Relaxed)
            * self.step_ms
    }
}
