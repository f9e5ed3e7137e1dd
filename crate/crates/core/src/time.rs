//! Simulation time as integer picoseconds.
//!
//! Integer time keeps the event calendar exact: attempt-period grids,
//! repeated backoff shifts, and reservation-window comparisons never
//! accumulate floating-point error, and event ordering is total. At
//! picosecond resolution a `u64` covers ~213 days of simulated time, far
//! beyond any run here.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

/// Picoseconds per second.
pub const PS_PER_SEC: u64 = 1_000_000_000_000;

/// A point in simulation time (or a duration), in integer picoseconds.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TimePs(pub u64);

impl TimePs {
    pub const ZERO: TimePs = TimePs(0);

    /// Converts non-negative seconds, rounding to the nearest picosecond.
    pub fn from_secs_f64(secs: f64) -> TimePs {
        debug_assert!(secs >= 0.0 && secs.is_finite());
        TimePs((secs * PS_PER_SEC as f64).round() as u64)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / PS_PER_SEC as f64
    }

    pub fn saturating_sub(self, rhs: TimePs) -> TimePs {
        TimePs(self.0.saturating_sub(rhs.0))
    }

    /// Scales a duration by an integer factor.
    pub fn scaled(self, factor: u64) -> TimePs {
        TimePs(self.0.checked_mul(factor).expect("time overflow"))
    }

    /// The next multiple of `period` at or after `self`, counting from
    /// `anchor`. `self` must not precede `anchor` and `period` must be
    /// positive.
    pub fn align_up(self, anchor: TimePs, period: TimePs) -> TimePs {
        debug_assert!(period.0 > 0);
        debug_assert!(self >= anchor);
        let offset = self.0 - anchor.0;
        let steps = offset.div_ceil(period.0);
        TimePs(anchor.0 + steps * period.0)
    }
}

impl Add for TimePs {
    type Output = TimePs;
    fn add(self, rhs: TimePs) -> TimePs {
        TimePs(self.0.checked_add(rhs.0).expect("time overflow"))
    }
}

impl AddAssign for TimePs {
    fn add_assign(&mut self, rhs: TimePs) {
        *self = *self + rhs;
    }
}

impl Sub for TimePs {
    type Output = TimePs;
    fn sub(self, rhs: TimePs) -> TimePs {
        TimePs(self.0.checked_sub(rhs.0).expect("time underflow"))
    }
}

impl fmt::Display for TimePs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9}s", self.as_secs_f64())
    }
}
