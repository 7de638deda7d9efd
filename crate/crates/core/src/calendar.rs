//! Working-time calendar. The simulation clock counts working hours only, so
//! non-working days never appear on it.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkCalendar {
    pub days_per_week: u32,
    pub hours_per_day: u32,
}

impl Default for WorkCalendar {
    fn default() -> Self {
        WorkCalendar {
            days_per_week: 6,
            hours_per_day: 8,
        }
    }
}

impl WorkCalendar {
    pub fn hours_per_day(&self) -> f64 {
        f64::from(self.hours_per_day)
    }

    /// Working-day index containing the clock value `hours`.
    pub fn day_of(&self, hours: f64) -> u64 {
        (hours / self.hours_per_day()).floor() as u64
    }

    /// Clock value at which working day `day` closes.
    pub fn end_of_day(&self, day: u64) -> f64 {
        (day + 1) as f64 * self.hours_per_day()
    }

    pub fn days_to_hours(&self, days: u32) -> f64 {
        f64::from(days) * self.hours_per_day()
    }

    /// True when `day` is the last working day of its week.
    pub fn closes_week(&self, day: u64) -> bool {
        (day + 1).is_multiple_of(u64::from(self.days_per_week))
    }

    pub fn week_of(&self, day: u64) -> u64 {
        day / u64::from(self.days_per_week)
    }
}
