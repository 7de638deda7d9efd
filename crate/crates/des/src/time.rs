use std::cmp::Ordering;
use std::fmt;

use crate::KernelError;

/// Simulation clock value in working hours since the start of the run.
///
/// Always finite and nonnegative, which makes the total order on the
/// underlying `f64` agree with the numeric order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    pub fn new(hours: f64) -> Result<Self, KernelError> {
        if hours.is_finite() && hours >= 0.0 {
            // normalise -0.0 so that equal times compare equal under total_cmp
            Ok(SimTime(hours + 0.0))
        } else {
            Err(KernelError::InvalidTime(hours))
        }
    }

    pub fn hours(self) -> f64 {
        self.0
    }

    /// The time `delay` hours after `self`.
    pub fn after(self, delay: f64) -> Result<Self, KernelError> {
        if delay < 0.0 {
            return Err(KernelError::InvalidTime(delay));
        }
        SimTime::new(self.0 + delay)
    }
}

impl Eq for SimTime {}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}h", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_non_finite() {
        assert!(SimTime::new(-1.0).is_err());
        assert!(SimTime::new(f64::NAN).is_err());
        assert!(SimTime::new(f64::INFINITY).is_err());
        assert!(SimTime::ZERO.after(-0.5).is_err());
    }

    #[test]
    fn negative_zero_equals_zero() {
        let t = SimTime::new(-0.0).unwrap();
        assert_eq!(t.cmp(&SimTime::ZERO), Ordering::Equal);
    }

    #[test]
    fn ordering_follows_value() {
        let a = SimTime::new(1.5).unwrap();
        let b = a.after(0.5).unwrap();
        assert!(a < b);
        assert_eq!(b.hours(), 2.0);
    }
}
