//! Scalar abstraction for the scheduling math.
//!
//! Everything that feeds the scheduling metric (delay urgency, GBR deficit,
//! priority weight, EMA throughput) is generic over [`Scalar`]. The simulator
//! normally runs on `f64`; `f32` works for the same code, and exact rationals
//! (`Ratio<i128>`) are used by the test oracles to check orderings without
//! rounding noise.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

pub trait Scalar:
    Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// Converts from `f64`, panicking if the target cannot represent it.
    fn of(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(|| panic!("{v} is not representable"))
    }

    /// Exact `num / den` where the type allows it.
    fn ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num).expect("numerator") / Self::from_i64(den).expect("denominator")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count fits scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
impl Scalar for Ratio<i64> {}
impl Scalar for Ratio<i128> {}

/// Seconds expressed as an exact fraction of a nanosecond count.
pub fn secs_from_nanos<T: Scalar>(nanos: u64) -> T {
    T::from_count(nanos) / T::from_count(1_000_000_000)
}

/// Rounds a scalar number of seconds to whole nanoseconds.
pub fn nanos_from_secs<T: Scalar>(secs: T) -> u64 {
    let ns = (secs.as_f64() * 1e9).round();
    if ns.is_finite() && ns > 0.0 {
        ns as u64
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_round_trip_is_exact() {
        let tti: Ratio<i128> = secs_from_nanos(1_000_000);
        assert_eq!(tti, Ratio::new(1, 1000));
        assert_eq!(nanos_from_secs(tti), 1_000_000);
    }

    #[test]
    fn min_max_follow_partial_order() {
        assert_eq!(2.0f64.min_of(3.0), 2.0);
        assert_eq!(2.0f32.max_of(3.0), 3.0);
        assert_eq!(
            Ratio::<i64>::ratio(1, 3).max_of(Ratio::ratio(1, 4)),
            Ratio::new(1, 3)
        );
    }
}
