//! The 0.1 s simulation grid. All event times, log timestamps, and planned
//! itineraries live on integer multiples of [`TICK_SECONDS`]; tick counts are
//! the exact representation and seconds are derived views.

/// Length of one simulation tick in seconds.
pub const TICK_SECONDS: f64 = 0.1;

/// Ticks per second of simulated time.
pub const TICKS_PER_SECOND: u64 = 10;

/// Milliseconds per tick, the log timestamp step.
pub const TICK_MILLIS: u64 = 100;

/// Convert a tick count to seconds.
pub fn seconds(ticks: u64) -> f64 {
    ticks as f64 / TICKS_PER_SECOND as f64
}

/// Number of whole ticks needed to cover `duration_s` seconds, rounding up.
/// Values within 1e-9 of a grid point snap down to it.
pub fn ticks_ceil(duration_s: f64) -> u64 {
    (duration_s / TICK_SECONDS - 1e-9).ceil().max(0.0) as u64
}

/// Travel duration in ticks for a leg of `length_m` at `speed_ms`, at least 1.
pub fn leg_ticks(length_m: f64, speed_ms: f64) -> u64 {
    ticks_ceil(length_m / speed_ms).max(1)
}

/// Serde adapter storing a tick count as seconds in serialized form.
pub mod ticks_as_seconds {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ticks: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(super::seconds(*ticks))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let secs = f64::deserialize(d)?;
        let scaled = secs * super::TICKS_PER_SECOND as f64;
        let ticks = scaled.round();
        if !secs.is_finite() || secs < 0.0 || (scaled - ticks).abs() > 1e-6 {
            return Err(serde::de::Error::custom(format!(
                "time {secs} is not a nonnegative multiple of 0.1 s"
            )));
        }
        Ok(ticks as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_ceil_snaps_to_grid() {
        assert_eq!(ticks_ceil(0.0), 0);
        assert_eq!(ticks_ceil(0.1), 1);
        assert_eq!(ticks_ceil(0.1000000001), 1);
        assert_eq!(ticks_ceil(0.11), 2);
        assert_eq!(ticks_ceil(10.0), 100);
    }

    #[test]
    fn leg_ticks_is_at_least_one() {
        assert_eq!(leg_ticks(0.2, 0.2), 10);
        assert_eq!(leg_ticks(1e-6, 10.0), 1);
        // 0.25 m at 0.2 m/s is 1.25 s -> 13 ticks
        assert_eq!(leg_ticks(0.25, 0.2), 13);
    }

    #[test]
    fn seconds_round_trip() {
        for ticks in [0u64, 1, 3, 7055, 123_456] {
            let s = seconds(ticks);
            assert_eq!((s * 10.0).round() as u64, ticks);
        }
    }
}
