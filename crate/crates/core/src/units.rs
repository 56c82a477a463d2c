//! Unit conversions. Everything inside the simulator is SI (m, s, m/s);
//! the fundamental diagram is expressed in the customary km/h, veh/km and
//! veh/h.

pub const SECONDS_PER_HOUR: f64 = 3600.0;
pub const SECONDS_PER_MINUTE: f64 = 60.0;
pub const METERS_PER_KM: f64 = 1000.0;

#[inline]
pub fn kmh_to_mps(v: f64) -> f64 {
    v / 3.6
}

#[inline]
pub fn mps_to_kmh(v: f64) -> f64 {
    v * 3.6
}

/// Converts a rate given per minute into a rate per second.
#[inline]
pub fn per_minute_to_per_second(rate: f64) -> f64 {
    rate / SECONDS_PER_MINUTE
}
