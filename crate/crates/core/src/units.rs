//! Unit conversions shared by every model.
//!
//! All computation inside the crate runs in SI units (s, V, A, F, J, bit/s).
//! Device constants are usually quoted in ms, mA and µJ; the helpers here
//! are the only place those scales appear.

use crate::error::{Error, Result};

pub const MILLI: f64 = 1e-3;
pub const MICRO: f64 = 1e-6;

/// Milliseconds to seconds.
pub fn ms(x: f64) -> f64 {
    x * MILLI
}

/// Milliamperes to amperes.
pub fn ma(x: f64) -> f64 {
    x * MILLI
}

/// Joules to microjoules.
pub fn to_uj(joules: f64) -> f64 {
    joules / MICRO
}

pub fn dbm_to_watts(dbm: f64) -> Result<f64> {
    if !dbm.is_finite() {
        return Err(Error::invalid(format!("power {dbm} dBm is not finite")));
    }
    Ok(10f64.powf(dbm / 10.0) * MILLI)
}

pub fn watts_to_dbm(watts: f64) -> Result<f64> {
    if !(watts > 0.0) || !watts.is_finite() {
        return Err(Error::invalid(format!(
            "power {watts} W must be positive and finite"
        )));
    }
    Ok(10.0 * (watts / MILLI).log10())
}

pub fn octets_to_bits(octets: u32) -> u64 {
    8 * u64::from(octets)
}
