//! Device, frame and storage parameter records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::Sigmoid;
use crate::units::{ma, ms, octets_to_bits};

/// The SHR and PHR of an IEEE 802.15.4 frame always go out at this rate.
pub const PREAMBLE_RATE_BPS: f64 = 250_000.0;

/// Minimum supply voltage of the reference microcontroller.
pub const MIN_OPERATING_VOLTAGE: f64 = 1.8;

/// Device constants as they are usually quoted on a bench: ms, mA, dBm.
///
/// Defaults are the ATmega256RFR2 measurements. The sigmoid coefficients have
/// no published values; the default set is illustrative and places the
/// 3.5 dBm operating point at 16.24 mA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    pub sigmoid: Sigmoid,
    pub wake_slope_ms_per_octet: f64,
    pub wake_intercept_ms: f64,
    pub wake_current_ma: f64,
    pub sleep_time_ms: f64,
    pub txrx_off_current_ma: f64,
    pub txrx_on_time_ms: f64,
    pub txrx_on_current_ma: f64,
    pub txrx_off_time_ms: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            sigmoid: Sigmoid::default(),
            wake_slope_ms_per_octet: 0.004,
            wake_intercept_ms: 1.395,
            wake_current_ma: 7.8,
            sleep_time_ms: 0.45,
            txrx_off_current_ma: 4.0,
            txrx_on_time_ms: 0.86,
            txrx_on_current_ma: 10.25,
            txrx_off_time_ms: 0.2,
        }
    }
}

/// Everything device-specific, held in SI units.
///
/// Built once from a [`DeviceConfig`]; immutable afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceProfile {
    sigmoid: Sigmoid,
    wake_slope: f64,
    wake_intercept: f64,
    wake_current: f64,
    sleep_time: f64,
    txrx_off_current: f64,
    txrx_on_time: f64,
    txrx_on_current: f64,
    txrx_off_time: f64,
}

impl DeviceProfile {
    pub fn new(config: &DeviceConfig) -> Result<Self> {
        config.sigmoid.validate()?;
        let named = [
            ("wake_slope_ms_per_octet", config.wake_slope_ms_per_octet),
            ("wake_intercept_ms", config.wake_intercept_ms),
            ("wake_current_ma", config.wake_current_ma),
            ("sleep_time_ms", config.sleep_time_ms),
            ("txrx_off_current_ma", config.txrx_off_current_ma),
            ("txrx_on_time_ms", config.txrx_on_time_ms),
            ("txrx_on_current_ma", config.txrx_on_current_ma),
            ("txrx_off_time_ms", config.txrx_off_time_ms),
        ];
        for (name, value) in named {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::invalid(format!(
                    "device parameter {name} = {value} must be finite and >= 0"
                )));
            }
        }
        Ok(Self {
            sigmoid: config.sigmoid,
            wake_slope: ms(config.wake_slope_ms_per_octet),
            wake_intercept: ms(config.wake_intercept_ms),
            wake_current: ma(config.wake_current_ma),
            sleep_time: ms(config.sleep_time_ms),
            txrx_off_current: ma(config.txrx_off_current_ma),
            txrx_on_time: ms(config.txrx_on_time_ms),
            txrx_on_current: ma(config.txrx_on_current_ma),
            txrx_off_time: ms(config.txrx_off_time_ms),
        })
    }

    /// Reference device with a caller-supplied sigmoid.
    pub fn with_sigmoid(sigmoid: Sigmoid) -> Result<Self> {
        Self::new(&DeviceConfig {
            sigmoid,
            ..DeviceConfig::default()
        })
    }

    pub fn sigmoid(&self) -> &Sigmoid {
        &self.sigmoid
    }

    /// Seconds of wake-up per MSDU octet.
    pub fn wake_slope(&self) -> f64 {
        self.wake_slope
    }

    pub fn wake_intercept(&self) -> f64 {
        self.wake_intercept
    }

    pub fn wake_current(&self) -> f64 {
        self.wake_current
    }

    pub fn sleep_time(&self) -> f64 {
        self.sleep_time
    }

    /// CPU-only current while the transceiver is off between packets.
    pub fn txrx_off_current(&self) -> f64 {
        self.txrx_off_current
    }

    pub fn txrx_on_time(&self) -> f64 {
        self.txrx_on_time
    }

    pub fn txrx_on_current(&self) -> f64 {
        self.txrx_on_current
    }

    pub fn txrx_off_time(&self) -> f64 {
        self.txrx_off_time
    }
}

impl Default for DeviceProfile {
    fn default() -> Self {
        Self::new(&DeviceConfig::default()).expect("default device config is valid")
    }
}

/// IEEE 802.15.4 segment lengths in octets.
///
/// Defaults give an MHR of FCF(2) + SN(1) + addressing(6) + aux security(10).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameLayout {
    pub shr_octets: u32,
    pub phr_octets: u32,
    pub mhr_octets: u32,
    pub fcs_octets: u32,
    pub max_msdu_octets: u32,
}

impl Default for FrameLayout {
    fn default() -> Self {
        Self {
            shr_octets: 5,
            phr_octets: 1,
            mhr_octets: 19,
            fcs_octets: 2,
            max_msdu_octets: 106,
        }
    }
}

impl FrameLayout {
    pub fn validate(&self) -> Result<()> {
        if self.shr_octets + self.phr_octets == 0 {
            return Err(Error::invalid("frame layout needs a non-empty preamble"));
        }
        Ok(())
    }

    /// Overhead octets inside the PSDU (MHR + FCS).
    pub fn overhead_psdu_octets(&self) -> u32 {
        self.mhr_octets + self.fcs_octets
    }

    pub fn preamble_bits(&self) -> u64 {
        octets_to_bits(self.shr_octets + self.phr_octets)
    }

    pub fn mhr_bits(&self) -> u64 {
        octets_to_bits(self.mhr_octets)
    }

    pub fn fcs_bits(&self) -> u64 {
        octets_to_bits(self.fcs_octets)
    }

    pub fn preamble_rate(&self) -> f64 {
        PREAMBLE_RATE_BPS
    }

    pub fn check_msdu(&self, msdu_octets: u32) -> Result<()> {
        if msdu_octets > self.max_msdu_octets {
            return Err(Error::invalid(format!(
                "MSDU of {msdu_octets} octets exceeds the maximum of {}",
                self.max_msdu_octets
            )));
        }
        Ok(())
    }
}

/// Energy storage component: capacitance (F) and present voltage (V).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscState {
    capacitance: f64,
    voltage: f64,
}

impl EscState {
    pub fn new(capacitance: f64, voltage: f64) -> Result<Self> {
        if !(capacitance > 0.0) || !capacitance.is_finite() {
            return Err(Error::invalid(format!(
                "capacitance {capacitance} F must be positive"
            )));
        }
        if !(voltage >= 0.0) || !voltage.is_finite() {
            return Err(Error::invalid(format!("voltage {voltage} V must be >= 0")));
        }
        Ok(Self {
            capacitance,
            voltage,
        })
    }

    pub fn capacitance(&self) -> f64 {
        self.capacitance
    }

    pub fn voltage(&self) -> f64 {
        self.voltage
    }

    /// Energy held by the capacitor, ½CV².
    pub fn stored_energy(&self) -> f64 {
        0.5 * self.capacitance * self.voltage * self.voltage
    }
}

/// One packet of a burst as requested by the application.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketPlan {
    pub msdu_octets: u32,
    pub tx_power_dbm: f64,
    pub data_rate_bps: f64,
}

impl PacketPlan {
    pub fn validate(&self, layout: &FrameLayout) -> Result<()> {
        layout.check_msdu(self.msdu_octets)?;
        if !(self.data_rate_bps > 0.0) || !self.data_rate_bps.is_finite() {
            return Err(Error::invalid(format!(
                "data rate {} bit/s must be positive",
                self.data_rate_bps
            )));
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(Error::invalid("transmit power must be finite"));
        }
        Ok(())
    }
}
