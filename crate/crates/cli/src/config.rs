//! TOML run configuration. Every section is optional; missing keys take the
//! values in `config/default.toml`, which mirror the library defaults.

use std::path::{Path, PathBuf};

use esc_energy::burst::BurstOptions;
use esc_energy::harvest::OcvTable;
use esc_energy::units::MILLI;
use esc_energy::{DeviceConfig, DeviceProfile, EscState, FrameLayout, PacketPlan};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EscSection {
    pub capacitance_mf: f64,
    pub initial_voltage_v: f64,
}

impl Default for EscSection {
    fn default() -> Self {
        Self {
            capacitance_mf: 0.12,
            initial_voltage_v: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BurstSection {
    pub skip_last_gap: bool,
    pub brown_out_voltage_v: f64,
    pub record_samples: bool,
}

impl Default for BurstSection {
    fn default() -> Self {
        let d = BurstOptions::default();
        Self {
            skip_last_gap: d.skip_last_gap,
            brown_out_voltage_v: d.brown_out_voltage,
            record_samples: d.record_samples,
        }
    }
}

/// Charging model parameters. Leave unset to fit from `[inputs] trace`;
/// with only `v_oc_v` set, the fit solves for R alone.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChargeSection {
    pub v_oc_v: Option<f64>,
    pub r_eq_ohm: Option<f64>,
}

/// Input files, relative to the config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputsSection {
    pub trace: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    pub plan: Option<PathBuf>,
    pub ocv_table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketSection {
    pub msdu_octets: u32,
    pub tx_power_dbm: f64,
    pub data_rate_bps: f64,
    /// Supply voltage for `packet-cost`; defaults to the ESC's initial voltage.
    pub voltage_v: Option<f64>,
}

impl Default for PacketSection {
    fn default() -> Self {
        Self {
            msdu_octets: 106,
            tx_power_dbm: 3.5,
            data_rate_bps: 250_000.0,
            voltage_v: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSection {
    pub v_cutoff_v: f64,
    pub cap_n: usize,
}

impl Default for PlannerSection {
    fn default() -> Self {
        Self {
            v_cutoff_v: esc_energy::profile::MIN_OPERATING_VOLTAGE,
            cap_n: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    pub horizon_s: f64,
    pub steps: usize,
    pub target_v: Option<f64>,
}

impl Default for PredictSection {
    fn default() -> Self {
        Self {
            horizon_s: 1.0,
            steps: 100,
            target_v: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcvSection {
    /// Incident powers to look up.
    pub p_dbm: Vec<f64>,
    /// (p_dbm, v_oc_v) knots; replaced by `[inputs] ocv_table` when given.
    pub points: Vec<(f64, f64)>,
}

impl Default for OcvSection {
    fn default() -> Self {
        Self {
            p_dbm: vec![-14.0, -11.3, -8.5, -7.0, -5.0, -3.0, -2.0],
            points: OcvTable::p2110().points().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub device: DeviceConfig,
    pub frame: FrameLayout,
    pub esc: EscSection,
    pub burst: BurstSection,
    pub charge: ChargeSection,
    pub inputs: InputsSection,
    pub packet: PacketSection,
    pub planner: PlannerSection,
    pub predict: PredictSection,
    pub ocv: OcvSection,
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, CliError> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = origin.parent().unwrap_or(Path::new("."));
        config.inputs.resolve(base, origin)?;
        config.validate().map_err(|e| CliError::Config {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    fn validate(&self) -> esc_energy::Result<()> {
        DeviceProfile::new(&self.device)?;
        self.frame.validate()?;
        self.esc_state()?;
        if !(self.burst.brown_out_voltage_v >= 0.0) {
            return Err(esc_energy::Error::InvalidArgument(
                "brown_out_voltage_v must be >= 0".into(),
            ));
        }
        if !(self.predict.horizon_s > 0.0) || self.predict.steps == 0 {
            return Err(esc_energy::Error::InvalidArgument(
                "predict needs horizon_s > 0 and steps >= 1".into(),
            ));
        }
        if let Some(v) = self.packet.voltage_v {
            EscState::new(self.capacitance(), v)?;
        }
        if self.inputs.ocv_table.is_none() {
            OcvTable::new(self.ocv.points.clone())?;
        }
        Ok(())
    }

    /// ESC capacitance (F).
    pub fn capacitance(&self) -> f64 {
        self.esc.capacitance_mf * MILLI
    }

    pub fn esc_state(&self) -> esc_energy::Result<EscState> {
        EscState::new(self.capacitance(), self.esc.initial_voltage_v)
    }

    pub fn profile(&self) -> esc_energy::Result<DeviceProfile> {
        DeviceProfile::new(&self.device)
    }

    pub fn burst_options(&self) -> BurstOptions {
        BurstOptions {
            skip_last_gap: self.burst.skip_last_gap,
            brown_out_voltage: self.burst.brown_out_voltage_v,
            record_samples: self.burst.record_samples,
        }
    }

    pub fn packet_plan(&self) -> PacketPlan {
        PacketPlan {
            msdu_octets: self.packet.msdu_octets,
            tx_power_dbm: self.packet.tx_power_dbm,
            data_rate_bps: self.packet.data_rate_bps,
        }
    }
}

impl InputsSection {
    fn resolve(&mut self, base: &Path, origin: &Path) -> Result<(), CliError> {
        for (key, slot) in [
            ("trace", &mut self.trace),
            ("calibration", &mut self.calibration),
            ("plan", &mut self.plan),
            ("ocv_table", &mut self.ocv_table),
        ] {
            if let Some(p) = slot.as_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
                if !p.is_file() {
                    return Err(CliError::Config {
                        path: origin.to_path_buf(),
                        message: format!("[inputs] {key}: {} does not exist", p.display()),
                    });
                }
            }
        }
        Ok(())
    }
}
