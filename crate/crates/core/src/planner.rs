//! Feasibility queries over one duty cycle: how many identical packets fit
//! into an active phase, and how long the ESC then needs to recharge.
//!
//! Recharge reuses one [`ChargeModel`] regardless of the voltage it starts
//! from (the charging curve is time-shift invariant). ESC leakage between
//! cycles is not modelled.

use crate::burst::{burst_energy, BurstOptions, BurstReport};
use crate::error::{Error, Result};
use crate::harvest::ChargeModel;
use crate::profile::{DeviceProfile, EscState, FrameLayout, PacketPlan};

/// Inputs shared by [`max_packets`] and [`cycle_report`].
#[derive(Debug, Clone, Copy)]
pub struct CycleRequest<'a> {
    pub initial: EscState,
    /// The burst must end at or above this voltage.
    pub v_cutoff: f64,
    pub template: PacketPlan,
    pub profile: &'a DeviceProfile,
    pub layout: &'a FrameLayout,
    pub options: BurstOptions,
    /// Upper bound on the packet count searched.
    pub cap_n: usize,
}

impl CycleRequest<'_> {
    fn validate(&self) -> Result<()> {
        if !(self.v_cutoff >= 0.0) || !self.v_cutoff.is_finite() {
            return Err(Error::invalid(format!(
                "cutoff voltage {} V must be >= 0",
                self.v_cutoff
            )));
        }
        if self.cap_n < 1 {
            return Err(Error::invalid("packet cap must be at least 1"));
        }
        self.template.validate(self.layout)
    }

    fn burst(&self, n: usize, record_samples: bool) -> Result<BurstReport> {
        let plans = vec![self.template; n];
        let options = BurstOptions {
            record_samples,
            ..self.options
        };
        burst_energy(&plans, &self.initial, self.profile, self.layout, &options)
    }

    /// Whether `n` packets end at or above the cutoff. Depletion counts as
    /// infeasible.
    pub fn feasible(&self, n: usize) -> Result<bool> {
        if n == 0 {
            return Ok(true);
        }
        match self.burst(n, false) {
            Ok(report) => Ok(report.final_state.voltage() >= self.v_cutoff),
            Err(Error::EscDepleted { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    }
}

/// Largest N ≤ `cap_n` whose burst ends at or above the cutoff, by binary
/// search over the (strictly decreasing) final voltage.
pub fn max_packets(request: &CycleRequest<'_>) -> Result<usize> {
    request.validate()?;
    if request.initial.voltage() <= request.v_cutoff || !request.feasible(1)? {
        return Ok(0);
    }
    if request.feasible(request.cap_n)? {
        return Ok(request.cap_n);
    }
    // Invariant: `lo` feasible, `hi` infeasible.
    let (mut lo, mut hi) = (1, request.cap_n);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if request.feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Time (s) for the ESC to charge from `v_low` to `v_high`.
pub fn recharge_plan(model: &ChargeModel, v_low: f64, v_high: f64) -> Result<f64> {
    if v_low > v_high {
        return Err(Error::invalid(format!(
            "recharge from {v_low} V to {v_high} V: start is above target"
        )));
    }
    let t_high = model.time_to_voltage(v_high)?;
    let t_low = model.time_to_voltage(v_low)?;
    Ok(t_high - t_low)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclePlan {
    pub n_packets: usize,
    /// `None` when not even one packet fits.
    pub burst: Option<BurstReport>,
    pub active_time: f64,
    pub recharge_time: f64,
    /// active / (active + recharge).
    pub duty_cycle: f64,
}

pub fn cycle_report(model: &ChargeModel, request: &CycleRequest<'_>) -> Result<CyclePlan> {
    let c_model = model.capacitance();
    let c_esc = request.initial.capacitance();
    if (c_model - c_esc).abs() > 1e-12 * c_model.max(c_esc) {
        return Err(Error::invalid(format!(
            "charge model capacitance {c_model} F differs from ESC capacitance {c_esc} F"
        )));
    }
    let n_packets = max_packets(request)?;
    if n_packets == 0 {
        return Ok(CyclePlan {
            n_packets,
            burst: None,
            active_time: 0.0,
            recharge_time: 0.0,
            duty_cycle: 0.0,
        });
    }
    let burst = request.burst(n_packets, request.options.record_samples)?;
    let v_final = burst.final_state.voltage();
    let v_initial = request.initial.voltage();
    let recharge_time = if v_final >= v_initial {
        0.0
    } else {
        recharge_plan(model, v_final, v_initial)?
    };
    let active_time = burst.active_time;
    Ok(CyclePlan {
        n_packets,
        active_time,
        recharge_time,
        duty_cycle: active_time / (active_time + recharge_time),
        burst: Some(burst),
    })
}
