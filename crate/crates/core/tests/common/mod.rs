//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use esc_energy::burst::{burst_energy, BurstOptions};
use esc_energy::planner::CycleRequest;
use esc_energy::{DeviceProfile, Error, EscState, FrameLayout, PacketPlan};

pub struct Replay {
    pub total_energy: f64,
    pub v_final: f64,
    pub active_time: f64,
}

fn draw(v: &mut f64, cap: f64, energy: f64) -> Option<()> {
    let arg = *v * *v - 2.0 * energy / cap;
    if arg <= 0.0 {
        return None;
    }
    *v = arg.sqrt();
    Some(())
}

/// Bit-by-bit replay of a burst. Every bit draws E = V·I/r at the current
/// voltage; lumps use the device constants written out directly.
pub fn replay_burst(
    plans: &[PacketPlan],
    initial: &EscState,
    profile: &DeviceProfile,
    layout: &FrameLayout,
    skip_last_gap: bool,
) -> Option<Replay> {
    let cap = initial.capacitance();
    let mut v = initial.voltage();
    let mut total = 0.0;
    let mut active = 0.0;
    let n = plans.len();
    let mut previous_current = 0.0;
    for (j, plan) in plans.iter().enumerate() {
        let current = profile.sigmoid().current_for(plan.tx_power_dbm).ok()?;
        let l = f64::from(plan.msdu_octets);
        if j == 0 {
            let t_w = 0.004e-3 * l + 1.395e-3;
            let e = 7.8e-3 * v * t_w;
            draw(&mut v, cap, e)?;
            total += e;
            active += t_w;
        } else {
            active += 0.2e-3 + 0.86e-3;
            if !skip_last_gap || j + 1 < n {
                let e = 0.2e-3 * v * (previous_current + 4e-3) / 2.0 + 0.86e-3 * 10.25e-3 * v;
                draw(&mut v, cap, e)?;
                total += e;
            }
        }
        let segments = [
            (8 * u64::from(layout.shr_octets + layout.phr_octets), 250e3),
            (8 * u64::from(layout.mhr_octets), plan.data_rate_bps),
            (8 * u64::from(plan.msdu_octets), plan.data_rate_bps),
            (8 * u64::from(layout.fcs_octets), plan.data_rate_bps),
        ];
        for (bits, rate) in segments {
            for _ in 0..bits {
                let e = v * current / rate;
                draw(&mut v, cap, e)?;
                total += e;
            }
            active += bits as f64 / rate;
        }
        previous_current = current;
    }
    let e_sleep = 0.5 * 0.45e-3 * v * previous_current;
    draw(&mut v, cap, e_sleep)?;
    total += e_sleep;
    active += 0.45e-3;
    Some(Replay {
        total_energy: total,
        v_final: v,
        active_time: active,
    })
}

/// Final voltage of `n` identical packets, or `None` if the ESC runs dry.
pub fn final_voltage(request: &CycleRequest<'_>, n: usize) -> Option<f64> {
    let plans = vec![request.template; n];
    let options = BurstOptions {
        record_samples: false,
        ..request.options
    };
    match burst_energy(
        &plans,
        &request.initial,
        request.profile,
        request.layout,
        &options,
    ) {
        Ok(r) => Some(r.final_state.voltage()),
        Err(Error::EscDepleted { .. }) => None,
        Err(e) => panic!("unexpected error: {e}"),
    }
}

/// Counts packets upward from one until the cutoff is crossed.
pub fn linear_scan_max_packets(request: &CycleRequest<'_>) -> usize {
    if request.initial.voltage() <= request.v_cutoff {
        return 0;
    }
    let mut n = 0;
    while n < request.cap_n {
        match final_voltage(request, n + 1) {
            Some(v) if v >= request.v_cutoff => n += 1,
            _ => break,
        }
    }
    n
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
