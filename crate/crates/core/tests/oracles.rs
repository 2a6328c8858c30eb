mod common;

use common::{linear_scan_max_packets, rel, replay_burst};
use esc_energy::burst::{bit_energy_oracle, burst_energy, segment_energy, BurstOptions};
use esc_energy::harvest::{fit_charge_model, ChargeModel, VoltageSample};
use esc_energy::packet::{packet_airtime, wakeup_time};
use esc_energy::planner::{cycle_report, CycleRequest};
use esc_energy::{DeviceProfile, EscState, FrameLayout, PacketPlan};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

fn reference_plan() -> PacketPlan {
    PacketPlan {
        msdu_octets: 106,
        tx_power_dbm: 3.5,
        data_rate_bps: 250e3,
    }
}

#[test]
fn charging_reference_values() {
    let m = ChargeModel::new(2.6, 170.6, 2.2e-3).unwrap();
    assert!((m.tau() - 0.375_32).abs() < 1e-12);
    let v = m.charge_voltage(m.tau()).unwrap();
    assert!((v - 2.6 * (1.0 - (-1f64).exp())).abs() < 1e-12);
    assert!((v - 1.643_513_5).abs() < 1e-6);
    let e = 0.5 * 2.2e-3 * 1.6436f64.powi(2);
    assert!((e - 2.971_56e-3).abs() < 1e-8);
    assert!((m.time_to_voltage(1.6436).unwrap() - 0.3753).abs() < 1e-4);
}

#[test]
fn preamble_segment_against_bit_oracle() {
    let s = segment_energy(2.5, 16.24e-3, 250e3, 48, 0.12e-3).unwrap();
    let oracle = bit_energy_oracle(2.5, 16.24e-3, 250e3, 0.12e-3, 48).unwrap();
    let sum: f64 = oracle.energies.iter().sum();
    assert!((s.energy * 1e6 - 7.755).abs() < 1e-3);
    assert!((sum * 1e6 - 7.755_53).abs() < 1e-5);
    assert!(rel(s.energy, sum) < 2e-4);
    assert!(rel(s.v_end, oracle.v_final) < 1e-5);
}

#[test]
fn one_bit_oracle_voltage_drop() {
    let t = bit_energy_oracle(2.5, 16.24e-3, 250e3, 0.12e-3, 1016).unwrap();
    assert!((t.energies[1015] * 1e6 - 0.126_703_1).abs() < 1e-6);
    assert!((t.v_final - 1.949_94).abs() < 1e-4);
    let sum: f64 = t.energies.iter().sum();
    assert!((sum * 1e6 - 146.8645).abs() < 1e-3);
}

#[test]
fn burst_matches_bit_by_bit_replay() {
    let mut rng = StdRng::seed_from_u64(11);
    let profile = DeviceProfile::default();
    let layout = FrameLayout::default();
    let rates = [250e3, 1e6, 2e6];
    for _ in 0..25 {
        let n = rng.random_range(1..=6);
        let plans: Vec<PacketPlan> = (0..n)
            .map(|_| PacketPlan {
                msdu_octets: rng.random_range(1..=106),
                tx_power_dbm: rng.random_range(-15.0..3.8),
                data_rate_bps: rates[rng.random_range(0..3)],
            })
            .collect();
        let initial =
            EscState::new(rng.random_range(1e-3..20e-3), rng.random_range(2.0..3.6)).unwrap();
        let skip = rng.random_bool(0.3);
        let options = BurstOptions {
            skip_last_gap: skip,
            record_samples: false,
            ..BurstOptions::default()
        };
        let report = burst_energy(&plans, &initial, &profile, &layout, &options).unwrap();
        let replay = replay_burst(&plans, &initial, &profile, &layout, skip).unwrap();
        assert!(rel(report.total_energy, replay.total_energy) < 1e-3);
        assert!(rel(report.final_state.voltage(), replay.v_final) < 1e-3);
        assert!(rel(report.active_time, replay.active_time) < 1e-12);
    }
}

#[test]
fn large_capacitor_single_packet_active_time() {
    let profile = DeviceProfile::default();
    let layout = FrameLayout::default();
    let plan = reference_plan();
    let initial = EscState::new(1.0, 2.5).unwrap();
    let report = burst_energy(
        &[plan],
        &initial,
        &profile,
        &layout,
        &BurstOptions::default(),
    )
    .unwrap();
    let airtime = packet_airtime(&layout, 106, 250e3).unwrap().airtime;
    let expected = wakeup_time(&profile, 106) + airtime + 0.45e-3;
    assert_eq!(report.active_time, expected);
}

fn check_cycle_composition(cap: f64) -> usize {
    let profile = DeviceProfile::default();
    let layout = FrameLayout::default();
    let model = ChargeModel::new(3.0, 1500.0, cap).unwrap();
    let request = CycleRequest {
        initial: EscState::new(cap, 2.5).unwrap(),
        v_cutoff: 1.8,
        template: reference_plan(),
        profile: &profile,
        layout: &layout,
        options: BurstOptions::default(),
        cap_n: 20,
    };
    let plan = cycle_report(&model, &request).unwrap();
    let n = linear_scan_max_packets(&request);
    assert_eq!(plan.n_packets, n);
    let n_plus = common::final_voltage(&request, n + 1);
    assert!(n_plus.is_none_or(|v| v < 1.8));
    if n == 0 {
        assert!(plan.burst.is_none());
        assert_eq!((plan.duty_cycle, plan.recharge_time), (0.0, 0.0));
        return n;
    }

    let plans = vec![reference_plan(); n];
    let replay = replay_burst(&plans, &request.initial, &profile, &layout, false).unwrap();
    let burst = burst_energy(
        &plans,
        &request.initial,
        &profile,
        &layout,
        &BurstOptions::default(),
    )
    .unwrap();
    let v_final = burst.final_state.voltage();
    assert!(v_final >= 1.8);
    assert!(rel(v_final, replay.v_final) < 1e-3);
    let tau = 1500.0 * cap;
    let t_of = |v: f64| -tau * (1.0 - v / 3.0).ln();
    let recharge = t_of(2.5) - t_of(v_final);
    assert!(rel(plan.recharge_time, recharge) < 1e-9);
    assert_eq!(plan.active_time, burst.active_time);
    let duty = burst.active_time / (burst.active_time + recharge);
    assert!(rel(plan.duty_cycle, duty) < 1e-9);
    n
}

#[test]
fn cycle_report_matches_step_by_step_composition() {
    // One packet plus wake-up drains 0.12 mF from 2.5 V past 1.8 V.
    assert_eq!(check_cycle_composition(0.12e-3), 0);
    assert!(check_cycle_composition(1e-3) >= 2);
}

fn sse(samples: &[VoltageSample], v_oc: f64, r: f64, cap: f64) -> f64 {
    samples
        .iter()
        .map(|s| (v_oc * (1.0 - (-s.t / (r * cap)).exp()) - s.v).powi(2))
        .sum()
}

#[test]
fn charge_fit_beats_every_point_of_a_local_grid() {
    let mut rng = StdRng::seed_from_u64(21);
    let noise = Normal::new(0.0, 5e-3).unwrap();
    let cap = 2.2e-3;
    let truth = ChargeModel::new(2.6, 170.6, cap).unwrap();
    let samples: Vec<VoltageSample> = (0..60)
        .map(|k| {
            let t = 0.02 * f64::from(k);
            let v = truth.charge_voltage(t).unwrap() + noise.sample(&mut rng);
            VoltageSample::new(t, v.max(0.0)).unwrap()
        })
        .collect();
    let fit = fit_charge_model(&samples, cap).unwrap();
    let best = sse(&samples, fit.v_oc(), fit.r_eq(), cap);
    for i in -10..=10 {
        for j in -10..=10 {
            let v_oc = fit.v_oc() * (1.0 + 0.005 * f64::from(i));
            let r = fit.r_eq() * (1.0 + 0.005 * f64::from(j));
            assert!(
                best <= sse(&samples, v_oc, r, cap) * (1.0 + 1e-12),
                "grid point ({i}, {j}) beats the fit"
            );
        }
    }
}
