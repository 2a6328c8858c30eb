use esc_energy::burst::{burst_energy, protocol_overhead, BurstReport, FrameLoad};
use esc_energy::harvest::{
    fit_charge_model, fit_r_known_voc, prediction_error, ChargeModel, OcvTable,
};
use esc_energy::io::{load_burst_plan, load_calibration, load_ocv_table, load_voltage_trace};
use esc_energy::packet::{
    interpacket_overhead, interpacket_time, packet_timing, sleep_energy, wakeup_energy,
};
use esc_energy::planner::{cycle_report, CycleRequest};
use esc_energy::radio::{fit_sigmoid, system_power};
use esc_energy::report::{Report, Table};
use esc_energy::units::{to_uj, MILLI};

use crate::config::RunConfig;
use crate::CliError;

fn missing(command: &str, key: &str) -> CliError {
    CliError::Config {
        path: "<config>".into(),
        message: format!("{command} needs [inputs] {key}"),
    }
}

fn model_fields(report: &mut Report, model: &ChargeModel) {
    report
        .field("v_oc_v", model.v_oc())
        .field("r_eq_ohm", model.r_eq())
        .field("capacitance_f", model.capacitance())
        .field("tau_s", model.tau());
}

/// Charging model from `[charge]`, or fitted to `[inputs] trace`.
fn charge_model(config: &RunConfig, command: &str) -> Result<ChargeModel, CliError> {
    let cap = config.capacitance();
    match (config.charge.v_oc_v, config.charge.r_eq_ohm) {
        (Some(v_oc), Some(r)) => Ok(ChargeModel::new(v_oc, r, cap)?),
        (v_oc, _) => {
            let path = config
                .inputs
                .trace
                .as_ref()
                .ok_or_else(|| CliError::Config {
                    path: "<config>".into(),
                    message: format!(
                        "{command} needs [charge] v_oc_v and r_eq_ohm, or [inputs] trace"
                    ),
                })?;
            let samples = load_voltage_trace(path)?;
            Ok(match v_oc {
                Some(v_oc) => fit_r_known_voc(&samples, cap, v_oc)?,
                None => fit_charge_model(&samples, cap)?,
            })
        }
    }
}

pub fn fit_charge(config: &RunConfig) -> Result<Report, CliError> {
    let path = config
        .inputs
        .trace
        .as_ref()
        .ok_or_else(|| missing("fit-charge", "trace"))?;
    let samples = load_voltage_trace(path)?;
    let cap = config.capacitance();
    let model = match config.charge.v_oc_v {
        Some(v_oc) => fit_r_known_voc(&samples, cap, v_oc)?,
        None => fit_charge_model(&samples, cap)?,
    };
    let mut report = Report::new("fit-charge");
    report
        .field("n_samples", samples.len())
        .field("v_oc_known", config.charge.v_oc_v.is_some());
    model_fields(&mut report, &model);
    report
        .field("mean_abs_residual_v", prediction_error(&model, &samples)?)
        .field("sse_v2", model.sse(&samples));
    let mut table = Table::new("residuals", &["t_s", "v_v", "v_fit_v", "residual_v"]);
    for s in &samples {
        let fit = model.charge_voltage(s.t)?;
        table.push(vec![s.t.into(), s.v.into(), fit.into(), (s.v - fit).into()]);
    }
    report.tables.push(table);
    Ok(report)
}

pub fn predict_charge(config: &RunConfig) -> Result<Report, CliError> {
    let model = charge_model(config, "predict-charge")?;
    let p = &config.predict;
    let mut report = Report::new("predict-charge");
    model_fields(&mut report, &model);
    report
        .field("horizon_s", p.horizon_s)
        .field("v_end_v", model.charge_voltage(p.horizon_s)?);
    if let Some(target) = p.target_v {
        report
            .field("target_v", target)
            .field("time_to_target_s", model.time_to_voltage(target)?);
    }
    let mut table = Table::new("curve", &["t_s", "v_v", "e_stored_uj"]);
    for k in 0..=p.steps {
        let t = p.horizon_s * k as f64 / p.steps as f64;
        let v = model.charge_voltage(t)?;
        let e = 0.5 * model.capacitance() * v * v;
        table.push(vec![t.into(), v.into(), to_uj(e).into()]);
    }
    report.tables.push(table);
    Ok(report)
}

pub fn ocv(config: &RunConfig) -> Result<Report, CliError> {
    let table = match &config.inputs.ocv_table {
        Some(path) => load_ocv_table(path)?,
        None => OcvTable::new(config.ocv.points.clone())?,
    };
    let mut report = Report::new("ocv");
    report
        .field("n_knots", table.points().len())
        .field("n_queries", config.ocv.p_dbm.len());
    let mut out = Table::new("ocv", &["p_dbm", "v_oc_v", "clamped"]);
    for &p in &config.ocv.p_dbm {
        let lookup = table.lookup(p);
        out.push(vec![p.into(), lookup.v_oc.into(), lookup.clamped.into()]);
    }
    report.tables.push(out);
    Ok(report)
}

pub fn fit_power(config: &RunConfig) -> Result<Report, CliError> {
    let path = config
        .inputs
        .calibration
        .as_ref()
        .ok_or_else(|| missing("fit-power", "calibration"))?;
    let points = load_calibration(path)?;
    let fit = fit_sigmoid(&points)?;
    let s = fit.sigmoid;
    let (low, high) = s.range();
    let mut report = Report::new("fit-power");
    report
        .field("n_points", points.len())
        .field("alpha1_dbm", s.alpha1_dbm)
        .field("alpha2_db", s.alpha2_db)
        .field("alpha3_per_ma", s.alpha3_per_ma)
        .field("alpha4_ma", s.alpha4_ma)
        .field("p_t_low_dbm", low)
        .field("p_t_high_dbm", high)
        .field("rms_residual_db", fit.rms_residual_db);
    let mut table = Table::new(
        "calibration",
        &["c_c_ma", "p_t_dbm", "p_fit_dbm", "residual_db"],
    );
    for p in &points {
        let predicted = s.tx_power(p.supply_current);
        table.push(vec![
            (p.supply_current / MILLI).into(),
            p.tx_power_dbm.into(),
            predicted.into(),
            (p.tx_power_dbm - predicted).into(),
        ]);
    }
    report.tables.push(table);
    Ok(report)
}

pub fn packet_cost(config: &RunConfig) -> Result<Report, CliError> {
    let profile = config.profile()?;
    let layout = config.frame;
    let plan = config.packet_plan();
    plan.validate(&layout)?;
    let v = config
        .packet
        .voltage_v
        .unwrap_or(config.esc.initial_voltage_v);
    let current = profile.sigmoid().current_for(plan.tx_power_dbm)?;
    let timing = packet_timing(&profile, &layout, plan.msdu_octets, plan.data_rate_bps)?;
    let load = FrameLoad {
        msdu_octets: plan.msdu_octets,
        current,
        data_rate: plan.data_rate_bps,
    };
    let frame = protocol_overhead(&layout, &load, v, config.capacitance())?;
    let v_end = frame.v_after_fcs;

    let mut report = Report::new("packet-cost");
    report
        .field("msdu_octets", plan.msdu_octets)
        .field("tx_power_dbm", plan.tx_power_dbm)
        .field("data_rate_bps", plan.data_rate_bps)
        .field("supply_current_ma", current / MILLI)
        .field("voltage_v", v)
        .field("system_power_w", system_power(v, current))
        .field("wake_time_s", timing.wake_time)
        .field("airtime_s", timing.airtime)
        .field("preamble_time_s", timing.preamble_time)
        .field("effective_fraction", timing.effective_fraction)
        .field("interpacket_time_s", interpacket_time(&profile))
        .field(
            "e_wakeup_uj",
            to_uj(wakeup_energy(&profile, v, plan.msdu_octets)),
        )
        .field("e_phy_uj", to_uj(frame.e_phy))
        .field("e_mhr_uj", to_uj(frame.e_mhr))
        .field("e_msdu_uj", to_uj(frame.e_msdu))
        .field("e_fcs_uj", to_uj(frame.e_fcs))
        .field("e_protocol_uj", to_uj(frame.protocol_energy()))
        .field("e_payload_uj", to_uj(frame.payload_energy()))
        .field("e_frame_uj", to_uj(frame.total()))
        .field("v_after_fcs_v", v_end)
        .field(
            "e_interpacket_uj",
            to_uj(interpacket_overhead(&profile, v_end, current)),
        )
        .field("e_sleep_uj", to_uj(sleep_energy(&profile, v_end, current)));
    Ok(report)
}

fn packets_table(burst: &BurstReport) -> Table {
    let mut table = Table::new(
        "packets",
        &[
            "packet",
            "msdu_octets",
            "tx_power_dbm",
            "data_rate_bps",
            "supply_current_ma",
            "lead_in_stage",
            "e_lead_in_uj",
            "v_start_v",
            "e_phy_uj",
            "e_mhr_uj",
            "e_msdu_uj",
            "e_fcs_uj",
            "v_after_fcs_v",
            "airtime_s",
        ],
    );
    for p in &burst.packets {
        table.push(vec![
            p.index.into(),
            p.plan.msdu_octets.into(),
            p.plan.tx_power_dbm.into(),
            p.plan.data_rate_bps.into(),
            (p.supply_current / MILLI).into(),
            p.lead_in.map(|d| d.stage.as_str()).into(),
            p.lead_in.map(|d| to_uj(d.energy)).into(),
            p.v_start.into(),
            to_uj(p.frame.e_phy).into(),
            to_uj(p.frame.e_mhr).into(),
            to_uj(p.frame.e_msdu).into(),
            to_uj(p.frame.e_fcs).into(),
            p.frame.v_after_fcs.into(),
            p.airtime.into(),
        ]);
    }
    table
}

fn burst_fields(report: &mut Report, burst: &BurstReport) {
    let frames: f64 = burst.packets.iter().map(|p| p.frame.total()).sum();
    let gaps: f64 = burst.interpacket().map(|d| d.energy).sum();
    report
        .field("n_packets", burst.packets.len())
        .field("capacitance_f", burst.initial.capacitance())
        .field("v_init_v", burst.initial.voltage())
        .field("v_final_v", burst.final_state.voltage())
        .field("e_total_uj", to_uj(burst.total_energy))
        .field("e_wakeup_uj", to_uj(burst.wakeup().energy))
        .field("e_interpacket_uj", to_uj(gaps))
        .field("e_frames_uj", to_uj(frames))
        .field("e_sleep_uj", to_uj(burst.sleep.energy))
        .field("active_time_s", burst.active_time)
        .field("brown_out", burst.brown_out.is_some())
        .field("brown_out_packet", burst.brown_out.map(|b| b.packet))
        .field("brown_out_stage", burst.brown_out.map(|b| b.stage.as_str()))
        .field("brown_out_v", burst.brown_out.map(|b| b.voltage));
}

fn brown_out_warning(burst: &BurstReport, threshold: f64) -> Vec<String> {
    burst
        .brown_out
        .iter()
        .map(|b| {
            format!(
                "voltage fell to {:.4} V (below {threshold} V) during {} of packet {}",
                b.voltage, b.stage, b.packet
            )
        })
        .collect()
}

pub fn simulate_burst(config: &RunConfig) -> Result<(Report, Vec<String>), CliError> {
    let path = config
        .inputs
        .plan
        .as_ref()
        .ok_or_else(|| missing("simulate-burst", "plan"))?;
    let plans = load_burst_plan(path)?;
    let options = config.burst_options();
    let burst = burst_energy(
        &plans,
        &config.esc_state()?,
        &config.profile()?,
        &config.frame,
        &options,
    )?;
    let mut report = Report::new("simulate-burst");
    burst_fields(&mut report, &burst);
    report.tables.push(packets_table(&burst));
    if options.record_samples {
        let mut table = Table::new(
            "samples",
            &["packet", "stage", "bit", "e_cumulative_uj", "v_v"],
        );
        for s in &burst.samples {
            table.push(vec![
                s.packet.into(),
                s.stage.as_str().into(),
                s.bit.into(),
                to_uj(s.cumulative_energy).into(),
                s.voltage.into(),
            ]);
        }
        report.tables.push(table);
    }
    Ok((report, brown_out_warning(&burst, options.brown_out_voltage)))
}

pub fn plan_cycle(config: &RunConfig) -> Result<(Report, Vec<String>), CliError> {
    let model = charge_model(config, "plan-cycle")?;
    let profile = config.profile()?;
    let options = config.burst_options();
    let request = CycleRequest {
        initial: config.esc_state()?,
        v_cutoff: config.planner.v_cutoff_v,
        template: config.packet_plan(),
        profile: &profile,
        layout: &config.frame,
        options: esc_energy::burst::BurstOptions {
            record_samples: false,
            ..options
        },
        cap_n: config.planner.cap_n,
    };
    let plan = cycle_report(&model, &request)?;
    let mut report = Report::new("plan-cycle");
    model_fields(&mut report, &model);
    report
        .field("v_cutoff_v", config.planner.v_cutoff_v)
        .field("cap_n", config.planner.cap_n)
        .field("n_packets", plan.n_packets)
        .field("v_init_v", config.esc.initial_voltage_v)
        .field(
            "v_final_v",
            plan.burst
                .as_ref()
                .map_or(config.esc.initial_voltage_v, |b| b.final_state.voltage()),
        )
        .field(
            "e_total_uj",
            plan.burst.as_ref().map_or(0.0, |b| to_uj(b.total_energy)),
        )
        .field("active_time_s", plan.active_time)
        .field("recharge_time_s", plan.recharge_time)
        .field("duty_cycle", plan.duty_cycle);
    let mut warnings = Vec::new();
    if let Some(burst) = &plan.burst {
        report.tables.push(packets_table(burst));
        warnings = brown_out_warning(burst, options.brown_out_voltage);
    }
    Ok((report, warnings))
}
