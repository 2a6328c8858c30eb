//! ESC charging: the RC charging curve, its least-squares fit, and the
//! open-circuit voltage of the harvester as a function of incident power.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lsq::{levenberg_marquardt, scan_then_refine, LsqProblem};
use crate::profile::EscState;

/// Measured ESC voltages above this are treated as bad input.
pub const MAX_PLAUSIBLE_VOLTAGE: f64 = 10.0;

/// Charging curve of an ESC behind an RF harvester, modelled as an RC circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeModel {
    v_oc: f64,
    r_eq: f64,
    capacitance: f64,
}

impl ChargeModel {
    pub fn new(v_oc: f64, r_eq: f64, capacitance: f64) -> Result<Self> {
        for (name, value) in [("v_oc", v_oc), ("r_eq", r_eq), ("capacitance", capacitance)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::invalid(format!(
                    "charge model {name} = {value} must be positive"
                )));
            }
        }
        Ok(Self {
            v_oc,
            r_eq,
            capacitance,
        })
    }

    /// Open-circuit voltage of the harvester (V).
    pub fn v_oc(&self) -> f64 {
        self.v_oc
    }

    /// Equivalent impedance of the harvesting circuit (Ω).
    pub fn r_eq(&self) -> f64 {
        self.r_eq
    }

    pub fn capacitance(&self) -> f64 {
        self.capacitance
    }

    /// Time constant RC (s).
    pub fn tau(&self) -> f64 {
        self.r_eq * self.capacitance
    }

    /// ESC voltage `t` seconds after charging starts from 0 V.
    pub fn charge_voltage(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("time {t} s must be >= 0")));
        }
        Ok(self.voltage_unchecked(t))
    }

    fn voltage_unchecked(&self, t: f64) -> f64 {
        -self.v_oc * (-t / self.tau()).exp_m1()
    }

    /// Inverse of [`charge_voltage`](Self::charge_voltage).
    pub fn time_to_voltage(&self, v_target: f64) -> Result<f64> {
        if !(v_target >= 0.0) {
            return Err(Error::invalid(format!(
                "target voltage {v_target} V must be >= 0"
            )));
        }
        if v_target >= self.v_oc {
            return Err(Error::UnreachableVoltage {
                target: v_target,
                v_oc: self.v_oc,
            });
        }
        Ok(-self.tau() * (-v_target / self.v_oc).ln_1p())
    }

    /// Sum of squared residuals against a set of samples.
    pub fn sse(&self, samples: &[VoltageSample]) -> f64 {
        samples
            .iter()
            .map(|s| (self.voltage_unchecked(s.t) - s.v).powi(2))
            .sum()
    }
}

/// ½CV² of the ESC.
pub fn stored_energy(state: &EscState) -> f64 {
    state.stored_energy()
}

/// A measured ESC voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageSample {
    /// Seconds since charging started.
    pub t: f64,
    pub v: f64,
}

impl VoltageSample {
    pub fn new(t: f64, v: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("sample time {t} s must be >= 0")));
        }
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("sample voltage {v} V must be >= 0")));
        }
        Ok(Self { t, v })
    }
}

/// Residuals of the charging curve, parameterised as (V_OC, ln τ) or,
/// with a known V_OC, as ln τ alone.
struct ChargeResiduals<'a> {
    samples: &'a [VoltageSample],
    known_v_oc: Option<f64>,
}

impl ChargeResiduals<'_> {
    fn split(&self, p: &[f64]) -> (f64, f64) {
        match self.known_v_oc {
            Some(v) => (v, p[0]),
            None => (p[0], p[1]),
        }
    }
}

impl LsqProblem for ChargeResiduals<'_> {
    fn n_params(&self) -> usize {
        if self.known_v_oc.is_some() {
            1
        } else {
            2
        }
    }

    fn n_residuals(&self) -> usize {
        self.samples.len()
    }

    fn evaluate(
        &self,
        p: &[f64],
        r: &mut DVector<f64>,
        jacobian: Option<&mut DMatrix<f64>>,
    ) -> bool {
        let (v_oc, ln_tau) = self.split(p);
        if !(v_oc > 0.0) || !ln_tau.is_finite() || ln_tau.abs() > 700.0 {
            return false;
        }
        let tau = ln_tau.exp();
        for (i, s) in self.samples.iter().enumerate() {
            r[i] = -v_oc * (-s.t / tau).exp_m1() - s.v;
        }
        if let Some(j) = jacobian {
            for (i, s) in self.samples.iter().enumerate() {
                let u = s.t / tau;
                let e = (-u).exp();
                let d_ln_tau = -v_oc * u * e;
                match self.known_v_oc {
                    Some(_) => j[(i, 0)] = d_ln_tau,
                    None => {
                        j[(i, 0)] = -(-u).exp_m1();
                        j[(i, 1)] = d_ln_tau;
                    }
                }
            }
        }
        true
    }
}

fn check_samples(samples: &[VoltageSample], capacitance: f64) -> Result<()> {
    if !(capacitance > 0.0) || !capacitance.is_finite() {
        return Err(Error::invalid(format!(
            "capacitance {capacitance} F must be positive"
        )));
    }
    for s in samples {
        if !(s.t >= 0.0) || !(s.v >= 0.0) || !s.t.is_finite() {
            return Err(Error::invalid(format!(
                "sample (t={}, v={}) has a negative or non-finite value",
                s.t, s.v
            )));
        }
        if !(s.v <= MAX_PLAUSIBLE_VOLTAGE) {
            return Err(Error::fit(format!(
                "sample voltage {} V exceeds the {MAX_PLAUSIBLE_VOLTAGE} V plausibility bound",
                s.v
            )));
        }
    }
    Ok(())
}

/// Time constant implied by a single sample on a curve with the given V_OC.
fn tau_from_sample(s: &VoltageSample, v_oc: f64) -> Option<f64> {
    if s.t > 0.0 && s.v > 0.0 && s.v < v_oc {
        let tau = -s.t / (-s.v / v_oc).ln_1p();
        (tau.is_finite() && tau > 0.0).then_some(tau)
    } else {
        None
    }
}

fn seed_tau(samples: &[VoltageSample], v_oc: f64) -> Option<f64> {
    let mut by_time: Vec<&VoltageSample> = samples.iter().collect();
    by_time.sort_by(|a, b| a.t.total_cmp(&b.t));
    by_time.into_iter().find_map(|s| tau_from_sample(s, v_oc))
}

/// Best V_OC for a fixed τ (linear least squares) and the resulting SSE.
fn profile_sse(samples: &[VoltageSample], tau: f64) -> (f64, f64) {
    let mut sff = 0.0;
    let mut svf = 0.0;
    for s in samples {
        let f = -(-s.t / tau).exp_m1();
        sff += f * f;
        svf += s.v * f;
    }
    if sff <= 0.0 {
        return (f64::NAN, f64::INFINITY);
    }
    let v_oc = svf / sff;
    let sse = samples
        .iter()
        .map(|s| (-v_oc * (-s.t / tau).exp_m1() - s.v).powi(2))
        .sum();
    (v_oc, sse)
}

/// Decades searched on each side of the seeded time constant.
const TAU_SEARCH_DECADES: f64 = 4.0;
const TAU_SCAN_POINTS: usize = 401;

/// Least-squares fit of V_OC and R to a measured charging trace.
///
/// The capacitance is known; τ is located by a log-spaced scan of the
/// variable-projection objective (V_OC eliminated in closed form), then both
/// parameters are polished with Levenberg–Marquardt.
pub fn fit_charge_model(samples: &[VoltageSample], capacitance: f64) -> Result<ChargeModel> {
    check_samples(samples, capacitance)?;
    if samples.len() < 3 {
        return Err(Error::fit(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    let t_min = samples.iter().map(|s| s.t).fold(f64::INFINITY, f64::min);
    let t_max = samples
        .iter()
        .map(|s| s.t)
        .fold(f64::NEG_INFINITY, f64::max);
    if t_max <= t_min {
        return Err(Error::fit("need samples at two or more distinct times"));
    }
    let v_min = samples.iter().map(|s| s.v).fold(f64::INFINITY, f64::min);
    let v_max = samples
        .iter()
        .map(|s| s.v)
        .fold(f64::NEG_INFINITY, f64::max);
    if v_max - v_min <= 1e-12 * v_max.max(1.0) {
        return Err(Error::fit(
            "all sample voltages are equal; curve is degenerate",
        ));
    }

    let tau0 = seed_tau(samples, 1.05 * v_max)
        .ok_or_else(|| Error::fit("no sample with t > 0 and v > 0 to seed the fit"))?;
    let span = TAU_SEARCH_DECADES * std::f64::consts::LN_10;
    let objective = |ln_tau: f64| profile_sse(samples, ln_tau.exp()).1;
    let (ln_tau, on_edge) = scan_then_refine(
        objective,
        tau0.ln() - span,
        tau0.ln() + span,
        TAU_SCAN_POINTS,
    );
    if on_edge {
        return Err(Error::fit(
            "charging curve shows no usable curvature; V_OC and R are not identifiable",
        ));
    }
    let (v_oc, sse) = profile_sse(samples, ln_tau.exp());
    if !(v_oc > 0.0) {
        return Err(Error::fit(format!("fitted V_OC {v_oc} V is not positive")));
    }

    let problem = ChargeResiduals {
        samples,
        known_v_oc: None,
    };
    let (v_oc, ln_tau) = match levenberg_marquardt(&problem, &[v_oc, ln_tau], 200) {
        Some(out) if out.sse <= sse && out.params[0] > 0.0 => (out.params[0], out.params[1]),
        _ => (v_oc, ln_tau),
    };
    ChargeModel::new(v_oc, ln_tau.exp() / capacitance, capacitance)
        .map_err(|e| Error::fit(format!("fit produced an invalid model: {e}")))
}

/// One-dimensional fit of R when the open-circuit voltage was measured directly.
pub fn fit_r_known_voc(
    samples: &[VoltageSample],
    capacitance: f64,
    v_oc: f64,
) -> Result<ChargeModel> {
    check_samples(samples, capacitance)?;
    if !(v_oc > 0.0) || !v_oc.is_finite() {
        return Err(Error::invalid(format!("V_OC {v_oc} V must be positive")));
    }
    if samples.is_empty() {
        return Err(Error::fit("need at least one sample"));
    }
    if let Some(s) = samples.iter().find(|s| s.v >= v_oc) {
        return Err(Error::fit(format!(
            "sample voltage {} V at t={} s is not below V_OC {v_oc} V",
            s.v, s.t
        )));
    }
    let tau0 = seed_tau(samples, v_oc)
        .ok_or_else(|| Error::fit("no sample with t > 0 and v > 0 to determine R"))?;

    let problem = ChargeResiduals {
        samples,
        known_v_oc: Some(v_oc),
    };
    let span = TAU_SEARCH_DECADES * std::f64::consts::LN_10;
    let objective = |ln_tau: f64| problem.sse(&[ln_tau]).unwrap_or(f64::INFINITY);
    let (ln_tau, on_edge) = scan_then_refine(
        objective,
        tau0.ln() - span,
        tau0.ln() + span,
        TAU_SCAN_POINTS,
    );
    if on_edge {
        return Err(Error::fit("R is not identifiable from these samples"));
    }
    let sse = objective(ln_tau);
    let ln_tau = match levenberg_marquardt(&problem, &[ln_tau], 200) {
        Some(out) if out.sse <= sse => out.params[0],
        _ => ln_tau,
    };
    ChargeModel::new(v_oc, ln_tau.exp() / capacitance, capacitance)
        .map_err(|e| Error::fit(format!("fit produced an invalid model: {e}")))
}

/// Mean absolute difference between predicted and measured voltage.
pub fn prediction_error(model: &ChargeModel, samples: &[VoltageSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("prediction error needs at least one sample"));
    }
    let total: f64 = samples
        .iter()
        .map(|s| Ok((model.charge_voltage(s.t)? - s.v).abs()))
        .sum::<Result<f64>>()?;
    Ok(total / samples.len() as f64)
}

/// Open-circuit voltage of the harvester against incident RF power.
#[derive(Debug, Clone, PartialEq)]
pub struct OcvTable {
    /// (incident power dBm, open-circuit volts), strictly increasing in both.
    points: Vec<(f64, f64)>,
}

/// Result of an [`OcvTable`] lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcvLookup {
    pub v_oc: f64,
    /// Set when the requested power was outside the table and the end value was used.
    pub clamped: bool,
}

impl OcvTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("OCV table must not be empty"));
        }
        if points.iter().any(|(p, v)| !p.is_finite() || !v.is_finite()) {
            return Err(Error::invalid("OCV table contains non-finite values"));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(Error::invalid(format!(
                    "OCV table must be strictly increasing: ({}, {}) then ({}, {})",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(Self { points })
    }

    /// Powercast P2110 measurements.
    pub fn p2110() -> Self {
        Self::new(vec![
            (-14.0, 0.4),
            (-11.3, 0.9),
            (-8.5, 1.6),
            (-7.0, 2.0),
            (-5.0, 2.6),
            (-3.0, 3.2),
            (-2.0, 4.0),
        ])
        .expect("built-in table is valid")
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Piecewise-linear interpolation, clamped to the end values outside the table.
    pub fn lookup(&self, p_dbm: f64) -> OcvLookup {
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        if p_dbm <= first.0 {
            return OcvLookup {
                v_oc: first.1,
                clamped: p_dbm < first.0,
            };
        }
        if p_dbm >= last.0 {
            return OcvLookup {
                v_oc: last.1,
                clamped: p_dbm > last.0,
            };
        }
        let k = self.points.partition_point(|(p, _)| *p <= p_dbm);
        let (p0, v0) = self.points[k - 1];
        let (p1, v1) = self.points[k];
        let v_oc = if p_dbm == p0 {
            v0
        } else {
            v0 + (v1 - v0) * (p_dbm - p0) / (p1 - p0)
        };
        OcvLookup {
            v_oc,
            clamped: false,
        }
    }
}

impl Default for OcvTable {
    fn default() -> Self {
        Self::p2110()
    }
}

pub fn ocv_from_power(table: &OcvTable, p_dbm: f64) -> OcvLookup {
    table.lookup(p_dbm)
}
