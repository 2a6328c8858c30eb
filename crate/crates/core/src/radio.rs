//! Transmit power versus supply current: the modified sigmoid
//! `P_t = α1 − α2 / (exp(α3 (C_c − α4)) + 1)` with C_c in mA.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{levenberg_marquardt, LsqProblem};
use crate::units::MILLI;

/// Sigmoid coefficients, in the units they are fitted in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sigmoid {
    /// Upper asymptote (dBm).
    pub alpha1_dbm: f64,
    /// Depth between the asymptotes (dB).
    pub alpha2_db: f64,
    /// Slope (1/mA).
    pub alpha3_per_ma: f64,
    /// Midpoint current (mA).
    pub alpha4_ma: f64,
}

impl Default for Sigmoid {
    /// Illustrative coefficients with 3.5 dBm at 16.24 mA.
    fn default() -> Self {
        Self {
            alpha1_dbm: 4.0,
            alpha2_db: 40.0,
            alpha3_per_ma: 0.5,
            alpha4_ma: 7.501_104_295_065_955,
        }
    }
}

/// Numerically stable 1 / (e^z + 1).
fn logistic_tail(z: f64) -> f64 {
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

impl Sigmoid {
    pub fn validate(&self) -> Result<()> {
        let Sigmoid {
            alpha1_dbm,
            alpha2_db,
            alpha3_per_ma,
            alpha4_ma,
        } = *self;
        if ![alpha1_dbm, alpha2_db, alpha3_per_ma, alpha4_ma]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(Error::invalid("sigmoid coefficients must be finite"));
        }
        if !(alpha2_db > 0.0) || !(alpha3_per_ma > 0.0) {
            return Err(Error::invalid(format!(
                "sigmoid needs alpha2 > 0 and alpha3 > 0 (got {alpha2_db}, {alpha3_per_ma})"
            )));
        }
        Ok(())
    }

    /// Open interval of transmit powers the sigmoid can produce (dBm).
    pub fn range(&self) -> (f64, f64) {
        (self.alpha1_dbm - self.alpha2_db, self.alpha1_dbm)
    }

    /// Transmit power (dBm) at a supply current given in amperes.
    pub fn tx_power(&self, current: f64) -> f64 {
        let z = self.alpha3_per_ma * (current / MILLI - self.alpha4_ma);
        self.alpha1_dbm - self.alpha2_db * logistic_tail(z)
    }

    /// Supply current (A) needed for a transmit power, by the closed-form inverse.
    pub fn current_for(&self, p_t_dbm: f64) -> Result<f64> {
        let (low, high) = self.range();
        if !(p_t_dbm > low && p_t_dbm < high) {
            return Err(Error::OutOfRange {
                p_t: p_t_dbm,
                low,
                high,
            });
        }
        // ln(α2/(α1−p) − 1) written as a difference of logs so neither
        // asymptote suffers cancellation.
        let above_floor = p_t_dbm - low;
        let below_ceiling = high - p_t_dbm;
        let c_ma = self.alpha4_ma + (above_floor.ln() - below_ceiling.ln()) / self.alpha3_per_ma;
        Ok(c_ma * MILLI)
    }
}

pub fn tx_power_from_current(sigmoid: &Sigmoid, current: f64) -> f64 {
    sigmoid.tx_power(current)
}

pub fn current_from_tx_power(sigmoid: &Sigmoid, p_t_dbm: f64) -> Result<f64> {
    sigmoid.current_for(p_t_dbm)
}

/// System power (W) as supply voltage times supply current.
pub fn system_power(v_cc: f64, current: f64) -> f64 {
    v_cc * current
}

/// A bench measurement pairing supply current (A) with transmit power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPoint {
    pub supply_current: f64,
    pub tx_power_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmoidFit {
    pub sigmoid: Sigmoid,
    pub rms_residual_db: f64,
}

pub const MIN_CALIBRATION_POINTS: usize = 6;

/// Largest drop (dB) between successive points, ordered by current,
/// that is still attributed to measurement noise.
pub const MONOTONE_TOLERANCE_DB: f64 = 1.0;

/// Parameters: α1, ln α2, ln α3, α4 (keeps α2 and α3 positive).
struct SigmoidResiduals {
    currents_ma: Vec<f64>,
    powers: Vec<f64>,
}

impl SigmoidResiduals {
    fn sigmoid(p: &[f64]) -> Sigmoid {
        Sigmoid {
            alpha1_dbm: p[0],
            alpha2_db: p[1].exp(),
            alpha3_per_ma: p[2].exp(),
            alpha4_ma: p[3],
        }
    }
}

impl LsqProblem for SigmoidResiduals {
    fn n_params(&self) -> usize {
        4
    }

    fn n_residuals(&self) -> usize {
        self.powers.len()
    }

    fn evaluate(
        &self,
        p: &[f64],
        r: &mut DVector<f64>,
        jacobian: Option<&mut DMatrix<f64>>,
    ) -> bool {
        if !p.iter().all(|x| x.is_finite()) || p[1].abs() > 50.0 || p[2].abs() > 50.0 {
            return false;
        }
        let (a1, a2, a3, a4) = (p[0], p[1].exp(), p[2].exp(), p[3]);
        let mut jac = jacobian;
        for (i, (&c, &obs)) in self.currents_ma.iter().zip(&self.powers).enumerate() {
            let z = a3 * (c - a4);
            let s = logistic_tail(z);
            r[i] = a1 - a2 * s - obs;
            if let Some(j) = jac.as_deref_mut() {
                let ds = a2 * s * (1.0 - s);
                j[(i, 0)] = 1.0;
                j[(i, 1)] = -a2 * s;
                j[(i, 2)] = ds * z;
                j[(i, 3)] = -ds * a3;
            }
        }
        true
    }
}

/// Least-squares fit of the four sigmoid coefficients to calibration data.
///
/// Multi-start Levenberg–Marquardt; slope seeds are spread over the
/// calibrated current span.
pub fn fit_sigmoid(points: &[CalibrationPoint]) -> Result<SigmoidFit> {
    if points.len() < MIN_CALIBRATION_POINTS {
        return Err(Error::fit(format!(
            "need at least {MIN_CALIBRATION_POINTS} calibration points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points
        .iter()
        .find(|p| !(p.supply_current > 0.0) || !p.tx_power_dbm.is_finite())
    {
        return Err(Error::invalid(format!(
            "calibration point ({} A, {} dBm) needs positive current and finite power",
            p.supply_current, p.tx_power_dbm
        )));
    }
    let mut sorted: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.supply_current / MILLI, p.tx_power_dbm))
        .collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut running_max = f64::NEG_INFINITY;
    for &(c, p) in &sorted {
        if p < running_max - MONOTONE_TOLERANCE_DB {
            return Err(Error::fit(format!(
                "calibration is not monotone: {p} dBm at {c} mA is more than \
                 {MONOTONE_TOLERANCE_DB} dB below an earlier point"
            )));
        }
        running_max = running_max.max(p);
    }

    let c_min = sorted[0].0;
    let c_max = sorted[sorted.len() - 1].0;
    let p_min = sorted.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let p_max = sorted.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let p_span = p_max - p_min;
    if !(c_max > c_min) || !(p_span > 0.0) {
        return Err(Error::fit("calibration points do not vary"));
    }

    let mid = 0.5 * (p_min + p_max);
    let c_mid = sorted
        .windows(2)
        .find(|w| w[0].1 <= mid && w[1].1 >= mid)
        .map(|w| {
            let (c0, p0) = w[0];
            let (c1, p1) = w[1];
            if p1 > p0 {
                c0 + (c1 - c0) * (mid - p0) / (p1 - p0)
            } else {
                0.5 * (c0 + c1)
            }
        })
        .unwrap_or(0.5 * (c_min + c_max));

    let problem = SigmoidResiduals {
        currents_ma: sorted.iter().map(|x| x.0).collect(),
        powers: sorted.iter().map(|x| x.1).collect(),
    };
    let c_span = c_max - c_min;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for slope_scale in [2.0, 5.0, 10.0, 20.0, 50.0] {
        for (ceiling_pad, depth_scale) in [(0.02, 1.04), (0.1, 1.2)] {
            let seed = [
                p_max + ceiling_pad * p_span,
                (depth_scale * p_span).ln(),
                (slope_scale / c_span).ln(),
                c_mid,
            ];
            if let Some(out) = levenberg_marquardt(&problem, &seed, 500) {
                if best.as_ref().is_none_or(|(_, sse)| out.sse < *sse) {
                    best = Some((out.params, out.sse));
                }
            }
        }
    }
    let (params, sse) = best.ok_or_else(|| Error::fit("no starting point converged"))?;
    let sigmoid = SigmoidResiduals::sigmoid(&params);
    sigmoid
        .validate()
        .map_err(|e| Error::fit(format!("fit produced invalid coefficients: {e}")))?;

    let tail_at = |c: f64| logistic_tail(sigmoid.alpha3_per_ma * (c - sigmoid.alpha4_ma));
    if tail_at(c_min) < 0.8 || tail_at(c_max) > 0.2 {
        return Err(Error::fit(
            "calibration does not span both knees of the S-curve",
        ));
    }

    Ok(SigmoidFit {
        sigmoid,
        rms_residual_db: (sse / problem.powers.len() as f64).sqrt(),
    })
}
