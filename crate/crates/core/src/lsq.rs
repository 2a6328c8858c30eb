//! Small nonlinear least-squares toolkit used by the curve fits.

use nalgebra::{DMatrix, DVector};

/// A residual model with an analytic Jacobian.
pub(crate) trait LsqProblem {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;

    /// Writes residuals (model − observation) and, when requested, the
    /// Jacobian d(residual)/d(param). Returns `false` when `params` lies
    /// outside the model's domain.
    fn evaluate(
        &self,
        params: &[f64],
        residuals: &mut DVector<f64>,
        jacobian: Option<&mut DMatrix<f64>>,
    ) -> bool;

    fn sse(&self, params: &[f64]) -> Option<f64> {
        let mut r = DVector::zeros(self.n_residuals());
        if self.evaluate(params, &mut r, None) {
            let s = r.norm_squared();
            s.is_finite().then_some(s)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    pub sse: f64,
}

/// Levenberg–Marquardt with Marquardt's diagonal scaling.
///
/// Returns `None` only if the starting point is outside the model domain.
pub(crate) fn levenberg_marquardt<P: LsqProblem>(
    problem: &P,
    start: &[f64],
    max_iterations: usize,
) -> Option<LmOutcome> {
    let n = problem.n_params();
    let m = problem.n_residuals();
    let mut params = start.to_vec();
    let mut r = DVector::zeros(m);
    let mut jac = DMatrix::zeros(m, n);
    if !problem.evaluate(&params, &mut r, Some(&mut jac)) {
        return None;
    }
    let mut sse = r.norm_squared();
    if !sse.is_finite() {
        return None;
    }
    let mut lambda = 1e-3;
    let mut trial_r = DVector::zeros(m);
    let mut iterations = 0;

    while iterations < max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let gradient = jac.transpose() * &r;
        if gradient.amax() <= 1e-300 || sse == 0.0 {
            break;
        }

        let mut improved = false;
        let mut step_small = false;
        for _ in 0..40 {
            let mut lhs = jtj.clone();
            for i in 0..n {
                let d = jtj[(i, i)].max(1e-30);
                lhs[(i, i)] += lambda * d;
            }
            let Some(chol) = lhs.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&gradient));
            let trial: Vec<f64> = params
                .iter()
                .zip(delta.iter())
                .map(|(p, d)| p + d)
                .collect();
            step_small = delta
                .iter()
                .zip(params.iter())
                .all(|(d, p)| d.abs() <= 1e-14 * (p.abs() + 1e-14));
            if problem.evaluate(&trial, &mut trial_r, None) {
                let trial_sse = trial_r.norm_squared();
                if trial_sse.is_finite() && trial_sse < sse {
                    let rel_gain = (sse - trial_sse) / sse.max(1e-300);
                    params = trial;
                    sse = trial_sse;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    if rel_gain < 1e-15 {
                        step_small = true;
                    }
                    break;
                }
            }
            if step_small {
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !improved || step_small {
            break;
        }
        if !problem.evaluate(&params, &mut r, Some(&mut jac)) {
            break;
        }
    }

    Some(LmOutcome { params, sse })
}

/// Golden-section search for the minimum of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while (hi - lo).abs() > tol * (c.abs() + d.abs()).max(1e-300) {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Scans `f` on a grid, then refines the best cell by golden section.
///
/// Returns the argmin and whether it sits on a grid boundary.
pub(crate) fn scan_then_refine<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    points: usize,
) -> (f64, bool) {
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for k in 0..points {
        let v = f(lo + step * k as f64);
        if v < best_val {
            best_val = v;
            best = k;
        }
    }
    let on_edge = best == 0 || best == points - 1;
    let a = lo + step * best.saturating_sub(1) as f64;
    let b = lo + step * (best + 1).min(points - 1) as f64;
    (golden_section(&f, a, b, 1e-12), on_edge)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Line {
        xs: Vec<f64>,
        ys: Vec<f64>,
    }

    impl LsqProblem for Line {
        fn n_params(&self) -> usize {
            2
        }
        fn n_residuals(&self) -> usize {
            self.xs.len()
        }
        fn evaluate(&self, p: &[f64], r: &mut DVector<f64>, j: Option<&mut DMatrix<f64>>) -> bool {
            for (i, (x, y)) in self.xs.iter().zip(&self.ys).enumerate() {
                r[i] = p[0] * x + p[1] - y;
            }
            if let Some(j) = j {
                for (i, x) in self.xs.iter().enumerate() {
                    j[(i, 0)] = *x;
                    j[(i, 1)] = 1.0;
                }
            }
            true
        }
    }

    #[test]
    fn lm_solves_linear_problem() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let out = levenberg_marquardt(&Line { xs, ys }, &[0.0, 0.0], 200).unwrap();
        assert!((out.params[0] - 3.0).abs() < 1e-9);
        assert!((out.params[1] + 2.0).abs() < 1e-9);
        assert!(out.sse < 1e-18);
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let x = golden_section(|x| (x - 1.7).powi(2), 0.0, 5.0, 1e-12);
        assert!((x - 1.7).abs() < 1e-6);
    }

    #[test]
    fn scan_flags_boundary_minimum() {
        let (_, edge) = scan_then_refine(|x| x, 0.0, 1.0, 11);
        assert!(edge);
        let (x, edge) = scan_then_refine(|x| (x - 0.33).powi(2), 0.0, 1.0, 11);
        assert!(!edge);
        assert!((x - 0.33).abs() < 1e-6);
    }
}
