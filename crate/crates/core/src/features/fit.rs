//! Decay and slope constants of peak sequences.

use nalgebra::{Matrix3, Vector3};

use super::peaks::PeakSeries;

/// Fitted `amplitude · e^{-rate·(t - t₀)} + offset`, with `t₀` the first
/// peak time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit {
    pub amplitude: f64,
    pub rate: f64,
    pub offset: f64,
    /// Sum of squared residuals.
    pub cost: f64,
}

const MAX_ITERATIONS: usize = 500;

fn residuals(tau: &[f64], y: &[f64], p: &Vector3<f64>) -> (Vec<f64>, f64) {
    let r: Vec<f64> = tau
        .iter()
        .zip(y)
        .map(|(t, v)| p[0] * (-p[1] * t).exp() + p[2] - v)
        .collect();
    let cost = r.iter().map(|v| v * v).sum();
    (r, cost)
}

fn normal_equations(tau: &[f64], r: &[f64], p: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    for (t, res) in tau.iter().zip(r) {
        let e = (-p[1] * t).exp();
        let row = Vector3::new(e, -p[0] * t * e, 1.0);
        jtj += row * row.transpose();
        jtr += row * *res;
    }
    (jtj, jtr)
}

fn small_step(step: &Vector3<f64>, p: &Vector3<f64>) -> bool {
    step.iter()
        .zip(p.iter())
        .all(|(s, v)| s.abs() <= 1e-12 * (v.abs() + 1e-12))
}

/// Newton steps on the exact cost Hessian from an LM solution. Near the
/// minimum the cost is flat to rounding, so LM alone pins the parameters
/// only to about the square root of machine precision; driving the gradient
/// to zero pins them to working precision.
fn polish(tau: &[f64], y: &[f64], mut p: Vector3<f64>, mut cost: f64) -> (Vector3<f64>, f64) {
    let mut last_norm = f64::INFINITY;
    for _ in 0..POLISH_ITERATIONS {
        let (r, _) = residuals(tau, y, &p);
        let (mut hessian, gradient) = normal_equations(tau, &r, &p);
        for (t, res) in tau.iter().zip(&r) {
            let e = (-p[1] * t).exp();
            let cross = -t * e * res;
            hessian[(0, 1)] += cross;
            hessian[(1, 0)] += cross;
            hessian[(1, 1)] += p[0] * t * t * e * res;
        }
        let Some(chol) = hessian.cholesky() else {
            break;
        };
        let step = chol.solve(&(-gradient));
        let norm = step.norm();
        if !norm.is_finite() || norm >= last_norm {
            break;
        }
        let candidate = p + step;
        let (_, ccost) = residuals(tau, y, &candidate);
        if !(ccost <= cost * (1.0 + 1e-9)) {
            break;
        }
        p = candidate;
        cost = ccost;
        last_norm = norm;
        if norm == 0.0 {
            break;
        }
    }
    (p, cost)
}

const POLISH_ITERATIONS: usize = 8;
const IDENTIFIABLE_DECAY: f64 = 1e-12;

/// Levenberg-Marquardt fit of the three-parameter decay model. Returns
/// `None` when the iteration does not converge.
pub fn fit_exponential_model(p: &PeakSeries) -> Option<ExpFit> {
    let n = p.len();
    if n < 4 {
        return None;
    }
    let t0 = p.times[0];
    let tau: Vec<f64> = p.times.iter().map(|t| t - t0).collect();
    let y = &p.values;
    let last = y[n - 1];

    let ratio = (y[0] - last) / (y[1] - last);
    let rate0 = if ratio.is_finite() && ratio > 1.0 && tau[1] > 0.0 {
        ratio.ln() / tau[1]
    } else {
        3.0 / tau[n - 1].max(f64::MIN_POSITIVE)
    };
    let mut params = Vector3::new(y[0] - last, rate0, last);
    let (mut r, mut cost) = residuals(&tau, y, &params);
    let scale = y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut damping = 1e-3;

    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        if cost <= 1e-28 * scale {
            converged = true;
            break;
        }
        let (jtj, jtr) = normal_equations(&tau, &r, &params);
        let mut improved = false;
        while damping < 1e20 {
            let mut lhs = jtj;
            for d in 0..3 {
                lhs[(d, d)] += damping * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = lhs.lu().solve(&(-jtr)) else {
                damping *= 4.0;
                continue;
            };
            let candidate = params + step;
            let (cr, ccost) = residuals(&tau, y, &candidate);
            if ccost.is_finite() && ccost < cost {
                converged = small_step(&step, &candidate);
                params = candidate;
                r = cr;
                cost = ccost;
                damping = (damping / 3.0).max(1e-15);
                improved = true;
                break;
            }
            damping *= 4.0;
        }
        // without a descent direction the point is stationary to working
        // precision
        if converged || !improved {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }
    let (params, cost) = polish(&tau, y, params, cost);
    Some(ExpFit {
        amplitude: params[0],
        rate: params[1],
        offset: params[2],
        cost,
    })
}

/// Decay constant `λ` of `i_max·e^{-λt} + i_steady` fitted to the peaks.
/// Flat, non-decaying or non-convergent series map to 0.
pub fn fit_exponential(p: &PeakSeries) -> f64 {
    if p.len() < 4 {
        return 0.0;
    }
    let (lo, hi) = p
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let magnitude = p
        .values
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1.0);
    if hi - lo <= 1e-12 * magnitude {
        return 0.0;
    }
    // beyond this rate the decay has vanished below 1e-12 at the second
    // peak and the peaks no longer determine λ
    let limit = -IDENTIFIABLE_DECAY.ln() / (p.times[1] - p.times[0]);
    match fit_exponential_model(p) {
        Some(fit) if fit.rate.is_finite() && fit.rate > 0.0 => fit.rate.min(limit),
        _ => 0.0,
    }
}

/// Ordinary least-squares slope of values over times.
pub fn fit_linear(p: &PeakSeries) -> f64 {
    let n = p.len() as f64;
    if p.len() < 2 {
        return 0.0;
    }
    let mean_t = p.times.iter().sum::<f64>() / n;
    let mean_v = p.values.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, v) in p.times.iter().zip(&p.values) {
        sxy += (t - mean_t) * (v - mean_v);
        sxx += (t - mean_t) * (t - mean_t);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
