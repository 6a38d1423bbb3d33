//! Brute-force reference computations used to check the production
//! feature code. Slow by design.

use std::f64::consts::PI;

use crate::features::PeakSeries;

/// Magnitude of DFT bin `n` of `x` by direct correlation.
pub fn naive_dft(x: &[f64], n: usize) -> f64 {
    let len = x.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (m, v) in x.iter().enumerate() {
        let angle = 2.0 * PI * (n as f64) * (m as f64) / len;
        re += v * angle.cos();
        im -= v * angle.sin();
    }
    re.hypot(im)
}

/// Integral of `i·u` over the span of the samples, by a midpoint sum at ten
/// times the sample rate with linearly interpolated inputs.
pub fn oracle_energy(i: &[f64], u: &[f64], sample_rate: f64) -> f64 {
    assert_eq!(i.len(), u.len(), "current and voltage lengths differ");
    const OVERSAMPLE: usize = 10;
    let h = 1.0 / (sample_rate * OVERSAMPLE as f64);
    let mut sum = 0.0;
    for m in 0..i.len().saturating_sub(1) {
        for j in 0..OVERSAMPLE {
            let f = (j as f64 + 0.5) / OVERSAMPLE as f64;
            let a = i[m] + f * (i[m + 1] - i[m]);
            let b = u[m] + f * (u[m + 1] - u[m]);
            sum += a * b;
        }
    }
    sum * h
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleFit {
    pub rate: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub cost: f64,
}

pub const LAMBDA_GRID: (f64, f64, usize) = (0.01, 500.0, 10_000);

/// Grid search over the decay rate. At each rate the amplitude and offset
/// follow from ordinary least squares, so only `λ` is searched.
pub fn oracle_lambda(p: &PeakSeries) -> OracleFit {
    let (lo, hi, steps) = LAMBDA_GRID;
    let t0 = p.times[0];
    let tau: Vec<f64> = p.times.iter().map(|t| t - t0).collect();
    let n = tau.len() as f64;
    let sy: f64 = p.values.iter().sum();
    let mut best = OracleFit {
        rate: lo,
        amplitude: 0.0,
        offset: sy / n,
        cost: f64::INFINITY,
    };
    for k in 0..steps {
        let rate = lo * (hi / lo).powf(k as f64 / (steps - 1) as f64);
        let e: Vec<f64> = tau.iter().map(|t| (-rate * t).exp()).collect();
        let se: f64 = e.iter().sum();
        let see: f64 = e.iter().map(|v| v * v).sum();
        let sey: f64 = e.iter().zip(&p.values).map(|(a, b)| a * b).sum();
        let det = n * see - se * se;
        let (amplitude, offset) = if det.abs() > 1e-300 {
            ((n * sey - se * sy) / det, (see * sy - se * sey) / det)
        } else {
            (0.0, sy / n)
        };
        let cost: f64 = e
            .iter()
            .zip(&p.values)
            .map(|(v, y)| {
                let r = amplitude * v + offset - y;
                r * r
            })
            .sum();
        if cost < best.cost {
            best = OracleFit {
                rate,
                amplitude,
                offset,
                cost,
            };
        }
    }
    best
}
