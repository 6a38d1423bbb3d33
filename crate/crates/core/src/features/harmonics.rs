use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::signal::MAX_HARMONIC;
use crate::transient::TurnOnEvent;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// DFT magnitudes of bins `0..=20` of one period. With the period resampled
/// onto a fixed grid, bin `n` is the `n`-th harmonic of the mains frequency.
pub fn harmonic_magnitudes(period: &[f64]) -> Vec<f64> {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(period.len()));
    let mut buf: Vec<Complex<f64>> = period.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    buf.iter()
        .take(MAX_HARMONIC + 1)
        .map(|c| c.norm())
        .collect()
}

/// Harmonics 1..=20 of each period relative to the fundamental, followed by
/// the per-period distortion `(|I₂| + … + |I₂₀|) / |I₁|`.
///
/// Returns 100 relative magnitudes (period-major), 5 distortion values, and
/// whether any period had a zero fundamental (its 21 values are then 0).
pub fn harmonic_features(e: &TurnOnEvent) -> (Vec<f64>, Vec<f64>, bool) {
    let mut relative = Vec::with_capacity(e.periods.len() * MAX_HARMONIC);
    let mut thd = Vec::with_capacity(e.periods.len());
    let mut degenerate = false;
    for period in &e.periods {
        let mags = harmonic_magnitudes(period);
        let fundamental = mags[1];
        if fundamental == 0.0 {
            degenerate = true;
            relative.extend(std::iter::repeat_n(0.0, MAX_HARMONIC));
            thd.push(0.0);
            continue;
        }
        relative.push(1.0);
        relative.extend(mags[2..].iter().map(|m| m / fundamental));
        thd.push(mags[2..].iter().sum::<f64>() / fundamental);
    }
    (relative, thd, degenerate)
}
