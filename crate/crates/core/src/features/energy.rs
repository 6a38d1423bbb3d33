use crate::transient::{TurnOnEvent, RETAINED_PERIODS};

/// Trapezoidal integral of one resampled power period. `closing` is the
/// power at the period's end crossing, i.e. the first point of the next
/// period.
pub fn period_energy(power: &[f64], closing: f64, duration: f64) -> f64 {
    let n = power.len();
    let dt = duration / n as f64;
    let inner: f64 = power[1..].iter().sum();
    dt * (0.5 * power[0] + inner + 0.5 * closing)
}

/// Energy of each retained period, in joules (normalized ampere · volt · s).
pub fn period_energies(e: &TurnOnEvent) -> Vec<f64> {
    (0..RETAINED_PERIODS)
        .map(|k| {
            let power = &e.power_periods[k];
            // the final period closes on its own start value; both sit on a
            // current zero crossing
            let closing = e.power_periods.get(k + 1).map_or(power[0], |next| next[0]);
            period_energy(power, closing, e.period_span(k).1)
        })
        .collect()
}

/// Per-period energies, their relatives to the last period, the cumulative
/// sums from the first retained period, and those sums relative to the last
/// period's energy. The boolean is set when that divisor is zero.
pub fn energy_features(e: &TurnOnEvent) -> (Vec<f64>, bool) {
    let energies = period_energies(e);
    let cumulative: Vec<f64> = energies
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let divisor = energies[RETAINED_PERIODS - 1];
    let degenerate = divisor == 0.0;
    let rel = |v: &f64| if degenerate { 0.0 } else { v / divisor };

    let mut out = Vec::with_capacity(4 * RETAINED_PERIODS);
    out.extend_from_slice(&energies);
    out.extend(energies.iter().map(rel));
    out.extend_from_slice(&cumulative);
    out.extend(cumulative.iter().map(rel));
    (out, degenerate)
}
