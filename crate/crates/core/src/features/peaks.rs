use crate::transient::{TurnOnEvent, POINTS_PER_PERIOD};

/// Which extremum sequence to take from an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakVariant {
    /// Current maximum of each period (5 points).
    Max,
    /// Current minimum of each period (5 points).
    Min,
    /// Maximum of `|i|` in each half-period (10 points).
    Abs,
    /// Maximum of the instantaneous power in each half-period (10 points).
    Power,
}

impl PeakVariant {
    pub const ALL: [PeakVariant; 4] = [
        PeakVariant::Max,
        PeakVariant::Min,
        PeakVariant::Abs,
        PeakVariant::Power,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PeakVariant::Max => "max",
            PeakVariant::Min => "min",
            PeakVariant::Abs => "abs",
            PeakVariant::Power => "power",
        }
    }
}

/// Extremum values and their times, seconds after the event.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl PeakSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(times.len(), values.len());
        PeakSeries { times, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Index splitting a period (which starts at a positive-going crossing) into
/// its positive and negative half. Located at the last sign change before
/// the signal first drops below `-5 %` of its peak; falls back to the
/// midpoint for waveforms with no clear negative lobe.
pub fn half_period_split(x: &[f64]) -> usize {
    let mid = x.len() / 2;
    let peak = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return mid;
    }
    let band = 0.05 * peak;
    let Some(rise) = x.iter().position(|&v| v > band) else {
        return mid;
    };
    let Some(fall) = x[rise..].iter().position(|&v| v < -band).map(|p| p + rise) else {
        return mid;
    };
    (rise + 1..=fall)
        .rev()
        .find(|&m| x[m - 1] > 0.0 && x[m] <= 0.0)
        .unwrap_or(mid)
}

fn argmax_by(x: &[f64], key: impl Fn(f64) -> f64) -> usize {
    let mut best = 0;
    for (m, &v) in x.iter().enumerate() {
        if key(v) > key(x[best]) {
            best = m;
        }
    }
    best
}

pub fn extract_peaks(e: &TurnOnEvent, variant: PeakVariant) -> PeakSeries {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (k, period) in e.periods.iter().enumerate() {
        let (start, duration) = e.period_span(k);
        let at = |m: usize| start + m as f64 * duration / POINTS_PER_PERIOD as f64;
        match variant {
            PeakVariant::Max => {
                let m = argmax_by(period, |v| v);
                times.push(at(m));
                values.push(period[m]);
            }
            PeakVariant::Min => {
                let m = argmax_by(period, |v| -v);
                times.push(at(m));
                values.push(period[m]);
            }
            PeakVariant::Abs | PeakVariant::Power => {
                let split = half_period_split(period);
                let source = if variant == PeakVariant::Abs {
                    period
                } else {
                    &e.power_periods[k]
                };
                for (lo, hi) in [(0, split), (split, source.len())] {
                    let m = if variant == PeakVariant::Abs {
                        lo + argmax_by(&source[lo..hi], f64::abs)
                    } else {
                        lo + argmax_by(&source[lo..hi], |v| v)
                    };
                    times.push(at(m));
                    values.push(if variant == PeakVariant::Abs {
                        source[m].abs()
                    } else {
                        source[m]
                    });
                }
            }
        }
    }
    PeakSeries { times, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::test_support::{event_from_fn, sine};

    #[test]
    fn sine_extrema() {
        let e = event_from_fn(|_, phase| sine(phase), |_, _| 0.0);
        let max = extract_peaks(&e, PeakVariant::Max);
        let min = extract_peaks(&e, PeakVariant::Min);
        let abs = extract_peaks(&e, PeakVariant::Abs);
        assert_eq!(max.len(), 5);
        assert_eq!(abs.len(), 10);
        for v in &max.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
        for v in &min.values {
            assert!((v + 1.0).abs() < 1e-12);
        }
        for v in &abs.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
        for s in [&max, &min, &abs] {
            assert!(s.times.windows(2).all(|w| w[1] > w[0]));
        }
        // peak of a sine sits a quarter period in
        assert!((max.times[0] - (0.02 + 0.005)).abs() < 1e-12);
    }

    #[test]
    fn split_of_sine_is_midpoint() {
        let x: Vec<f64> = (0..200).map(|m| sine(m as f64 / 200.0)).collect();
        // sin(π) rounds to +1.2e-16, so the sign change lands one sample late
        assert_eq!(half_period_split(&x), 101);
        let mut y = x.clone();
        y[100] = 0.0;
        assert_eq!(half_period_split(&y), 100);
        assert_eq!(half_period_split(&[0.0; 200]), 100);
    }

    #[test]
    fn decaying_envelope_peaks_follow_envelope() {
        // |i| = (3 e^{-8t} + 1) |sin|, times relative to the event
        let env = |t: f64| 3.0 * (-8.0 * t).exp() + 1.0;
        let e = event_from_fn(|t, phase| env(t) * sine(phase), |_, _| 0.0);
        let abs = extract_peaks(&e, PeakVariant::Abs);
        for (t, v) in abs.times.iter().zip(&abs.values) {
            assert!((v / env(*t) - 1.0).abs() < 0.02, "{t} {v}");
        }
    }
}
