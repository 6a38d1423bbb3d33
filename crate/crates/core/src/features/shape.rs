use serde::{Deserialize, Serialize};

use super::peaks::half_period_split;
use crate::transient::TurnOnEvent;

/// Thresholds for the extrema and inflection flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeConfig {
    /// Minimum reversal around an extremum, as a fraction of the period peak.
    pub extrema_prominence: f64,
    /// Moving-average width applied to the second difference.
    pub smoothing_width: usize,
    /// Inflections where `|i|` is below this fraction of the period peak are
    /// ignored (the sign change at every zero crossing).
    pub inflection_band: f64,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        ShapeConfig {
            extrema_prominence: 0.01,
            smoothing_width: 5,
            inflection_band: 0.1,
        }
    }
}

/// Interior extrema whose reversal on both sides is at least `delta`.
pub fn count_extrema(x: &[f64], delta: f64) -> usize {
    if x.len() < 3 || !(delta > 0.0) {
        return 0;
    }
    let origin = x[0];
    let mut dir = 0i8;
    let mut ext = origin;
    let mut count = 0;
    for &v in &x[1..] {
        match dir {
            0 => {
                if v - origin >= delta {
                    dir = 1;
                    ext = v;
                } else if origin - v >= delta {
                    dir = -1;
                    ext = v;
                }
            }
            1 => {
                if v > ext {
                    ext = v;
                } else if ext - v >= delta {
                    count += 1;
                    dir = -1;
                    ext = v;
                }
            }
            _ => {
                if v < ext {
                    ext = v;
                } else if v - ext >= delta {
                    count += 1;
                    dir = 1;
                    ext = v;
                }
            }
        }
    }
    count
}

/// Whether the smoothed second difference changes sign at a point where
/// `|x|` is at least `floor`.
pub fn has_inflection(x: &[f64], width: usize, floor: f64) -> bool {
    if x.len() < 3 {
        return false;
    }
    // d2[m] belongs to sample m + 1
    let d2: Vec<f64> = x.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
    let half = width / 2;
    let smoothed: Vec<f64> = (0..d2.len())
        .map(|m| {
            let lo = m.saturating_sub(half);
            let hi = (m + half + 1).min(d2.len());
            d2[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let mut last: Option<(usize, f64)> = None;
    for (m, &s) in smoothed.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        if let Some((pm, ps)) = last {
            if ps.signum() != s.signum() && x[pm + 1].abs() >= floor && x[m + 1].abs() >= floor {
                return true;
            }
        }
        last = Some((m, s));
    }
    false
}

/// Ten extrema flags followed by ten inflection flags, one per half-period.
pub fn shape_flags(e: &TurnOnEvent, cfg: &ShapeConfig) -> Vec<f64> {
    let mut extrema = Vec::with_capacity(2 * e.periods.len());
    let mut inflections = Vec::with_capacity(2 * e.periods.len());
    for period in &e.periods {
        let peak = period.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let split = half_period_split(period);
        for half in [&period[..split], &period[split..]] {
            if peak == 0.0 {
                extrema.push(0.0);
                inflections.push(0.0);
                continue;
            }
            let many = count_extrema(half, cfg.extrema_prominence * peak) > 1;
            extrema.push(if many { 1.0 } else { 0.0 });
            let bent = has_inflection(half, cfg.smoothing_width, cfg.inflection_band * peak);
            inflections.push(if bent { 1.0 } else { 0.0 });
        }
    }
    extrema.extend(inflections);
    extrema
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::test_support::{event_from_fn, sine};

    #[test]
    fn pure_sine_sets_no_flags() {
        let e = event_from_fn(|_, ph| sine(ph), |_, _| 0.0);
        let flags = shape_flags(&e, &ShapeConfig::default());
        assert_eq!(flags.len(), 20);
        assert!(flags.iter().all(|f| *f == 0.0), "{flags:?}");
    }

    #[test]
    fn fifth_harmonic_adds_extrema() {
        // dense evaluation of sin(x) + 0.3 sin(5x) over (0, π): the
        // derivative cos x + 1.5 cos 5x changes sign more than once
        let dense: Vec<f64> = (1..100_000)
            .map(|k| {
                let x = std::f64::consts::PI * k as f64 / 100_000.0;
                x.cos() + 1.5 * (5.0 * x).cos()
            })
            .collect();
        let sign_changes = dense
            .windows(2)
            .filter(|w| w[0].signum() != w[1].signum())
            .count();
        assert!(sign_changes > 1);

        let e = event_from_fn(|_, ph| sine(ph) + 0.3 * sine(5.0 * ph), |_, _| 0.0);
        let flags = shape_flags(&e, &ShapeConfig::default());
        assert!(flags[..10].contains(&1.0));
        assert!(flags.iter().all(|f| *f == 0.0 || *f == 1.0));
    }

    #[test]
    fn flat_zero_sets_no_flags() {
        let e = event_from_fn(|_, _| 0.0, |_, _| 0.0);
        assert!(shape_flags(&e, &ShapeConfig::default())
            .iter()
            .all(|f| *f == 0.0));
        assert_eq!(count_extrema(&[0.0; 50], 0.0), 0);
    }

    #[test]
    fn counts_prominent_extrema_only() {
        let x = [0.0, 1.0, 0.995, 1.0, 0.0];
        assert_eq!(count_extrema(&x, 0.01), 1);
        assert_eq!(count_extrema(&x, 0.001), 3);
    }
}
