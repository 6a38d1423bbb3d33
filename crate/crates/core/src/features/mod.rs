//! The per-event feature catalog.
//!
//! Every event yields 173 values in a fixed order:
//!
//! | category              | count | names                                  |
//! |-----------------------|-------|----------------------------------------|
//! | exponential decay     | 4     | `lambda_{max,min,abs,power}`           |
//! | linear slope          | 4     | `slope_{max,min,abs,power}`            |
//! | peak values           | 20    | `peak_{max,min}[_rel]_pK`              |
//! | energy                | 10    | `energy[_rel]_pK`                      |
//! | energy sum            | 10    | `energy_sum[_rel]_pK`                  |
//! | harmonic magnitudes   | 100   | `hNN_pK`                               |
//! | harmonic distortion   | 5     | `thd_pK`                               |
//! | extra local extrema   | 10    | `extrema_pK{a,b}`                      |
//! | extra inflections     | 10    | `inflection_pK{a,b}`                   |
//!
//! `K` runs 2..=6: the first period after switch-on is discarded, so the
//! retained periods keep their original numbering. `a`/`b` are the positive
//! and negative half of a period.

mod energy;
mod fit;
mod harmonics;
mod peaks;
mod shape;
pub mod table;

use once_cell::sync::Lazy;

pub use energy::{energy_features, period_energies, period_energy};
pub use fit::{fit_exponential, fit_exponential_model, fit_linear, ExpFit};
pub use harmonics::{harmonic_features, harmonic_magnitudes};
pub use peaks::{extract_peaks, half_period_split, PeakSeries, PeakVariant};
pub use shape::{count_extrema, has_inflection, shape_flags, ShapeConfig};

use crate::signal::MAX_HARMONIC;
use crate::transient::{TurnOnEvent, RETAINED_PERIODS};

pub const FEATURE_COUNT: usize = 173;

/// Name index of the first retained period; the omitted first period is 1.
const FIRST_PERIOD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureCategory {
    ExponentialDecay,
    LinearSlope,
    Peak,
    Energy,
    EnergySum,
    Harmonic,
    Distortion,
    Extrema,
    Inflection,
}

impl FeatureCategory {
    /// Catalog order with per-category counts.
    pub const LAYOUT: [(FeatureCategory, usize); 9] = [
        (FeatureCategory::ExponentialDecay, 4),
        (FeatureCategory::LinearSlope, 4),
        (FeatureCategory::Peak, 20),
        (FeatureCategory::Energy, 10),
        (FeatureCategory::EnergySum, 10),
        (FeatureCategory::Harmonic, 100),
        (FeatureCategory::Distortion, 5),
        (FeatureCategory::Extrema, 10),
        (FeatureCategory::Inflection, 10),
    ];
}

static NAMES: Lazy<Vec<String>> = Lazy::new(build_names);
static CATEGORIES: Lazy<Vec<FeatureCategory>> = Lazy::new(|| {
    FeatureCategory::LAYOUT
        .iter()
        .flat_map(|&(c, n)| std::iter::repeat_n(c, n))
        .collect()
});

fn build_names() -> Vec<String> {
    let periods: Vec<usize> = (FIRST_PERIOD..FIRST_PERIOD + RETAINED_PERIODS).collect();
    let mut names = Vec::with_capacity(FEATURE_COUNT);
    for prefix in ["lambda", "slope"] {
        for v in PeakVariant::ALL {
            names.push(format!("{prefix}_{}", v.name()));
        }
    }
    for stem in ["peak_max", "peak_min", "peak_max_rel", "peak_min_rel"] {
        names.extend(periods.iter().map(|p| format!("{stem}_p{p}")));
    }
    for stem in ["energy", "energy_rel", "energy_sum", "energy_sum_rel"] {
        names.extend(periods.iter().map(|p| format!("{stem}_p{p}")));
    }
    for p in &periods {
        names.extend((1..=MAX_HARMONIC).map(|n| format!("h{n:02}_p{p}")));
    }
    names.extend(periods.iter().map(|p| format!("thd_p{p}")));
    for stem in ["extrema", "inflection"] {
        for p in &periods {
            names.push(format!("{stem}_p{p}a"));
            names.push(format!("{stem}_p{p}b"));
        }
    }
    names
}

/// Canonical feature names in catalog order.
pub fn feature_names() -> &'static [String] {
    &NAMES
}

pub fn feature_categories() -> &'static [FeatureCategory] {
    &CATEGORIES
}

pub fn feature_index(name: &str) -> Option<usize> {
    NAMES.iter().position(|n| n == name)
}

/// Degenerate divisors met during extraction. The affected relative
/// features are 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractionFlags {
    pub peak_divisor_zero: bool,
    pub energy_divisor_zero: bool,
    pub fundamental_zero: bool,
}

impl ExtractionFlags {
    pub fn any(&self) -> bool {
        self.peak_divisor_zero || self.energy_divisor_zero || self.fundamental_zero
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub names: &'static [String],
    pub flags: ExtractionFlags,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }
}

/// Absolute maxima and minima of each period, then both divided by the
/// maximum of the second retained period. The flag reports a zero divisor.
pub fn peak_features(e: &TurnOnEvent) -> (Vec<f64>, bool) {
    let max = extract_peaks(e, PeakVariant::Max).values;
    let min = extract_peaks(e, PeakVariant::Min).values;
    let divisor = max[1];
    let degenerate = divisor == 0.0;
    let mut out = Vec::with_capacity(4 * RETAINED_PERIODS);
    out.extend_from_slice(&max);
    out.extend_from_slice(&min);
    for v in max.iter().chain(&min) {
        out.push(if degenerate { 0.0 } else { v / divisor });
    }
    (out, degenerate)
}

pub fn extract_all(e: &TurnOnEvent) -> FeatureVector {
    extract_all_with(e, &ShapeConfig::default())
}

pub fn extract_all_with(e: &TurnOnEvent, shape: &ShapeConfig) -> FeatureVector {
    let series: Vec<PeakSeries> = PeakVariant::ALL
        .iter()
        .map(|&v| extract_peaks(e, v))
        .collect();
    let mut values = Vec::with_capacity(FEATURE_COUNT);
    values.extend(series.iter().map(fit_exponential));
    values.extend(series.iter().map(fit_linear));
    let (peaks, peak_divisor_zero) = peak_features(e);
    values.extend(peaks);
    let (energy, energy_divisor_zero) = energy_features(e);
    values.extend(energy);
    let (harmonics, thd, fundamental_zero) = harmonic_features(e);
    values.extend(harmonics);
    values.extend(thd);
    values.extend(shape_flags(e, shape));
    debug_assert_eq!(values.len(), FEATURE_COUNT);
    FeatureVector {
        values,
        names: feature_names(),
        flags: ExtractionFlags {
            peak_divisor_zero,
            energy_divisor_zero,
            fundamental_zero,
        },
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use std::f64::consts::PI;

    use crate::transient::{TurnOnEvent, POINTS_PER_PERIOD, RETAINED_PERIODS};

    pub fn sine(phase: f64) -> f64 {
        (2.0 * PI * phase).sin()
    }

    /// Event whose retained periods span 0.02-0.12 s at exactly 50 Hz.
    /// Closures receive (time after event, phase within period).
    pub fn event_from_fn(
        current: impl Fn(f64, f64) -> f64,
        voltage: impl Fn(f64, f64) -> f64,
    ) -> TurnOnEvent {
        let bounds: Vec<f64> = (0..=RETAINED_PERIODS)
            .map(|k| 0.02 * (k + 1) as f64)
            .collect();
        let mut periods = Vec::new();
        let mut power = Vec::new();
        for k in 0..RETAINED_PERIODS {
            let (mut i, mut p) = (Vec::new(), Vec::new());
            for m in 0..POINTS_PER_PERIOD {
                let ph = m as f64 / POINTS_PER_PERIOD as f64;
                let t = bounds[k] + ph * 0.02;
                let (a, u) = (current(t, ph), voltage(t, ph));
                i.push(a);
                p.push(a * u);
            }
            periods.push(i);
            power.push(p);
        }
        TurnOnEvent::from_periods(periods, power, bounds)
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::{event_from_fn, sine};
    use super::*;

    #[test]
    fn catalog_layout() {
        assert_eq!(feature_names().len(), FEATURE_COUNT);
        let total: usize = FeatureCategory::LAYOUT.iter().map(|(_, n)| n).sum();
        assert_eq!(total, FEATURE_COUNT);
        let unique: std::collections::HashSet<_> = feature_names().iter().collect();
        assert_eq!(unique.len(), FEATURE_COUNT);
        assert_eq!(feature_names()[0], "lambda_max");
        assert_eq!(feature_index("h03_p5"), Some(48 + 3 * 20 + 2));
        assert_eq!(feature_names()[172], "inflection_p6b");
    }

    #[test]
    fn relative_peaks_divide_by_second_period_max() {
        let maxima = [3.0, 2.0, 1.5, 1.2, 1.0];
        let e = event_from_fn(
            |t, ph| {
                let k = ((t - 0.02) / 0.02).floor().clamp(0.0, 4.0) as usize;
                maxima[k] * sine(ph)
            },
            |_, _| 0.0,
        );
        let (f, degenerate) = peak_features(&e);
        assert!(!degenerate);
        let want = [1.5, 1.0, 0.75, 0.6, 0.5];
        for k in 0..5 {
            assert!((f[10 + k] - want[k]).abs() < 1e-12);
        }
        assert_eq!(f[11], 1.0);
    }

    #[test]
    fn pure_sine_event() {
        let e = event_from_fn(|_, ph| sine(ph), |_, ph| 325.0 * sine(ph));
        let fv = extract_all(&e);
        assert_eq!(fv.values.len(), FEATURE_COUNT);
        assert!(!fv.flags.any());
        let v = &fv.values;
        let (abs, rel) = (&v[8..18], &v[18..28]);
        let want = [1.0, 1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0, -1.0];
        for k in 0..10 {
            assert!((abs[k] - want[k]).abs() < 1e-12);
            assert!((rel[k] - want[k]).abs() < 1e-12);
        }
        for name in ["lambda_max", "lambda_min", "lambda_abs", "lambda_power"] {
            assert_eq!(fv.get(name), Some(0.0), "{name}");
        }
        for name in ["slope_max", "slope_min", "slope_abs", "slope_power"] {
            assert!(fv.get(name).unwrap().abs() < 1e-9, "{name}");
        }
        assert!(v[148..153].iter().all(|t| t.abs() < 1e-9));
        assert!(v[153..].iter().all(|f| *f == 0.0));
    }

    #[test]
    fn extraction_is_deterministic() {
        let e = event_from_fn(
            |t, ph| (1.0 + 3.0 * (-20.0 * t).exp()) * (sine(ph) + 0.05 * sine(2.0 * ph + 0.3)),
            |_, ph| 325.0 * sine(ph + 0.1),
        );
        let a = extract_all(&e);
        let b = extract_all(&e);
        assert_eq!(
            a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
