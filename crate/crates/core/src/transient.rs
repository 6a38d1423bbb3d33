//! Turn-on detection and event preprocessing.
//!
//! Preprocessing follows a fixed chain: the current is divided by its
//! steady-state peak, the polarity is canonicalized so the first inrush
//! peak is positive, the record is cut into periods at positive-going zero
//! crossings, the first period is dropped, and the next five are resampled
//! to a fixed grid together with the instantaneous power `i·u`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{
    crossings_from, read_waveform_file, resample_samples, slice_periods, write_waveform,
    IngestConfig, Waveform, CROSSING_HYSTERESIS,
};

/// Periods kept per event (the second to sixth after switch-on).
pub const RETAINED_PERIODS: usize = 5;
/// Resampled points per period.
pub const POINTS_PER_PERIOD: usize = 200;
/// Minimum spacing between accepted events, in mains periods.
pub const EVENT_SEPARATION_PERIODS: usize = 7;
/// Periods stored after the event time in event-store files.
const STORED_PERIODS_AFTER: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechType {
    Pump,
    Compressor,
    Fan,
    Other,
}

impl MechType {
    pub const ALL: [MechType; 4] = [
        MechType::Pump,
        MechType::Compressor,
        MechType::Fan,
        MechType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MechType::Pump => "pump",
            MechType::Compressor => "compressor",
            MechType::Fan => "fan",
            MechType::Other => "other",
        }
    }
}

impl fmt::Display for MechType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pump" => Ok(MechType::Pump),
            "compressor" => Ok(MechType::Compressor),
            "fan" => Ok(MechType::Fan),
            "other" => Ok(MechType::Other),
            other => Err(Error::Config(format!("unknown mechanical type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Turn-on threshold as a fraction of the steady amplitude.
    pub on_threshold: f64,
    /// Samples below threshold required before a turn-on.
    pub quiet_samples: usize,
    /// Complete periods averaged for the steady-state reference.
    pub steady_tail_periods: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            on_threshold: 0.1,
            quiet_samples: 2000,
            steady_tail_periods: 25,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.on_threshold > 0.0 && self.on_threshold < 1.0) {
            return Err(Error::Config(format!(
                "detect.on_threshold must lie in (0, 1), got {}",
                self.on_threshold
            )));
        }
        if self.quiet_samples < 1 {
            return Err(Error::Config(
                "detect.quiet_samples must be at least 1".into(),
            ));
        }
        if self.steady_tail_periods < 5 {
            return Err(Error::Config(format!(
                "detect.steady_tail_periods must be at least 5, got {}",
                self.steady_tail_periods
            )));
        }
        Ok(())
    }
}

/// A preprocessed turn-on: five current periods and five power periods on a
/// 200-point grid, plus the period boundaries in seconds after `event_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnOnEvent {
    pub periods: Vec<Vec<f64>>,
    pub power_periods: Vec<Vec<f64>>,
    /// Six boundaries delimiting the five retained periods, relative to
    /// `event_time`.
    pub period_bounds: Vec<f64>,
    pub event_time: f64,
    pub motor_id: String,
    pub mech_type: MechType,
    pub polarity_flipped: bool,
    pub scale_factor: f64,
    /// Retained periods whose length deviates from nominal by more than 20 %.
    pub irregular_periods: usize,
}

impl TurnOnEvent {
    /// Builds an event directly from resampled periods. Used for synthetic
    /// and test inputs that bypass detection.
    pub fn from_periods(
        periods: Vec<Vec<f64>>,
        power_periods: Vec<Vec<f64>>,
        period_bounds: Vec<f64>,
    ) -> Self {
        assert_eq!(periods.len(), RETAINED_PERIODS);
        assert_eq!(power_periods.len(), RETAINED_PERIODS);
        assert_eq!(period_bounds.len(), RETAINED_PERIODS + 1);
        TurnOnEvent {
            periods,
            power_periods,
            period_bounds,
            event_time: 0.0,
            motor_id: String::new(),
            mech_type: MechType::Other,
            polarity_flipped: false,
            scale_factor: 1.0,
            irregular_periods: 0,
        }
    }

    pub fn with_labels(mut self, motor_id: impl Into<String>, mech_type: MechType) -> Self {
        self.motor_id = motor_id.into();
        self.mech_type = mech_type;
        self
    }

    /// Start and duration of retained period `k` (0-based), seconds.
    pub fn period_span(&self, k: usize) -> (f64, f64) {
        let start = self.period_bounds[k];
        (start, self.period_bounds[k + 1] - start)
    }
}

/// Per-period maxima of `|x|` over windows of one nominal period.
fn window_maxima(x: &[f64], window: usize) -> Vec<f64> {
    x.chunks(window)
        .map(|c| c.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
        .collect()
}

/// Reference amplitude for the relative threshold: median of the window
/// maxima of periods that carry current at all.
fn reference_amplitude(w: &Waveform) -> f64 {
    let window = w.samples_per_period().round().max(1.0) as usize;
    let maxima = window_maxima(&w.current, window);
    let top = maxima.iter().cloned().fold(0.0_f64, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    let mut active: Vec<f64> = maxima.into_iter().filter(|&m| m >= 0.05 * top).collect();
    active.sort_by(|a, b| a.total_cmp(b));
    active[active.len() / 2]
}

/// Start times of turn-on events in `w`.
///
/// A turn-on is the first sample whose rectified current reaches
/// `on_threshold` times the reference amplitude after at least
/// `quiet_samples` samples below it. The candidate is confirmed only if at
/// least a tenth of the following period is also above threshold, which
/// rejects isolated noise spikes. Events closer than seven periods to the
/// previous one are skipped.
pub fn detect_turn_on(w: &Waveform, cfg: &DetectionConfig) -> Vec<f64> {
    let spp = w.samples_per_period().round() as usize;
    let n = w.len();
    if n <= cfg.quiet_samples + 6 * spp {
        return Vec::new();
    }
    let reference = reference_amplitude(w);
    if reference == 0.0 {
        return Vec::new();
    }
    let threshold = cfg.on_threshold * reference;
    let i = &w.current;

    let mut events = Vec::new();
    let mut quiet = 0usize;
    let mut k = 0usize;
    while k < n {
        if i[k].abs() < threshold {
            quiet += 1;
            k += 1;
            continue;
        }
        let end = (k + spp).min(n);
        let above = i[k..end].iter().filter(|v| v.abs() >= threshold).count();
        let sustained = end - k >= spp / 2 && above * 10 >= end - k;
        if sustained && quiet >= cfg.quiet_samples {
            events.push(k as f64 / w.sample_rate);
            k += EVENT_SEPARATION_PERIODS * spp;
            quiet = 0;
            continue;
        }
        // an isolated spike neither starts an event nor ends the quiet run
        if sustained {
            quiet = 0;
        }
        k += 1;
    }
    events
}

/// `1 / mean(max|i|)` over the last `steady_tail_periods` complete periods
/// of the record.
pub fn steady_scale_factor(w: &Waveform, event_time: f64, cfg: &DetectionConfig) -> Result<f64> {
    steady_scale_factor_until(w, event_time, None, cfg)
}

/// Like [`steady_scale_factor`], but the steady window ends at `window_end`
/// (typically the next event) instead of the end of the record.
pub fn steady_scale_factor_until(
    w: &Waveform,
    event_time: f64,
    window_end: Option<f64>,
    cfg: &DetectionConfig,
) -> Result<f64> {
    let end = window_end.map_or(w.len(), |t| w.index_at(t));
    let start = w.index_at(event_time + EVENT_SEPARATION_PERIODS as f64 * w.period());
    if start + 2 >= end {
        return Err(Error::SteadyStateTooShort(format!(
            "no samples after the transient window (event at {event_time:.4} s)"
        )));
    }
    let sign = if inverted_polarity(w, w.index_at(event_time))? {
        -1.0
    } else {
        1.0
    };
    let x: Vec<f64> = w.current[..end].iter().map(|v| sign * v).collect();
    let crossings = crossings_from(&x, w.sample_rate, start, CROSSING_HYSTERESIS);
    let slices = slice_periods(w, &crossings);
    if slices.len() < cfg.steady_tail_periods {
        return Err(Error::SteadyStateTooShort(format!(
            "{} complete periods after the transient, {} required",
            slices.len(),
            cfg.steady_tail_periods
        )));
    }
    let tail = &slices[slices.len() - cfg.steady_tail_periods..];
    let mean = tail
        .iter()
        .map(|s| {
            x[s.start_index..s.end_index.min(end)]
                .iter()
                .fold(0.0_f64, |m, v| m.max(v.abs()))
        })
        .sum::<f64>()
        / tail.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::SteadyStateTooShort(
            "steady amplitude is zero".into(),
        ));
    }
    Ok(1.0 / mean)
}

/// Whether the first inrush peak after sample `start` is negative.
fn inverted_polarity(w: &Waveform, start: usize) -> Result<bool> {
    let spp = w.samples_per_period().round() as usize;
    let first_end = (start + spp).min(w.len());
    let mut peak_idx = start;
    for k in start..first_end {
        if w.current[k].abs() > w.current[peak_idx].abs() {
            peak_idx = k;
        }
    }
    if w.current[peak_idx] == 0.0 {
        return Err(Error::EventTruncated(format!(
            "no current in the first period after {:.4} s",
            start as f64 / w.sample_rate
        )));
    }
    Ok(w.current[peak_idx] < 0.0)
}

/// Full preprocessing of the event starting at `event_time`, normalizing
/// against the end of the record.
pub fn preprocess_event(
    w: &Waveform,
    event_time: f64,
    cfg: &DetectionConfig,
) -> Result<TurnOnEvent> {
    let scale = steady_scale_factor(w, event_time, cfg)?;
    preprocess_with_scale(w, event_time, scale)
}

/// Preprocessing with a known normalization factor (e.g. from an event
/// store header).
pub fn preprocess_with_scale(
    w: &Waveform,
    event_time: f64,
    scale_factor: f64,
) -> Result<TurnOnEvent> {
    if !(scale_factor > 0.0) || !scale_factor.is_finite() {
        return Err(Error::Config(format!(
            "scale factor must be positive, got {scale_factor}"
        )));
    }
    let start = w.index_at(event_time);
    if start >= w.len() {
        return Err(Error::EventTruncated(format!(
            "event at {event_time} s lies past the record"
        )));
    }

    let flipped = inverted_polarity(w, start)?;
    let gain = if flipped { -scale_factor } else { scale_factor };
    let sign = if flipped { -1.0 } else { 1.0 };

    let current: Vec<f64> = w.current.iter().map(|v| gain * v).collect();
    let voltage: Vec<f64> = w.voltage.iter().map(|v| sign * v).collect();

    let crossings = crossings_from(&current, w.sample_rate, start, CROSSING_HYSTERESIS);
    if crossings.len() < RETAINED_PERIODS + 2 {
        return Err(Error::EventTruncated(format!(
            "{} complete periods after {event_time:.4} s, 6 required",
            crossings.len().saturating_sub(1)
        )));
    }
    let slices = slice_periods(w, &crossings[..RETAINED_PERIODS + 2]);
    let retained = &slices[1..];

    let mut periods = Vec::with_capacity(RETAINED_PERIODS);
    let mut power_periods = Vec::with_capacity(RETAINED_PERIODS);
    for s in retained {
        let i = resample_samples(&current, w.sample_rate, s, POINTS_PER_PERIOD);
        let u = resample_samples(&voltage, w.sample_rate, s, POINTS_PER_PERIOD);
        power_periods.push(i.iter().zip(&u).map(|(a, b)| a * b).collect());
        periods.push(i);
    }
    let period_bounds = crossings[1..RETAINED_PERIODS + 2]
        .iter()
        .map(|c| c - event_time)
        .collect();
    Ok(TurnOnEvent {
        periods,
        power_periods,
        period_bounds,
        event_time,
        motor_id: String::new(),
        mech_type: MechType::Other,
        polarity_flipped: flipped,
        scale_factor,
        irregular_periods: retained.iter().filter(|s| s.irregular).count(),
    })
}

// ─── Event store ─────────────────────────────────────────────────────

/// One stored turn-on: a raw waveform window plus provenance headers.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub waveform: Waveform,
    /// Event time within `waveform`, seconds.
    pub event_time: f64,
    pub motor_id: String,
    pub mech_type: MechType,
    pub polarity_flipped: bool,
    pub scale_factor: f64,
}

impl EventRecord {
    /// Detects the normalization and polarity of the event at `event_time`
    /// and cuts the stored window: one period before the event to ten
    /// periods after it.
    pub fn capture(
        w: &Waveform,
        event_time: f64,
        window_end: Option<f64>,
        cfg: &DetectionConfig,
        motor_id: &str,
        mech_type: MechType,
    ) -> Result<(EventRecord, TurnOnEvent)> {
        let scale = steady_scale_factor_until(w, event_time, window_end, cfg)?;
        let event = preprocess_with_scale(w, event_time, scale)?.with_labels(motor_id, mech_type);
        let begin = w.index_at(event_time - w.period());
        let stop = w.index_at(event_time + STORED_PERIODS_AFTER * w.period()) + 1;
        let window = w.window(begin, stop)?;
        let record = EventRecord {
            event_time: event_time - begin as f64 / w.sample_rate,
            waveform: window,
            motor_id: motor_id.to_string(),
            mech_type,
            polarity_flipped: event.polarity_flipped,
            scale_factor: scale,
        };
        Ok((record, event))
    }

    pub fn preprocess(&self) -> Result<TurnOnEvent> {
        Ok(
            preprocess_with_scale(&self.waveform, self.event_time, self.scale_factor)?
                .with_labels(self.motor_id.clone(), self.mech_type),
        )
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.write_with(path, &[])
    }

    /// Writes the record with additional `# key=value` header lines.
    pub fn write_with(&self, path: &Path, extra: &[(&str, String)]) -> Result<()> {
        let mut headers = vec![
            ("motor_id", self.motor_id.clone()),
            ("mech_type", self.mech_type.to_string()),
            ("polarity_flipped", self.polarity_flipped.to_string()),
            ("scale_factor", self.scale_factor.to_string()),
            ("event_time", self.event_time.to_string()),
        ];
        headers.extend(extra.iter().cloned());
        write_waveform(path, &self.waveform, &headers)
    }

    pub fn read(path: &Path, cfg: &IngestConfig) -> Result<EventRecord> {
        let file = read_waveform_file(path, cfg)?;
        let header = |key: &str| {
            file.headers.get(key).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: format!("missing header `{key}`"),
            })
        };
        let bad = |key: &str| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("malformed header `{key}`"),
        };
        Ok(EventRecord {
            event_time: header("event_time")?
                .parse()
                .map_err(|_| bad("event_time"))?,
            motor_id: header("motor_id")?.clone(),
            mech_type: header("mech_type")?.parse().map_err(|_| bad("mech_type"))?,
            polarity_flipped: header("polarity_flipped")?
                .parse()
                .map_err(|_| bad("polarity_flipped"))?,
            scale_factor: header("scale_factor")?
                .parse()
                .map_err(|_| bad("scale_factor"))?,
            waveform: file.waveform,
        })
    }
}

/// Detects every turn-on in a record and captures it. Each event's steady
/// window ends where the next event begins.
pub fn capture_events(
    w: &Waveform,
    cfg: &DetectionConfig,
    motor_id: &str,
    mech_type: MechType,
) -> Vec<Result<(EventRecord, TurnOnEvent)>> {
    let times = detect_turn_on(w, cfg);
    times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            EventRecord::capture(w, t, times.get(k + 1).copied(), cfg, motor_id, mech_type)
        })
        .collect()
}
