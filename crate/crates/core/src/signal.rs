//! Sampled current/voltage records and mains-period geometry.
//!
//! A [`Waveform`] holds one current and one voltage channel sampled at a
//! uniform rate. Periods are delimited by positive-going zero crossings of
//! the current, located to sub-sample precision by linear interpolation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Highest harmonic the feature catalog resolves; the sample rate must
/// leave it below Nyquist.
pub const MAX_HARMONIC: usize = 20;

pub const DEFAULT_SAMPLE_RATE: f64 = 10_000.0;
pub const DEFAULT_MAINS_FREQ: f64 = 50.0;

/// Fraction of a nominal period a slice may deviate before it is flagged.
pub const IRREGULAR_TOLERANCE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub current: Vec<f64>,
    pub voltage: Vec<f64>,
    pub sample_rate: f64,
    pub mains_freq: f64,
    /// Set when the source had no voltage column and zeros were substituted.
    pub voltage_missing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Current,
    Voltage,
}

impl Waveform {
    pub fn new(
        current: Vec<f64>,
        voltage: Vec<f64>,
        sample_rate: f64,
        mains_freq: f64,
    ) -> Result<Self> {
        if current.len() != voltage.len() {
            return Err(Error::InvalidWaveform(format!(
                "channel lengths differ ({} current, {} voltage)",
                current.len(),
                voltage.len()
            )));
        }
        if current.len() < 2 {
            return Err(Error::InvalidWaveform("fewer than 2 samples".into()));
        }
        if !(mains_freq > 0.0) || !mains_freq.is_finite() {
            return Err(Error::InvalidWaveform(format!(
                "mains frequency {mains_freq} must be positive"
            )));
        }
        if !(sample_rate > 2.0 * MAX_HARMONIC as f64 * mains_freq) || !sample_rate.is_finite() {
            return Err(Error::InvalidWaveform(format!(
                "sample rate {sample_rate} Hz does not resolve harmonic {MAX_HARMONIC} of {mains_freq} Hz"
            )));
        }
        Ok(Waveform {
            current,
            voltage,
            sample_rate,
            mains_freq,
            voltage_missing: false,
        })
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    pub fn channel(&self, channel: Channel) -> &[f64] {
        match channel {
            Channel::Current => &self.current,
            Channel::Voltage => &self.voltage,
        }
    }

    pub fn period(&self) -> f64 {
        1.0 / self.mains_freq
    }

    pub fn samples_per_period(&self) -> f64 {
        self.sample_rate / self.mains_freq
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    /// Index of the first sample at or after `time`, clamped to the record.
    /// Times within 1e-6 samples past a sample instant snap onto it.
    pub fn index_at(&self, time: f64) -> usize {
        let idx = (time * self.sample_rate - 1e-6).ceil();
        if idx <= 0.0 {
            0
        } else {
            (idx as usize).min(self.len())
        }
    }

    /// Copies samples `[start, end)` into a new waveform with the same rates.
    pub fn window(&self, start: usize, end: usize) -> Result<Waveform> {
        let end = end.min(self.len());
        if end < start + 2 {
            return Err(Error::InvalidWaveform(format!(
                "window [{start}, {end}) too short"
            )));
        }
        let mut w = Waveform::new(
            self.current[start..end].to_vec(),
            self.voltage[start..end].to_vec(),
            self.sample_rate,
            self.mains_freq,
        )?;
        w.voltage_missing = self.voltage_missing;
        Ok(w)
    }
}

// ─── Ingestion ───────────────────────────────────────────────────────

/// Fallback rates for files whose header omits them.
#[derive(Debug, Clone, Copy)]
pub struct IngestConfig {
    pub sample_rate: f64,
    pub mains_freq: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            sample_rate: DEFAULT_SAMPLE_RATE,
            mains_freq: DEFAULT_MAINS_FREQ,
        }
    }
}

/// A parsed waveform file together with every `# key=value` header line.
#[derive(Debug, Clone)]
pub struct WaveformFile {
    pub waveform: Waveform,
    pub headers: BTreeMap<String, String>,
}

pub fn parse_waveform(path: &Path, cfg: &IngestConfig) -> Result<Waveform> {
    Ok(read_waveform_file(path, cfg)?.waveform)
}

pub fn read_waveform_file(path: &Path, cfg: &IngestConfig) -> Result<WaveformFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_waveform_text(&text, path, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Column {
    Time,
    Current,
    Voltage,
}

/// Parses the comma-separated waveform format. `path` is used only for
/// error messages.
pub fn parse_waveform_text(text: &str, path: &Path, cfg: &IngestConfig) -> Result<WaveformFile> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut headers = BTreeMap::new();
    let mut columns: Option<Vec<Column>> = None;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if !rows.is_empty() {
                return Err(parse_err(line_no, "header line after data".into()));
            }
            if let Some((k, v)) = rest.trim().split_once('=') {
                headers.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if columns.is_none() && rows.is_empty() && fields[0].parse::<f64>().is_err() {
            let mut cols = Vec::with_capacity(fields.len());
            for f in &fields {
                cols.push(match *f {
                    "t" | "time" => Column::Time,
                    "i" | "current" => Column::Current,
                    "u" | "voltage" => Column::Voltage,
                    other => return Err(parse_err(line_no, format!("unknown column `{other}`"))),
                });
            }
            if !cols.contains(&Column::Current) {
                return Err(parse_err(line_no, "no current column".into()));
            }
            columns = Some(cols);
            continue;
        }
        let mut values = Vec::with_capacity(fields.len());
        for f in &fields {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(line_no, format!("cannot parse `{f}` as a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, format!("non-finite value `{f}`")));
            }
            values.push(v);
        }
        if let Some((_, first)) = rows.first() {
            if first.len() != values.len() {
                return Err(parse_err(
                    line_no,
                    format!("expected {} fields, found {}", first.len(), values.len()),
                ));
            }
        }
        rows.push((line_no, values));
    }

    let header_f64 = |key: &str, default: f64| -> Result<f64> {
        match headers.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| parse_err(0, format!("header `{key}` is not a number: `{v}`"))),
        }
    };
    let sample_rate = header_f64("sample_rate", cfg.sample_rate)?;
    let mains_freq = header_f64("mains_freq", cfg.mains_freq)?;

    let width = rows.first().map(|(_, r)| r.len()).unwrap_or(1);
    let columns = match columns {
        Some(c) if c.len() == width || rows.is_empty() => c,
        Some(c) => {
            return Err(parse_err(
                rows[0].0,
                format!("header names {} columns, data has {width}", c.len()),
            ))
        }
        None => match width {
            1 => vec![Column::Current],
            2 => vec![Column::Current, Column::Voltage],
            3 => vec![Column::Time, Column::Current, Column::Voltage],
            n => {
                return Err(parse_err(
                    rows[0].0,
                    format!("unsupported column count {n}"),
                ))
            }
        },
    };
    let pos = |c: Column| columns.iter().position(|&x| x == c);
    let (t_col, i_col, u_col) = (
        pos(Column::Time),
        pos(Column::Current),
        pos(Column::Voltage),
    );
    let i_col = i_col.expect("current column checked above");

    if let Some(t_col) = t_col {
        let dt = 1.0 / sample_rate;
        if let Some((_, first)) = rows.first() {
            let t0 = first[t_col];
            for (k, (line, r)) in rows.iter().enumerate() {
                let expected = t0 + k as f64 * dt;
                if (r[t_col] - expected).abs() > 1e-3 * dt {
                    return Err(Error::NonUniformTiming { line: *line });
                }
            }
        }
    }

    let current: Vec<f64> = rows.iter().map(|(_, r)| r[i_col]).collect();
    let voltage: Vec<f64> = match u_col {
        Some(c) => rows.iter().map(|(_, r)| r[c]).collect(),
        None => vec![0.0; current.len()],
    };
    let mut waveform =
        Waveform::new(current, voltage, sample_rate, mains_freq).map_err(|e| match e {
            Error::InvalidWaveform(m) => parse_err(0, m),
            other => other,
        })?;
    waveform.voltage_missing = u_col.is_none();
    if waveform.voltage_missing {
        log::warn!("{}: no voltage column, substituting zeros", path.display());
    }
    Ok(WaveformFile { waveform, headers })
}

/// Serializes a waveform with `extra` header lines. Values are written in
/// shortest round-trip form so re-parsing is bit-exact.
pub fn format_waveform(w: &Waveform, extra: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(w.len() * 40 + 128);
    let _ = writeln!(out, "# sample_rate={}", w.sample_rate);
    let _ = writeln!(out, "# mains_freq={}", w.mains_freq);
    for (k, v) in extra {
        let _ = writeln!(out, "# {k}={v}");
    }
    out.push_str("i,u\n");
    for (i, u) in w.current.iter().zip(&w.voltage) {
        let _ = writeln!(out, "{i},{u}");
    }
    out
}

pub fn write_waveform(path: &Path, w: &Waveform, extra: &[(&str, String)]) -> Result<()> {
    fs::write(path, format_waveform(w, extra)).map_err(|e| Error::io(path, e))
}

// ─── Period geometry ─────────────────────────────────────────────────

/// Hysteresis for crossing detection, as a fraction of the peak absolute
/// value of the scanned range. A positive crossing is only accepted after
/// the signal has been below `-band` since the previous one, which keeps
/// measurement noise near zero from splitting periods.
pub const CROSSING_HYSTERESIS: f64 = 0.05;

/// Negative-to-positive zero crossings of `channel`, in seconds.
pub fn positive_zero_crossings(w: &Waveform, channel: Channel) -> Result<Vec<f64>> {
    let x = w.channel(channel);
    let first = x[0];
    if x.iter().all(|&v| v == first) {
        return Err(Error::NoPeriodStructure("channel is constant".into()));
    }
    let crossings = crossings_from(x, w.sample_rate, 0, CROSSING_HYSTERESIS);
    if crossings.len() < 2 {
        return Err(Error::NoPeriodStructure(format!(
            "{} positive crossing(s) found",
            crossings.len()
        )));
    }
    Ok(crossings)
}

/// Positive-going crossings of `x[from..]`, located by linear interpolation.
pub fn crossings_from(x: &[f64], sample_rate: f64, from: usize, hysteresis: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if from + 1 >= x.len() {
        return out;
    }
    let peak = x[from..].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return out;
    }
    let band = hysteresis * peak;
    let mut armed = x[from] < band;
    let mut armed_since = from;
    for k in from..x.len() {
        let v = x[k];
        if armed {
            if v > band {
                armed = false;
                // latest sign change between arming and here
                let mut j = k;
                while j > armed_since {
                    j -= 1;
                    if x[j] <= 0.0 && x[j + 1] > 0.0 {
                        let frac = if x[j] == 0.0 {
                            0.0
                        } else {
                            -x[j] / (x[j + 1] - x[j])
                        };
                        out.push((j as f64 + frac) / sample_rate);
                        break;
                    }
                }
            }
        } else if v < -band {
            armed = true;
            armed_since = k;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodSlice {
    pub start_index: usize,
    /// Exclusive.
    pub end_index: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub irregular: bool,
}

impl PeriodSlice {
    pub fn duration(&self) -> f64 {
        self.end_time - self.start_time
    }
}

/// One slice per consecutive crossing pair. Slices are contiguous in sample
/// index space; those deviating more than 20 % from the nominal period are
/// flagged `irregular`.
pub fn slice_periods(w: &Waveform, crossings: &[f64]) -> Vec<PeriodSlice> {
    let nominal = w.period();
    crossings
        .windows(2)
        .map(|pair| {
            let (a, b) = (pair[0], pair[1]);
            PeriodSlice {
                start_index: w.index_at(a),
                end_index: w.index_at(b),
                start_time: a,
                end_time: b,
                irregular: ((b - a) - nominal).abs() > IRREGULAR_TOLERANCE * nominal,
            }
        })
        .collect()
}

/// Resamples the current over `slice` to `n` points at uniform phase.
pub fn resample_slice(w: &Waveform, slice: &PeriodSlice, n: usize) -> Vec<f64> {
    resample_samples(&w.current, w.sample_rate, slice, n)
}

/// `n` linearly interpolated values at `start + m·T/n`, `m = 0..n`. The
/// first point sits on the slice's start crossing.
pub fn resample_samples(x: &[f64], sample_rate: f64, slice: &PeriodSlice, n: usize) -> Vec<f64> {
    assert!(n >= 2, "resampling needs at least 2 points");
    let start = slice.start_time * sample_rate;
    let step = slice.duration() * sample_rate / n as f64;
    (0..n)
        .map(|m| interpolate(x, start + m as f64 * step))
        .collect()
}

/// Linear interpolation at fractional sample position `pos`.
pub fn interpolate(x: &[f64], pos: f64) -> f64 {
    let last = x.len() - 1;
    if pos <= 0.0 {
        return x[0];
    }
    if pos >= last as f64 {
        return x[last];
    }
    let idx = pos.floor() as usize;
    let frac = pos - idx as f64;
    if frac == 0.0 {
        x[idx]
    } else {
        x[idx] + frac * (x[idx + 1] - x[idx])
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn tone(amplitude: f64, freq: f64, phase: f64, seconds: f64) -> Waveform {
        let fs = DEFAULT_SAMPLE_RATE;
        let n = (seconds * fs).round() as usize;
        let i: Vec<f64> = (0..n)
            .map(|k| amplitude * (2.0 * PI * freq * k as f64 / fs + phase).sin())
            .collect();
        Waveform::new(i, vec![0.0; n], fs, DEFAULT_MAINS_FREQ).unwrap()
    }

    #[test]
    fn rejects_bad_waveforms() {
        assert!(Waveform::new(vec![0.0], vec![0.0], 1e4, 50.0).is_err());
        assert!(Waveform::new(vec![0.0; 3], vec![0.0; 2], 1e4, 50.0).is_err());
        assert!(Waveform::new(vec![0.0; 3], vec![0.0; 3], 1e4, 0.0).is_err());
        assert!(Waveform::new(vec![0.0; 3], vec![0.0; 3], 1500.0, 50.0).is_err());
    }

    #[test]
    fn parses_two_column_file() {
        let text = "# sample_rate=10000\n# mains_freq=50\ni,u\n0.1,1\n0.2,2\n0.3,3\n";
        let f = parse_waveform_text(text, Path::new("x.csv"), &IngestConfig::default()).unwrap();
        assert_eq!(f.waveform.len(), 3);
        assert_eq!(f.waveform.current, vec![0.1, 0.2, 0.3]);
        assert_eq!(f.waveform.voltage, vec![1.0, 2.0, 3.0]);
        assert!(!f.waveform.voltage_missing);
    }

    #[test]
    fn missing_voltage_becomes_zeros() {
        let text = "# sample_rate=10000\ni\n1\n2\n";
        let f = parse_waveform_text(text, Path::new("x.csv"), &IngestConfig::default()).unwrap();
        assert_eq!(f.waveform.voltage, vec![0.0, 0.0]);
        assert!(f.waveform.voltage_missing);
        assert_eq!(f.waveform.mains_freq, 50.0);
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "# sample_rate=10000\ni,u\n1,2\n3,oops\n";
        match parse_waveform_text(text, Path::new("x.csv"), &IngestConfig::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let ragged = "i,u\n1,2\n3\n";
        assert!(matches!(
            parse_waveform_text(ragged, Path::new("x.csv"), &IngestConfig::default()),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn non_uniform_time_column_is_rejected() {
        let ok = "# sample_rate=1000\n# mains_freq=10\nt,i,u\n0,1,1\n0.001,2,2\n0.002,3,3\n";
        assert!(parse_waveform_text(ok, Path::new("x"), &IngestConfig::default()).is_ok());
        let bad = "# sample_rate=1000\n# mains_freq=10\nt,i,u\n0,1,1\n0.001,2,2\n0.0035,3,3\n";
        assert!(matches!(
            parse_waveform_text(bad, Path::new("x"), &IngestConfig::default()),
            Err(Error::NonUniformTiming { line: 6 })
        ));
    }

    #[test]
    fn sine_crossings() {
        let w = tone(1.0, 50.0, 0.0, 0.1);
        let c = positive_zero_crossings(&w, Channel::Current).unwrap();
        let expected = [0.0, 0.02, 0.04, 0.06, 0.08];
        assert_eq!(c.len(), expected.len());
        for (got, want) in c.iter().zip(expected) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
        let w = tone(-1.0, 50.0, 0.0, 0.1);
        let c = positive_zero_crossings(&w, Channel::Current).unwrap();
        let expected = [0.01, 0.03, 0.05, 0.07, 0.09];
        assert_eq!(c.len(), expected.len());
        for (got, want) in c.iter().zip(expected) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn constant_channel_has_no_periods() {
        let w = Waveform::new(vec![1.0; 500], vec![0.0; 500], 1e4, 50.0).unwrap();
        assert!(matches!(
            positive_zero_crossings(&w, Channel::Current),
            Err(Error::NoPeriodStructure(_))
        ));
        let one = tone(1.0, 50.0, 0.5, 0.015);
        assert!(positive_zero_crossings(&one, Channel::Current).is_err());
    }

    #[test]
    fn noise_near_zero_does_not_split_periods() {
        let mut w = tone(1.0, 50.0, 0.3, 0.2);
        // alternating ±0.02 dither chatters around every zero crossing
        for (k, v) in w.current.iter_mut().enumerate() {
            *v += if k % 2 == 0 { 0.02 } else { -0.02 };
        }
        let c = positive_zero_crossings(&w, Channel::Current).unwrap();
        assert_eq!(c.len(), 10);
        for s in slice_periods(&w, &c) {
            assert!(!s.irregular);
        }
    }

    #[test]
    fn slices_of_pure_tone() {
        let w = tone(1.0, 50.0, 0.0, 0.1);
        let c = positive_zero_crossings(&w, Channel::Current).unwrap();
        let slices = slice_periods(&w, &c);
        assert_eq!(slices.len(), 4);
        for s in &slices {
            assert!((s.duration() - 0.02).abs() <= 1.0 / w.sample_rate);
            assert!(!s.irregular);
            assert!(s.end_index > s.start_index);
        }
        for pair in slices.windows(2) {
            assert_eq!(pair[0].end_index, pair[1].start_index);
        }
    }

    #[test]
    fn chirp_flags_late_slices() {
        // instantaneous frequency sweeps 50 -> 75 Hz over 0.4 s
        let fs = DEFAULT_SAMPLE_RATE;
        let n = (0.4 * fs) as usize;
        let rate = 25.0 / 0.4;
        let i: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 / fs;
                (2.0 * PI * (50.0 * t + 0.5 * rate * t * t)).sin()
            })
            .collect();
        let w = Waveform::new(i, vec![0.0; n], fs, 50.0).unwrap();
        let c = positive_zero_crossings(&w, Channel::Current).unwrap();
        let slices = slice_periods(&w, &c);
        for s in &slices {
            let direct = ((s.end_time - s.start_time) - 0.02).abs() > 0.2 * 0.02;
            assert_eq!(s.irregular, direct);
        }
        assert!(!slices[0].irregular);
        assert!(slices.last().unwrap().irregular);
    }

    #[test]
    fn identity_resampling() {
        let w = tone(1.0, 50.0, 0.0, 0.1);
        let slice = PeriodSlice {
            start_index: 200,
            end_index: 400,
            start_time: 0.02,
            end_time: 0.04,
            irregular: false,
        };
        let r = resample_slice(&w, &slice, 200);
        for (m, v) in r.iter().enumerate() {
            assert!((v - w.current[200 + m]).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_resampling_matches_analytic() {
        let w = tone(1.0, 50.0, 0.2, 0.1);
        let c = positive_zero_crossings(&w, Channel::Current).unwrap();
        let s = slice_periods(&w, &c)[1];
        let r = resample_slice(&w, &s, 400);
        let t0 = s.start_time;
        let dev = r
            .iter()
            .enumerate()
            .map(|(m, v)| {
                let t = t0 + m as f64 * s.duration() / 400.0;
                (v - (2.0 * PI * 50.0 * t + 0.2).sin()).abs()
            })
            .fold(0.0, f64::max);
        // linear interpolation error bound h²/8 with h = ω/fs
        let bound = (2.0 * PI * 50.0 / 10_000.0_f64).powi(2) / 8.0;
        assert!(dev < bound, "{dev}");
    }

    #[test]
    fn zero_slice_resamples_to_zero() {
        let w = Waveform::new(vec![0.0; 100], vec![0.0; 100], 1e4, 50.0).unwrap();
        let s = PeriodSlice {
            start_index: 10,
            end_index: 50,
            start_time: 0.001,
            end_time: 0.005,
            irregular: true,
        };
        assert_eq!(resample_slice(&w, &s, 16), vec![0.0; 16]);
    }

    #[test]
    fn format_round_trips_bitwise() {
        let w = tone(3.7, 50.0, 0.1, 0.05);
        let text = format_waveform(&w, &[("motor_id", "m01".into())]);
        let f = parse_waveform_text(&text, Path::new("x"), &IngestConfig::default()).unwrap();
        assert_eq!(f.waveform, w);
        assert_eq!(f.headers["motor_id"], "m01");
    }
}
