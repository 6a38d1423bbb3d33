//! Run configuration: flat `section.key = value` text.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use motorid::experiments::{ExperimentConfig, Protocol, ScalingMode};
use motorid::features::ShapeConfig;
use motorid::ml::Kernel;
use motorid::synth::{RosterOptions, SignatureMode, SynthConfig};
use motorid::{config_digest, DetectionConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub roster: Option<PathBuf>,
    pub seed: u64,
    pub synth: SynthConfig,
    pub roster_options: RosterOptions,
    /// Overrides every roster entry's event count.
    pub events_per_motor: Option<usize>,
    /// Write full raw records instead of an event store.
    pub raw: bool,
    pub detection: DetectionConfig,
    pub shape: ShapeConfig,
    pub protocol: Protocol,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            output: None,
            features: None,
            roster: None,
            seed: 0,
            synth: SynthConfig::default(),
            roster_options: RosterOptions::default(),
            events_per_motor: None,
            raw: false,
            detection: DetectionConfig::default(),
            shape: ShapeConfig::default(),
            protocol: Protocol::Motors,
            experiment: ExperimentConfig::default(),
        }
    }
}

fn value<T: FromStr>(key: &str, raw: &str) -> CliResult<T> {
    raw.parse()
        .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{raw}`")))
}

fn optional<T: FromStr>(key: &str, raw: &str) -> CliResult<Option<T>> {
    if raw.is_empty() || raw == "auto" {
        Ok(None)
    } else {
        value(key, raw).map(Some)
    }
}

fn prefixed(context: &str, e: CliError) -> CliError {
    match e {
        CliError::Config(m) => CliError::Config(format!("{context}: {m}")),
        other => other,
    }
}

fn path(raw: &str) -> Option<PathBuf> {
    (!raw.is_empty()).then(|| raw.into())
}

fn kernels(raw: &str) -> CliResult<Vec<Kernel>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<Kernel>()
                .map_err(|e| CliError::Config(e.to_string()))
        })
        .collect()
}

fn join_kernels(k: &[Kernel]) -> String {
    k.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(",")
}

fn display_option<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), T::to_string)
}

fn scaling_name(s: ScalingMode) -> &'static str {
    match s {
        ScalingMode::FoldLocal => "fold_local",
        ScalingMode::Global => "global",
    }
}

fn mode_name(m: SignatureMode) -> &'static str {
    match m {
        SignatureMode::Distinct => "distinct",
        SignatureMode::TypeKeyed => "type_keyed",
        SignatureMode::TypeIndependent => "type_independent",
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)
            .map_err(|e| prefixed(&path.display().to_string(), e))?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, val)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected `key = value`",
                    n + 1
                )));
            };
            self.set(key.trim(), val.trim())
                .map_err(|e| prefixed(&format!("line {}", n + 1), e))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, raw: &str) -> CliResult<()> {
        let e = &mut self.experiment;
        match key {
            "paths.input" => self.input = path(raw),
            "paths.output" => self.output = path(raw),
            "paths.features" => self.features = path(raw),
            "paths.roster" => self.roster = path(raw),
            "seed" => self.seed = value(key, raw)?,
            "synth.sample_rate" => self.synth.sample_rate = value(key, raw)?,
            "synth.duration" => self.synth.duration = value(key, raw)?,
            "synth.switch_time" => self.synth.switch_time = value(key, raw)?,
            "synth.voltage_amplitude" => self.synth.voltage_amplitude = value(key, raw)?,
            "synth.grid_phase" => self.synth.grid_phase = value(key, raw)?,
            "synth.mode" => {
                self.roster_options.mode = raw
                    .parse()
                    .map_err(|e: motorid::Error| CliError::Config(e.to_string()))?
            }
            "synth.noise_level" => self.roster_options.noise_level = value(key, raw)?,
            "synth.profile_jitter" => self.roster_options.profile_jitter = value(key, raw)?,
            "synth.amplitude_jitter" => self.roster_options.amplitude_jitter = value(key, raw)?,
            "synth.min_distance" => self.roster_options.min_distance = value(key, raw)?,
            "synth.motor_spread" => self.roster_options.motor_spread = value(key, raw)?,
            "synth.events_per_motor" => self.events_per_motor = optional(key, raw)?,
            "synth.raw" => self.raw = value(key, raw)?,
            "detect.on_threshold" => self.detection.on_threshold = value(key, raw)?,
            "detect.quiet_samples" => self.detection.quiet_samples = value(key, raw)?,
            "detect.steady_tail_periods" => self.detection.steady_tail_periods = value(key, raw)?,
            "features.extrema_prominence" => self.shape.extrema_prominence = value(key, raw)?,
            "features.smoothing_width" => self.shape.smoothing_width = value(key, raw)?,
            "features.inflection_band" => self.shape.inflection_band = value(key, raw)?,
            "ml.c" => e.svm.c = value(key, raw)?,
            "ml.gamma" => e.svm.gamma = optional(key, raw)?,
            "ml.coef0" => e.svm.coef0 = value(key, raw)?,
            "ml.tolerance" => e.svm.tolerance = value(key, raw)?,
            "ml.max_iterations" => e.svm.max_iterations = value(key, raw)?,
            "ml.scaling" => {
                e.scaling = raw
                    .parse()
                    .map_err(|e: motorid::Error| CliError::Config(e.to_string()))?
            }
            "ml.balanced_weights" => e.balanced_weights = value(key, raw)?,
            "experiment.protocol" => {
                self.protocol = raw
                    .parse()
                    .map_err(|e: motorid::Error| CliError::Config(e.to_string()))?
            }
            "experiment.kernels" => e.kernels = kernels(raw)?,
            "experiment.k_max" => e.k_max = value(key, raw)?,
            "experiment.folds" => e.folds = value(key, raw)?,
            "experiment.per_motor" => e.per_motor = value(key, raw)?,
            other => return Err(CliError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        self.synth.validate()?;
        self.detection.validate()?;
        let o = &self.roster_options;
        let fractions = [
            ("synth.noise_level", o.noise_level),
            ("synth.profile_jitter", o.profile_jitter),
            ("synth.amplitude_jitter", o.amplitude_jitter),
            ("synth.motor_spread", o.motor_spread),
            ("features.extrema_prominence", self.shape.extrema_prominence),
            ("features.inflection_band", self.shape.inflection_band),
        ];
        for (key, v) in fractions {
            if !(0.0..1.0).contains(&v) {
                return Err(CliError::Config(format!(
                    "`{key}` must lie in [0, 1), got {v}"
                )));
            }
        }
        if !(o.min_distance >= 0.0) {
            return Err(CliError::Config(
                "`synth.min_distance` must be non-negative".into(),
            ));
        }
        if self.shape.smoothing_width == 0 {
            return Err(CliError::Config(
                "`features.smoothing_width` must be at least 1".into(),
            ));
        }
        if self.events_per_motor == Some(0) {
            return Err(CliError::Config(
                "`synth.events_per_motor` must be at least 1".into(),
            ));
        }
        self.experiment.validate()?;
        Ok(())
    }

    /// Every setting except the paths as sorted `key=value` lines; the
    /// digest input.
    pub fn canonical(&self) -> String {
        let e = &self.experiment;
        let o = &self.roster_options;
        let entries = [
            (
                "detect.on_threshold",
                self.detection.on_threshold.to_string(),
            ),
            (
                "detect.quiet_samples",
                self.detection.quiet_samples.to_string(),
            ),
            (
                "detect.steady_tail_periods",
                self.detection.steady_tail_periods.to_string(),
            ),
            ("experiment.folds", e.folds.to_string()),
            ("experiment.k_max", e.k_max.to_string()),
            ("experiment.kernels", join_kernels(&e.kernels)),
            ("experiment.per_motor", e.per_motor.to_string()),
            ("experiment.protocol", self.protocol.as_str().to_string()),
            (
                "features.extrema_prominence",
                self.shape.extrema_prominence.to_string(),
            ),
            (
                "features.inflection_band",
                self.shape.inflection_band.to_string(),
            ),
            (
                "features.smoothing_width",
                self.shape.smoothing_width.to_string(),
            ),
            ("ml.balanced_weights", e.balanced_weights.to_string()),
            ("ml.c", e.svm.c.to_string()),
            ("ml.coef0", e.svm.coef0.to_string()),
            ("ml.gamma", display_option(&e.svm.gamma)),
            ("ml.max_iterations", e.svm.max_iterations.to_string()),
            ("ml.scaling", scaling_name(e.scaling).to_string()),
            ("ml.tolerance", e.svm.tolerance.to_string()),
            ("seed", self.seed.to_string()),
            ("synth.amplitude_jitter", o.amplitude_jitter.to_string()),
            ("synth.duration", self.synth.duration.to_string()),
            (
                "synth.events_per_motor",
                display_option(&self.events_per_motor),
            ),
            ("synth.grid_phase", self.synth.grid_phase.to_string()),
            ("synth.min_distance", o.min_distance.to_string()),
            ("synth.mode", mode_name(o.mode).to_string()),
            ("synth.motor_spread", o.motor_spread.to_string()),
            ("synth.noise_level", o.noise_level.to_string()),
            ("synth.profile_jitter", o.profile_jitter.to_string()),
            ("synth.raw", self.raw.to_string()),
            ("synth.sample_rate", self.synth.sample_rate.to_string()),
            ("synth.switch_time", self.synth.switch_time.to_string()),
            (
                "synth.voltage_amplitude",
                self.synth.voltage_amplitude.to_string(),
            ),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn digest(&self) -> String {
        config_digest(&self.canonical())
    }
}
