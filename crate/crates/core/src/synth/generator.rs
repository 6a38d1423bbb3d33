use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Waveform, DEFAULT_MAINS_FREQ, DEFAULT_SAMPLE_RATE, MAX_HARMONIC};
use crate::transient::MechType;

/// One simulated fixed-speed motor.
///
/// After switch-on at `t₀` the current is
/// `A·(1 + E·e^{-λτ})·Σₙ hₙ·sin(nωτ + φₙ + ψ) + d(τ)` with `τ = t − t₀`,
/// `ψ` the switching phase of the voltage and `d` a decaying DC offset that
/// starts the current from zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorArchetype {
    pub motor_id: String,
    pub mech_type: MechType,
    /// Steady peak amplitude `A` in amperes.
    pub steady_amplitude: f64,
    /// Inrush envelope `E`, a multiple of the steady amplitude.
    pub envelope_scale: f64,
    /// Envelope decay `λ` in 1/s.
    pub decay_rate: f64,
    /// DC offset at switch-on as a fraction of the switched AC current.
    pub dc_fraction: f64,
    pub dc_decay_rate: f64,
    /// Magnitudes of harmonics 2..=20 relative to the fundamental.
    pub harmonics: Vec<f64>,
    /// Phases of harmonics 1..=20 in radians. The first is the lag of the
    /// fundamental behind the voltage.
    pub phases: Vec<f64>,
    /// Standard deviation of additive white noise, a fraction of `A`.
    pub noise_level: f64,
    pub mains_freq: f64,
    /// Per-event relative spread of each harmonic magnitude.
    pub profile_jitter: f64,
    /// Per-event log-normal spread of the envelope scale and decay rate.
    pub amplitude_jitter: f64,
}

impl MotorArchetype {
    /// A pure sine motor: no harmonics, no inrush, no noise.
    pub fn plain(motor_id: impl Into<String>, mech_type: MechType, steady_amplitude: f64) -> Self {
        MotorArchetype {
            motor_id: motor_id.into(),
            mech_type,
            steady_amplitude,
            envelope_scale: 0.0,
            decay_rate: 60.0,
            dc_fraction: 0.0,
            dc_decay_rate: 90.0,
            harmonics: vec![0.0; MAX_HARMONIC - 1],
            phases: vec![0.0; MAX_HARMONIC],
            noise_level: 0.0,
            mains_freq: DEFAULT_MAINS_FREQ,
            profile_jitter: 0.0,
            amplitude_jitter: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Config(format!("motor {}: {what}", self.motor_id)));
        if !(self.steady_amplitude > 0.0) {
            return bad(format!(
                "steady_amplitude must be positive, got {}",
                self.steady_amplitude
            ));
        }
        if !(self.decay_rate > 0.0) || !(self.dc_decay_rate > 0.0) {
            return bad("decay rates must be positive".into());
        }
        if self.harmonics.len() != MAX_HARMONIC - 1 {
            return bad(format!(
                "{} harmonic magnitudes, expected {}",
                self.harmonics.len(),
                MAX_HARMONIC - 1
            ));
        }
        if self.phases.len() != MAX_HARMONIC {
            return bad(format!(
                "{} harmonic phases, expected {MAX_HARMONIC}",
                self.phases.len()
            ));
        }
        if self.harmonics.iter().any(|h| !(*h >= 0.0)) {
            return bad("harmonic magnitudes must be non-negative".into());
        }
        for (name, v) in [
            ("envelope_scale", self.envelope_scale),
            ("dc_fraction", self.dc_fraction),
            ("noise_level", self.noise_level),
            ("profile_jitter", self.profile_jitter),
            ("amplitude_jitter", self.amplitude_jitter),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        if !(self.mains_freq > 0.0) {
            return bad("mains_freq must be positive".into());
        }
        Ok(())
    }
}

/// Recording parameters shared by all generated events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub sample_rate: f64,
    /// Record length in seconds.
    pub duration: f64,
    /// Earliest switch-on time; the actual time is the next instant at which
    /// the voltage reaches the switching phase.
    pub switch_time: f64,
    pub voltage_amplitude: f64,
    pub grid_phase: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sample_rate: DEFAULT_SAMPLE_RATE,
            duration: 1.2,
            switch_time: 0.3,
            voltage_amplitude: 325.0,
            grid_phase: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration >= 1.0) {
            return Err(Error::Config(format!(
                "synthetic records need at least 1 s, got {}",
                self.duration
            )));
        }
        if !(self.sample_rate >= 4000.0) {
            return Err(Error::Config(format!(
                "sample rate must be at least 4 kHz, got {}",
                self.sample_rate
            )));
        }
        if !(self.switch_time >= 0.0) || self.switch_time >= self.duration {
            return Err(Error::Config(
                "switch_time must lie inside the record".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub switch_time: f64,
    /// Voltage phase at switch-on, radians in `[0, 2π)`.
    pub switch_phase: f64,
    pub motor_id: String,
}

/// Simulates one turn-on of `a`.
pub fn generate_event(
    a: &MotorArchetype,
    switch_phase: f64,
    cfg: &SynthConfig,
    seed: u64,
) -> Result<(Waveform, GroundTruth)> {
    a.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = 2.0 * PI * a.mains_freq;

    let mut mags = Vec::with_capacity(MAX_HARMONIC);
    mags.push(1.0);
    for &h in &a.harmonics {
        let z: f64 = StandardNormal.sample(&mut rng);
        mags.push((h * (1.0 + a.profile_jitter * z)).max(0.0));
    }
    let z_env: f64 = StandardNormal.sample(&mut rng);
    let z_rate: f64 = StandardNormal.sample(&mut rng);
    let envelope = a.envelope_scale * (a.amplitude_jitter * z_env).exp();
    let rate_factor = (a.amplitude_jitter * z_rate).exp();
    let rate = a.decay_rate * rate_factor;
    let dc_rate = a.dc_decay_rate * rate_factor;

    let switch_phase = switch_phase.rem_euclid(2.0 * PI);
    let gap = (switch_phase - cfg.grid_phase - omega * cfg.switch_time).rem_euclid(2.0 * PI);
    let t0 = cfg.switch_time + gap / omega;

    let ac = |tau: f64| -> f64 {
        mags.iter()
            .zip(&a.phases)
            .enumerate()
            .map(|(k, (m, ph))| m * ((k + 1) as f64 * omega * tau + ph + switch_phase).sin())
            .sum()
    };
    let amp = a.steady_amplitude;
    let dc0 = a.dc_fraction * amp * (1.0 + envelope) * ac(0.0);
    let noise = Normal::new(0.0, a.noise_level * amp).map_err(|e| Error::Config(e.to_string()))?;

    let n = (cfg.duration * cfg.sample_rate).round() as usize;
    let mut current = Vec::with_capacity(n);
    let mut voltage = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / cfg.sample_rate;
        let tau = t - t0;
        let clean = if tau < 0.0 {
            0.0
        } else {
            amp * (1.0 + envelope * (-rate * tau).exp()) * ac(tau) - dc0 * (-dc_rate * tau).exp()
        };
        let eps = if a.noise_level > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        current.push(clean + eps);
        voltage.push(cfg.voltage_amplitude * (omega * t + cfg.grid_phase).sin());
    }
    let w = Waveform::new(current, voltage, cfg.sample_rate, a.mains_freq)?;
    Ok((
        w,
        GroundTruth {
            switch_time: t0,
            switch_phase,
            motor_id: a.motor_id.clone(),
        },
    ))
}

/// Seed of event `event` of motor `motor`, decorrelated from its neighbours.
pub fn event_seed(seed: u64, motor: usize, event: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((motor as u64) << 32) | event as u64);
    rng.random()
}

/// Switching phase and generator seed of one corpus event.
pub fn event_draw(seed: u64, motor: usize, event: usize) -> (f64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(event_seed(seed, motor, event));
    let phase = rng.random_range(0.0..2.0 * PI);
    (phase, rng.random())
}
