//! Motor rosters: the text file format and builders for rosters shaped like
//! the measured 18-motor corpus.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::generator::MotorArchetype;
use crate::error::{Error, Result};
use crate::signal::{DEFAULT_MAINS_FREQ, MAX_HARMONIC};
use crate::transient::MechType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub archetype: MotorArchetype,
    /// Number of turn-on events to generate for this motor.
    pub events: usize,
}

/// Motor ids, mechanical output and event counts of the measured corpus.
pub const REFERENCE_MOTORS: [(&str, MechType, usize); 18] = [
    ("m01", MechType::Compressor, 14),
    ("m02", MechType::Other, 12),
    ("m03", MechType::Other, 21),
    ("m04", MechType::Pump, 12),
    ("m05", MechType::Compressor, 8),
    ("m06", MechType::Fan, 9),
    ("m07", MechType::Pump, 27),
    ("m08", MechType::Pump, 8),
    ("m09", MechType::Other, 10),
    ("m10", MechType::Fan, 28),
    ("m11", MechType::Pump, 15),
    ("m12", MechType::Compressor, 38),
    ("m13", MechType::Fan, 39),
    ("m14", MechType::Pump, 47),
    ("m15", MechType::Compressor, 46),
    ("m16", MechType::Fan, 14),
    ("m17", MechType::Fan, 18),
    ("m18", MechType::Pump, 10),
];

/// How harmonic profiles relate to motors and mechanical output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignatureMode {
    /// Every motor has its own profile.
    Distinct,
    /// Motors of one mechanical output share a profile.
    TypeKeyed,
    /// Profiles are drawn without regard to the mechanical output.
    TypeIndependent,
}

impl std::str::FromStr for SignatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distinct" => Ok(SignatureMode::Distinct),
            "type_keyed" => Ok(SignatureMode::TypeKeyed),
            "type_independent" => Ok(SignatureMode::TypeIndependent),
            other => Err(Error::Config(format!("unknown signature mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RosterOptions {
    pub mode: SignatureMode,
    pub noise_level: f64,
    pub profile_jitter: f64,
    pub amplitude_jitter: f64,
    /// Minimum Euclidean distance between the harmonic profiles of two
    /// distinct signatures.
    pub min_distance: f64,
    /// Relative per-motor deviation from a shared signature.
    pub motor_spread: f64,
}

impl Default for RosterOptions {
    fn default() -> Self {
        RosterOptions {
            mode: SignatureMode::Distinct,
            noise_level: 0.02,
            profile_jitter: 0.25,
            amplitude_jitter: 0.1,
            min_distance: 0.05,
            motor_spread: 0.02,
        }
    }
}

/// Euclidean distance between two harmonic magnitude profiles.
pub fn profile_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Minimum distance between the shared per-type profiles.
const TYPE_SEPARATION: f64 = 0.08;

fn draw_profile(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (2..=MAX_HARMONIC)
        .map(|n| {
            let ceiling = if n % 2 == 1 { 0.45 / n as f64 } else { 0.02 };
            ceiling * rng.random::<f64>()
        })
        .collect()
}

const MAX_PROFILE_DRAWS: usize = 100_000;

/// `count` profiles with pairwise distance at least `min_distance`.
fn distinct_profiles(
    rng: &mut ChaCha8Rng,
    count: usize,
    min_distance: f64,
) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    for _ in 0..MAX_PROFILE_DRAWS {
        if out.len() == count {
            break;
        }
        let p = draw_profile(rng);
        if out.iter().all(|q| profile_distance(&p, q) >= min_distance) {
            out.push(p);
        }
    }
    if out.len() < count {
        return Err(Error::Config(format!(
            "could not draw {count} harmonic profiles at distance {min_distance}; lower min_distance"
        )));
    }
    Ok(out)
}

fn perturb(rng: &mut ChaCha8Rng, profile: &[f64], spread: f64) -> Vec<f64> {
    profile
        .iter()
        .map(|h| (h * (1.0 + spread * (2.0 * rng.random::<f64>() - 1.0))).max(0.0))
        .collect()
}

fn archetype(
    rng: &mut ChaCha8Rng,
    id: &str,
    mech: MechType,
    harmonics: Vec<f64>,
    o: &RosterOptions,
) -> MotorArchetype {
    let decay = rng.random_range(55.0..110.0);
    let mut phases = Vec::with_capacity(MAX_HARMONIC);
    phases.push(-rng.random_range(0.3..1.2));
    for _ in 1..MAX_HARMONIC {
        phases.push(rng.random_range(0.0..2.0 * PI));
    }
    MotorArchetype {
        motor_id: id.to_string(),
        mech_type: mech,
        steady_amplitude: rng.random_range(1.0..12.0),
        envelope_scale: rng.random_range(3.0..8.0),
        decay_rate: decay,
        dc_fraction: 1.0,
        dc_decay_rate: 1.5 * decay,
        harmonics,
        phases,
        noise_level: o.noise_level,
        mains_freq: DEFAULT_MAINS_FREQ,
        profile_jitter: o.profile_jitter,
        amplitude_jitter: o.amplitude_jitter,
    }
}

/// A roster of `motors` (id, mechanical output, event count) with harmonic
/// profiles assigned per `o.mode`.
pub fn build_roster(
    motors: &[(&str, MechType, usize)],
    o: &RosterOptions,
    seed: u64,
) -> Result<Vec<RosterEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profiles: Vec<Vec<f64>> = match o.mode {
        SignatureMode::Distinct | SignatureMode::TypeIndependent => {
            distinct_profiles(&mut rng, motors.len(), o.min_distance)?
        }
        SignatureMode::TypeKeyed => {
            let shared = distinct_profiles(
                &mut rng,
                MechType::ALL.len(),
                o.min_distance.max(TYPE_SEPARATION),
            )?;
            motors
                .iter()
                .map(|(_, mech, _)| {
                    let base = &shared[MechType::ALL
                        .iter()
                        .position(|m| m == mech)
                        .expect("known type")];
                    perturb(&mut rng, base, o.motor_spread)
                })
                .collect()
        }
    };
    Ok(motors
        .iter()
        .zip(profiles)
        .map(|(&(id, mech, events), profile)| RosterEntry {
            archetype: archetype(&mut rng, id, mech, profile, o),
            events,
        })
        .collect())
}

/// The 18-motor roster with the measured per-motor event counts (376 events).
pub fn reference_roster(o: &RosterOptions, seed: u64) -> Result<Vec<RosterEntry>> {
    build_roster(&REFERENCE_MOTORS, o, seed)
}

// ─── Roster files ────────────────────────────────────────────────────

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn format_roster(roster: &[RosterEntry]) -> String {
    let mut out = String::new();
    for e in roster {
        let a = &e.archetype;
        let _ = writeln!(out, "[motor]");
        let _ = writeln!(out, "motor_id = {}", a.motor_id);
        let _ = writeln!(out, "mech_type = {}", a.mech_type);
        let _ = writeln!(out, "events = {}", e.events);
        for (key, v) in [
            ("steady_amplitude", a.steady_amplitude),
            ("envelope_scale", a.envelope_scale),
            ("decay_rate", a.decay_rate),
            ("dc_fraction", a.dc_fraction),
            ("dc_decay_rate", a.dc_decay_rate),
            ("noise_level", a.noise_level),
            ("mains_freq", a.mains_freq),
            ("profile_jitter", a.profile_jitter),
            ("amplitude_jitter", a.amplitude_jitter),
        ] {
            let _ = writeln!(out, "{key} = {v}");
        }
        let _ = writeln!(out, "harmonics = {}", join(&a.harmonics));
        let _ = writeln!(out, "phases = {}", join(&a.phases));
        out.push('\n');
    }
    out
}

pub fn parse_roster(text: &str, path: &Path) -> Result<Vec<RosterEntry>> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut blocks: Vec<(usize, Vec<(usize, String, String)>)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "[motor]" {
            blocks.push((k + 1, Vec::new()));
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(k + 1, format!("expected `key = value`, got `{line}`")));
        };
        let Some(block) = blocks.last_mut() else {
            return Err(err(k + 1, "entry before the first [motor] block".into()));
        };
        block
            .1
            .push((k + 1, key.trim().to_string(), value.trim().to_string()));
    }

    let mut roster = Vec::with_capacity(blocks.len());
    for (start, entries) in blocks {
        let mut a = MotorArchetype::plain("", MechType::Other, 1.0);
        let mut events = None;
        let mut seen_id = false;
        for (line, key, value) in entries {
            let number = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| err(line, format!("`{v}` is not a number")))
            };
            let list = |v: &str| {
                v.split_whitespace()
                    .map(number)
                    .collect::<Result<Vec<f64>>>()
            };
            match key.as_str() {
                "motor_id" => {
                    a.motor_id = value;
                    seen_id = true;
                }
                "mech_type" => {
                    a.mech_type = value.parse().map_err(|e: Error| err(line, e.to_string()))?
                }
                "events" => {
                    events = Some(
                        value
                            .parse()
                            .map_err(|_| err(line, format!("bad event count `{value}`")))?,
                    )
                }
                "steady_amplitude" => a.steady_amplitude = number(&value)?,
                "envelope_scale" => a.envelope_scale = number(&value)?,
                "decay_rate" => a.decay_rate = number(&value)?,
                "dc_fraction" => a.dc_fraction = number(&value)?,
                "dc_decay_rate" => a.dc_decay_rate = number(&value)?,
                "noise_level" => a.noise_level = number(&value)?,
                "mains_freq" => a.mains_freq = number(&value)?,
                "profile_jitter" => a.profile_jitter = number(&value)?,
                "amplitude_jitter" => a.amplitude_jitter = number(&value)?,
                "harmonics" => a.harmonics = list(&value)?,
                "phases" => a.phases = list(&value)?,
                other => return Err(err(line, format!("unknown key `{other}`"))),
            }
        }
        if !seen_id {
            return Err(err(start, "motor block without motor_id".into()));
        }
        let events =
            events.ok_or_else(|| err(start, format!("motor {} has no event count", a.motor_id)))?;
        a.validate().map_err(|e| err(start, e.to_string()))?;
        roster.push(RosterEntry {
            archetype: a,
            events,
        });
    }
    Ok(roster)
}

pub fn read_roster(path: &Path) -> Result<Vec<RosterEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_roster(&text, path)
}

pub fn write_roster(path: &Path, roster: &[RosterEntry]) -> Result<()> {
    fs::write(path, format_roster(roster)).map_err(|e| Error::io(path, e))
}
