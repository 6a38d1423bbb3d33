//! Synthetic fixed-speed motor turn-ons with known ground truth, and the
//! brute-force oracles the feature code is checked against.

mod generator;
pub mod oracle;
mod roster;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use generator::{
    event_draw, event_seed, generate_event, GroundTruth, MotorArchetype, SynthConfig,
};
pub use roster::{
    build_roster, format_roster, parse_roster, profile_distance, read_roster, reference_roster,
    write_roster, RosterEntry, RosterOptions, SignatureMode, REFERENCE_MOTORS,
};

use crate::error::{Error, Result};
use crate::features::table::{FeatureRow, FeatureTable};
use crate::features::{extract_all_with, feature_names, ShapeConfig};
use crate::signal::Waveform;
use crate::transient::{detect_turn_on, DetectionConfig, EventRecord, MechType, TurnOnEvent};

/// One generated record holding a single turn-on.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthEvent {
    pub waveform: Waveform,
    pub truth: GroundTruth,
    pub motor_id: String,
    pub mech_type: MechType,
    /// Position of the event within its motor.
    pub index: usize,
}

impl SynthEvent {
    /// Store-relative file name, `<motor_id>/event_<index>.csv`.
    pub fn file_name(&self) -> String {
        format!("{}/event_{:03}.csv", self.motor_id, self.index)
    }

    /// Runs detection on the record and captures its single turn-on.
    pub fn capture(&self, cfg: &DetectionConfig) -> Result<(EventRecord, TurnOnEvent)> {
        let times = detect_turn_on(&self.waveform, cfg);
        let Some(&t) = times.first() else {
            return Err(Error::InvalidWaveform(format!(
                "no turn-on detected in {}",
                self.file_name()
            )));
        };
        EventRecord::capture(
            &self.waveform,
            t,
            times.get(1).copied(),
            cfg,
            &self.motor_id,
            self.mech_type,
        )
    }
}

fn event_jobs(roster: &[RosterEntry]) -> Vec<(usize, usize)> {
    roster
        .iter()
        .enumerate()
        .flat_map(|(m, e)| (0..e.events).map(move |k| (m, k)))
        .collect()
}

fn generate_one(
    roster: &[RosterEntry],
    cfg: &SynthConfig,
    seed: u64,
    (m, k): (usize, usize),
) -> Result<SynthEvent> {
    let a = &roster[m].archetype;
    let (phase, event_seed) = event_draw(seed, m, k);
    let (waveform, truth) = generate_event(a, phase, cfg, event_seed)?;
    Ok(SynthEvent {
        waveform,
        truth,
        motor_id: a.motor_id.clone(),
        mech_type: a.mech_type,
        index: k,
    })
}

/// All events of the roster, motor by motor. Each event's switching phase
/// and noise come from its own seed, so the result does not depend on the
/// thread count.
pub fn generate_corpus(
    roster: &[RosterEntry],
    cfg: &SynthConfig,
    seed: u64,
) -> Result<Vec<SynthEvent>> {
    if roster.is_empty() {
        return Err(Error::Config("roster is empty".into()));
    }
    event_jobs(roster)
        .into_par_iter()
        .map(|job| generate_one(roster, cfg, seed, job))
        .collect()
}

/// Sets every motor's event count to `events`.
pub fn with_events(roster: &[RosterEntry], events: usize) -> Vec<RosterEntry> {
    roster
        .iter()
        .map(|e| RosterEntry {
            archetype: e.archetype.clone(),
            events,
        })
        .collect()
}

/// Generates, detects, preprocesses and extracts every event without
/// keeping the raw records.
pub fn synthesize_features(
    roster: &[RosterEntry],
    cfg: &SynthConfig,
    detection: &DetectionConfig,
    shape: &ShapeConfig,
    seed: u64,
) -> Result<FeatureTable> {
    if roster.is_empty() {
        return Err(Error::Config("roster is empty".into()));
    }
    let rows: Vec<FeatureRow> = event_jobs(roster)
        .into_par_iter()
        .map(|job| {
            let ev = generate_one(roster, cfg, seed, job)?;
            let (_, event) = ev.capture(detection)?;
            Ok(FeatureRow {
                motor_id: ev.motor_id.clone(),
                mech_type: ev.mech_type,
                event_file: ev.file_name(),
                values: extract_all_with(&event, shape).values,
            })
        })
        .collect::<Result<_>>()?;
    Ok(FeatureTable {
        names: feature_names().to_vec(),
        rows,
    })
}

/// Writes the roster's events into an event store under `dir`, one
/// directory per motor, adding `extra` to every file header. Returns the
/// written paths in corpus order.
pub fn write_corpus(
    roster: &[RosterEntry],
    cfg: &SynthConfig,
    detection: &DetectionConfig,
    seed: u64,
    dir: &Path,
    extra: &[(&str, String)],
) -> Result<Vec<PathBuf>> {
    for e in roster {
        let sub = dir.join(&e.archetype.motor_id);
        fs::create_dir_all(&sub).map_err(|err| Error::io(&sub, err))?;
    }
    event_jobs(roster)
        .into_par_iter()
        .map(|job| {
            let ev = generate_one(roster, cfg, seed, job)?;
            let (record, _) = ev.capture(detection)?;
            let path = dir.join(ev.file_name());
            record.write_with(&path, extra)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_all, feature_index};
    use crate::signal::MAX_HARMONIC;
    use crate::transient::preprocess_event;

    fn quiet_roster() -> Vec<RosterEntry> {
        let o = RosterOptions {
            noise_level: 0.0,
            profile_jitter: 0.0,
            amplitude_jitter: 0.0,
            ..RosterOptions::default()
        };
        build_roster(&REFERENCE_MOTORS[..4], &o, 21).unwrap()
    }

    #[test]
    fn corpus_counts_and_labels() {
        let roster = with_events(
            &reference_roster(&RosterOptions::default(), 1).unwrap()[..3],
            2,
        );
        let corpus = generate_corpus(&roster, &SynthConfig::default(), 5).unwrap();
        assert_eq!(corpus.len(), 6);
        assert!(corpus[..2]
            .iter()
            .all(|e| e.motor_id == "m01" && e.truth.motor_id == "m01"));
        assert_eq!(corpus[2].file_name(), "m02/event_000.csv");
        assert!(generate_corpus(&[], &SynthConfig::default(), 5).is_err());
    }

    #[test]
    fn corpus_is_seed_deterministic() {
        let roster = with_events(
            &reference_roster(&RosterOptions::default(), 1).unwrap()[..2],
            2,
        );
        let a = generate_corpus(&roster, &SynthConfig::default(), 8).unwrap();
        let b = generate_corpus(&roster, &SynthConfig::default(), 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn detection_finds_the_switch() {
        let roster = with_events(&reference_roster(&RosterOptions::default(), 3).unwrap(), 2);
        let corpus = generate_corpus(&roster, &SynthConfig::default(), 2).unwrap();
        for ev in &corpus {
            let t = detect_turn_on(&ev.waveform, &DetectionConfig::default());
            assert_eq!(t.len(), 1, "{}", ev.file_name());
            assert!((t[0] - ev.truth.switch_time).abs() < 0.02);
        }
    }

    #[test]
    fn steady_normalization_brings_period_six_near_one() {
        let roster = with_events(&reference_roster(&RosterOptions::default(), 3).unwrap(), 3);
        let corpus = generate_corpus(&roster, &SynthConfig::default(), 4).unwrap();
        for ev in &corpus {
            let (_, e) = ev.capture(&DetectionConfig::default()).unwrap();
            let peak = e.periods[4].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            assert!((0.9..=1.1).contains(&peak), "{} {peak}", ev.file_name());
        }
    }

    #[test]
    fn scale_factor_recovers_steady_amplitude() {
        let mut a = MotorArchetype::plain("m", MechType::Fan, 7.3);
        a.envelope_scale = 4.0;
        a.dc_fraction = 1.0;
        let (w, truth) = generate_event(&a, 2.0, &SynthConfig::default(), 0).unwrap();
        let f = crate::transient::steady_scale_factor(
            &w,
            truth.switch_time,
            &DetectionConfig::default(),
        )
        .unwrap();
        assert!((f * 7.3 - 1.0).abs() < 0.02);
        let e = preprocess_event(&w, truth.switch_time, &DetectionConfig::default()).unwrap();
        assert!(!e.polarity_flipped || e.periods[0].iter().cloned().fold(f64::MIN, f64::max) > 0.0);
    }

    #[test]
    fn quiet_harmonics_match_the_profile() {
        let roster = with_events(&quiet_roster(), 2);
        let corpus = generate_corpus(&roster, &SynthConfig::default(), 6).unwrap();
        for ev in &corpus {
            let (_, e) = ev.capture(&DetectionConfig::default()).unwrap();
            let fv = extract_all(&e);
            let a = &roster
                .iter()
                .find(|r| r.archetype.motor_id == ev.motor_id)
                .unwrap()
                .archetype;
            for n in 2..=MAX_HARMONIC {
                let got = fv.values[feature_index(&format!("h{n:02}_p6")).unwrap()];
                assert!(
                    (got - a.harmonics[n - 2]).abs() < 0.02,
                    "{} h{n}: {got}",
                    ev.motor_id
                );
            }
        }
    }

    #[test]
    fn inrush_energy_exceeds_steady() {
        let roster = with_events(&reference_roster(&RosterOptions::default(), 7).unwrap(), 6);
        let table = synthesize_features(
            &roster,
            &SynthConfig::default(),
            &DetectionConfig::default(),
            &ShapeConfig::default(),
            7,
        )
        .unwrap();
        let (e2, e6) = (
            feature_index("energy_p2").unwrap(),
            feature_index("energy_p6").unwrap(),
        );
        let ok = table
            .rows
            .iter()
            .filter(|r| r.values[e2] >= r.values[e6])
            .count();
        assert!(ok * 100 >= 95 * table.len(), "{ok}/{}", table.len());
    }

    #[test]
    fn written_corpus_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let roster = with_events(
            &reference_roster(&RosterOptions::default(), 1).unwrap()[..2],
            1,
        );
        let extra = [("config_digest", "abc".to_string())];
        let cfg = SynthConfig::default();
        let paths = write_corpus(
            &roster,
            &cfg,
            &DetectionConfig::default(),
            3,
            dir.path(),
            &extra,
        )
        .unwrap();
        assert_eq!(paths.len(), 2);
        let corpus = generate_corpus(&roster, &SynthConfig::default(), 3).unwrap();
        for (p, ev) in paths.iter().zip(&corpus) {
            let text = fs::read_to_string(p).unwrap();
            assert!(text.lines().any(|l| l == "# config_digest=abc"));
            let rec = EventRecord::read(p, &Default::default()).unwrap();
            let (want, _) = ev.capture(&DetectionConfig::default()).unwrap();
            assert_eq!(rec, want);
        }
    }
}
