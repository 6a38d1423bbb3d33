use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use walkdir::WalkDir;

use motorid::experiments::{render_report, run_experiment, ExperimentReport};
use motorid::features::table::{FeatureRow, FeatureTable};
use motorid::features::{extract_all_with, feature_names};
use motorid::signal::{read_waveform_file, write_waveform, IngestConfig};
use motorid::synth::{
    generate_corpus, read_roster, reference_roster, with_events, write_corpus, write_roster,
    RosterEntry,
};
use motorid::transient::{capture_events, EventRecord, MechType};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const FEATURES_FILE: &str = "features.csv";
pub const ROSTER_FILE: &str = "roster.txt";
pub const REPORT_JSON: &str = "report.json";

fn digest_header(cfg: &RunConfig) -> Vec<(&'static str, String)> {
    vec![("config_digest", cfg.digest())]
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> CliResult<&'a Path> {
    p.as_deref()
        .ok_or_else(|| CliError::Config(format!("no {what} given")))
}

/// Every `.csv` file below `dir`, sorted by path.
fn csv_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(CliError::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::io(dir, e.into()))?;
        let p = entry.path();
        if entry.file_type().is_file() && p.extension().is_some_and(|x| x == "csv") {
            files.push(p.to_path_buf());
        }
    }
    Ok(files)
}

fn relative(path: &Path, root: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn roster(cfg: &RunConfig) -> CliResult<Vec<RosterEntry>> {
    let base = match &cfg.roster {
        Some(p) => read_roster(p)?,
        None => reference_roster(&cfg.roster_options, cfg.seed)?,
    };
    Ok(match cfg.events_per_motor {
        Some(n) => with_events(&base, n),
        None => base,
    })
}

/// Writes a synthetic corpus: an event store by default, full records when
/// `synth.raw` is set. Returns the number of event files.
pub fn synth(cfg: &RunConfig, out: &Path) -> CliResult<usize> {
    let roster = roster(cfg)?;
    create_dir(out)?;
    let roster_path = out.join(ROSTER_FILE);
    write_roster(&roster_path, &roster)?;
    let text = fs::read_to_string(&roster_path).map_err(|e| CliError::io(&roster_path, e))?;
    fs::write(
        &roster_path,
        format!("# config_digest={}\n{text}", cfg.digest()),
    )
    .map_err(|e| CliError::io(&roster_path, e))?;

    let header = digest_header(cfg);
    if !cfg.raw {
        let paths = write_corpus(&roster, &cfg.synth, &cfg.detection, cfg.seed, out, &header)?;
        return Ok(paths.len());
    }
    let corpus = generate_corpus(&roster, &cfg.synth, cfg.seed)?;
    for e in &roster {
        create_dir(&out.join(&e.archetype.motor_id))?;
    }
    corpus.par_iter().try_for_each(|ev| -> CliResult<()> {
        let mut extra = vec![
            ("motor_id", ev.motor_id.clone()),
            ("mech_type", ev.mech_type.to_string()),
            ("switch_time", ev.truth.switch_time.to_string()),
        ];
        extra.extend(header.iter().cloned());
        let path = out.join(format!("{}/record_{:03}.csv", ev.motor_id, ev.index));
        write_waveform(&path, &ev.waveform, &extra)?;
        Ok(())
    })?;
    Ok(corpus.len())
}

/// Outcome of a batch over input files.
#[derive(Debug, Default)]
pub struct Batch {
    pub files: usize,
    pub failed: usize,
    pub written: usize,
}

fn all_failed(b: &Batch, what: &str) -> CliResult<()> {
    if b.files > 0 && b.failed == b.files {
        return Err(CliError::NoInput(format!("all {} {what} failed", b.files)));
    }
    Ok(())
}

/// Detects turn-ons in every raw record below `input` and writes them to an
/// event store under `out`.
pub fn detect(cfg: &RunConfig, input: &Path, out: &Path) -> CliResult<Batch> {
    let files = csv_files(input)?;
    create_dir(out)?;
    let header = digest_header(cfg);
    let ingest = IngestConfig::default();
    let results: Vec<Option<usize>> = files
        .par_iter()
        .map(|path| -> Option<usize> {
            let run = || -> CliResult<usize> {
                let file = read_waveform_file(path, &ingest)?;
                let motor = file.headers.get("motor_id").cloned().unwrap_or_else(|| {
                    path.parent()
                        .and_then(|p| p.file_name())
                        .map_or_else(|| "unknown".into(), |n| n.to_string_lossy().into_owned())
                });
                let mech = match file.headers.get("mech_type") {
                    Some(m) => m.parse()?,
                    None => MechType::Other,
                };
                let stem = path
                    .file_stem()
                    .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
                let dir = out.join(&motor);
                create_dir(&dir)?;
                let mut written = 0;
                for (k, captured) in capture_events(&file.waveform, &cfg.detection, &motor, mech)
                    .into_iter()
                    .enumerate()
                {
                    match captured {
                        Ok((record, _)) => {
                            record.write_with(&dir.join(format!("{stem}_e{k:02}.csv")), &header)?;
                            written += 1;
                        }
                        Err(e) => log::warn!("{}: event {k} skipped: {e}", path.display()),
                    }
                }
                if written == 0 {
                    log::warn!("{}: no turn-on found", path.display());
                }
                Ok(written)
            };
            run()
                .map_err(|e| log::warn!("{}: skipped: {e}", path.display()))
                .ok()
        })
        .collect();
    let batch = Batch {
        files: files.len(),
        failed: results.iter().filter(|r| r.is_none()).count(),
        written: results.iter().flatten().sum(),
    };
    all_failed(&batch, "records")?;
    Ok(batch)
}

/// Extracts the feature catalog of every stored event below `input` into a
/// feature table.
pub fn extract(cfg: &RunConfig, input: &Path, out: &Path) -> CliResult<(Batch, PathBuf)> {
    let files = csv_files(input)?;
    let ingest = IngestConfig::default();
    let rows: Vec<Option<FeatureRow>> = files
        .par_iter()
        .map(|path| {
            let run = || -> CliResult<FeatureRow> {
                let record = EventRecord::read(path, &ingest)?;
                let event = record.preprocess()?;
                Ok(FeatureRow {
                    motor_id: record.motor_id,
                    mech_type: record.mech_type,
                    event_file: relative(path, input),
                    values: extract_all_with(&event, &cfg.shape).values,
                })
            };
            run()
                .map_err(|e| log::warn!("{}: skipped: {e}", path.display()))
                .ok()
        })
        .collect();
    let mut table = FeatureTable::new(feature_names().to_vec());
    let batch = Batch {
        files: files.len(),
        failed: rows.iter().filter(|r| r.is_none()).count(),
        written: rows.iter().flatten().count(),
    };
    all_failed(&batch, "event files")?;
    table.rows = rows.into_iter().flatten().collect();
    create_dir(out)?;
    let path = out.join(FEATURES_FILE);
    table.write(&path, Some(&cfg.digest()))?;
    Ok((batch, path))
}

/// Runs the configured protocol on a feature table and renders the report.
pub fn experiment(cfg: &RunConfig, features: &Path, out: &Path) -> CliResult<ExperimentReport> {
    let (table, _) = FeatureTable::read(features)?;
    if table.names.len() != feature_names().len() {
        log::info!("feature table has {} feature columns", table.names.len());
    }
    let mut ecfg = cfg.experiment.clone();
    ecfg.seed = cfg.seed;
    let report = run_experiment(cfg.protocol, &table, &ecfg, &cfg.digest())?;
    render_report(&report, &table, out)?;
    Ok(report)
}

/// Re-renders the tables of a stored report.
pub fn report(report_dir: &Path, features: &Path, out: &Path) -> CliResult<ExperimentReport> {
    let path = report_dir.join(REPORT_JSON);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let report: ExperimentReport = serde_json::from_str(&text).map_err(motorid::Error::from)?;
    let (table, _) = FeatureTable::read(features)?;
    let wanted: Vec<&str> = report.events.iter().map(String::as_str).collect();
    let present: Vec<&str> = table.rows.iter().map(|r| r.event_file.as_str()).collect();
    if wanted.iter().any(|w| !present.contains(w)) {
        return Err(motorid::Error::Protocol(format!(
            "{} does not hold every event of the report",
            features.display()
        ))
        .into());
    }
    render_report(&report, &table, out)?;
    Ok(report)
}

pub fn input_path<'a>(cfg: &'a RunConfig, what: &str) -> CliResult<&'a Path> {
    required(&cfg.input, what)
}

pub fn features_path(cfg: &RunConfig) -> CliResult<&Path> {
    required(&cfg.features, "feature table (paths.features or --input)")
}
