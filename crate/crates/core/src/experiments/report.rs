use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::ExperimentReport;
use crate::error::{Error, Result};
use crate::features::table::FeatureTable;
use crate::ml::ConfusionMatrix;

/// Files written once per report; per-kernel files add
/// `winners_<kernel>.csv`, `scatter_<kernel>.csv` and
/// `confusion_<kernel>.csv`.
pub const REPORT_FILES: [&str; 3] = ["results.csv", "folds.csv", "report.json"];

fn write_csv(
    path: &Path,
    digest: &str,
    header: &[String],
    rows: &[Vec<String>],
) -> Result<PathBuf> {
    let mut out = format!("# config_digest={digest}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Writes the result table, per-kernel winner tables, scatter data along
/// the first two winners, pooled confusion matrices at the final run, the
/// fold log, and the full report as JSON. `table` must contain every event
/// the report evaluated.
pub fn render_report(
    r: &ExperimentReport,
    table: &FeatureTable,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let digest = r.config_digest.as_str();
    let mut written = Vec::new();

    let mut results = Vec::new();
    for kt in &r.kernels {
        for s in &kt.trace.steps {
            results.push(vec![
                kt.kernel.to_string(),
                s.k.to_string(),
                s.feature.clone(),
                s.f1_mean.to_string(),
                s.f1_std.to_string(),
            ]);
        }
    }
    written.push(write_csv(
        &out.join("results.csv"),
        digest,
        &strings(&["kernel", "k", "feature_added", "f1_mean", "f1_std"]),
        &results,
    )?);

    let folds: Vec<Vec<String>> = r
        .fold_motors
        .iter()
        .enumerate()
        .map(|(n, motors)| vec![(n + 1).to_string(), motors.join(" ")])
        .collect();
    written.push(write_csv(
        &out.join("folds.csv"),
        digest,
        &strings(&["fold", "test_motors"]),
        &folds,
    )?);

    let by_file: HashMap<&str, usize> = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| (row.event_file.as_str(), i))
        .collect();
    let event_rows: Vec<usize> = r
        .events
        .iter()
        .map(|e| {
            by_file.get(e.as_str()).copied().ok_or_else(|| {
                Error::Protocol(format!("event {e} is missing from the feature table"))
            })
        })
        .collect::<Result<_>>()?;

    for kt in &r.kernels {
        let kernel = kt.kernel.as_str();
        let steps = &kt.trace.steps;
        let winners: Vec<Vec<String>> = steps
            .iter()
            .map(|s| vec![s.k.to_string(), s.feature.clone(), s.f1_mean.to_string()])
            .collect();
        written.push(write_csv(
            &out.join(format!("winners_{kernel}.csv")),
            digest,
            &strings(&[
                "number_of_features",
                "additional_winning_feature",
                "f1_score",
            ]),
            &winners,
        )?);

        let axes: Vec<&crate::experiments::TraceStep> = steps.iter().take(2).collect();
        let mut header = strings(&["event_file", "motor_id", "mech_type"]);
        header.extend(axes.iter().map(|s| s.feature.clone()));
        let scatter: Vec<Vec<String>> = if axes.is_empty() {
            Vec::new()
        } else {
            event_rows
                .iter()
                .map(|&i| {
                    let row = &table.rows[i];
                    let mut rec = vec![
                        row.event_file.clone(),
                        row.motor_id.clone(),
                        row.mech_type.to_string(),
                    ];
                    rec.extend(axes.iter().map(|s| row.values[s.feature_index].to_string()));
                    rec
                })
                .collect()
        };
        written.push(write_csv(
            &out.join(format!("scatter_{kernel}.csv")),
            digest,
            &header,
            &scatter,
        )?);

        let mut header = vec!["true".to_string()];
        header.extend(r.class_names.iter().cloned());
        let confusion: Vec<Vec<String>> = match steps.last() {
            None => Vec::new(),
            Some(last) => {
                let mut pooled = ConfusionMatrix::new(r.class_names.len());
                for cm in &last.confusions {
                    pooled.add(cm);
                }
                pooled
                    .counts
                    .iter()
                    .zip(&r.class_names)
                    .map(|(row, name)| {
                        std::iter::once(name.clone())
                            .chain(row.iter().map(u64::to_string))
                            .collect()
                    })
                    .collect()
            }
        };
        written.push(write_csv(
            &out.join(format!("confusion_{kernel}.csv")),
            digest,
            &header,
            &confusion,
        )?);
    }

    let json_path = out.join("report.json");
    let json = serde_json::to_string_pretty(r)?;
    fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;
    written.push(json_path);
    Ok(written)
}
