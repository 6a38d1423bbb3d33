//! Feature store: one CSV row per event, feature columns followed by
//! `motor_id`, `mech_type`, `event_file`. An optional leading
//! `# config_digest=<hex>` line records the settings that produced it.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::transient::MechType;

pub const LABEL_COLUMNS: [&str; 3] = ["motor_id", "mech_type", "event_file"];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub motor_id: String,
    pub mech_type: MechType,
    pub event_file: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>) -> Self {
        FeatureTable {
            names,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: FeatureRow) -> Result<()> {
        if row.values.len() != self.names.len() {
            return Err(Error::DimensionMismatch {
                expected: self.names.len(),
                actual: row.values.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    /// Keeps only the rows matching `keep`, preserving order.
    pub fn filtered(&self, keep: impl Fn(&FeatureRow) -> bool) -> FeatureTable {
        FeatureTable {
            names: self.names.clone(),
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    pub fn to_csv(&self, digest: Option<&str>) -> Result<String> {
        let mut out = Vec::new();
        if let Some(d) = digest {
            out.extend_from_slice(format!("# config_digest={d}\n").as_bytes());
        }
        {
            let mut w = csv::Writer::from_writer(&mut out);
            let header: Vec<&str> = self
                .names
                .iter()
                .map(String::as_str)
                .chain(LABEL_COLUMNS)
                .collect();
            w.write_record(&header)?;
            for row in &self.rows {
                let mut rec: Vec<String> = row.values.iter().map(|v| v.to_string()).collect();
                rec.push(row.motor_id.clone());
                rec.push(row.mech_type.to_string());
                rec.push(row.event_file.clone());
                w.write_record(&rec)?;
            }
            w.flush().map_err(|e| Error::io("<feature table>", e))?;
        }
        Ok(String::from_utf8(out).expect("csv output is utf-8"))
    }

    pub fn write(&self, path: &Path, digest: Option<&str>) -> Result<()> {
        fs::write(path, self.to_csv(digest)?).map_err(|e| Error::io(path, e))
    }

    /// Parses a feature table, returning the embedded digest if present.
    pub fn from_csv(text: &str) -> Result<(FeatureTable, Option<String>)> {
        let digest = text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("# config_digest="))
            .map(|d| d.trim().to_string());
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        let n = header.len();
        if n < LABEL_COLUMNS.len() || header.iter().skip(n - 3).ne(LABEL_COLUMNS) {
            return Err(Error::Protocol(format!(
                "feature table must end with columns {}",
                LABEL_COLUMNS.join(",")
            )));
        }
        let names: Vec<String> = header.iter().take(n - 3).map(str::to_string).collect();
        let mut table = FeatureTable::new(names);
        for (k, rec) in reader.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Protocol(format!("feature table row {}: {what}", k + 1));
            let mut values = Vec::with_capacity(n - 3);
            for field in rec.iter().take(n - 3) {
                values.push(
                    field
                        .parse::<f64>()
                        .map_err(|_| bad(&format!("`{field}` is not a number")))?,
                );
            }
            table.rows.push(FeatureRow {
                motor_id: rec[n - 3].to_string(),
                mech_type: rec[n - 2].parse().map_err(|_| bad("unknown mech_type"))?,
                event_file: rec[n - 1].to_string(),
                values,
            });
        }
        Ok((table, digest))
    }

    pub fn read(path: &Path) -> Result<(FeatureTable, Option<String>)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}
