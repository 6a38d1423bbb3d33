//! Versioned text format for a trained classifier: hyperparameters, scaler
//! bounds, the selected feature names and every pair machine.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::scaler::ScalerBounds;
use super::svm::{PairModel, SvmModel};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A model together with everything needed to apply it to raw features.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub model: SvmModel,
    pub scaler: ScalerBounds,
    pub features: Vec<String>,
    /// Name of each class label, indexed by label.
    pub class_names: Vec<String>,
}

impl Classifier {
    /// Predicts the class name of one unscaled row holding `features` in
    /// order.
    pub fn predict_raw(&self, row: &[f64]) -> Result<&str> {
        let label = self.model.predict_one(&self.scaler.transform(row)?)?;
        Ok(&self.class_names[label])
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn format_model(c: &Classifier) -> String {
    let m = &c.model;
    let mut out = String::new();
    let _ = writeln!(out, "# motorid classifier");
    let _ = writeln!(out, "version = {MODEL_FORMAT_VERSION}");
    let _ = writeln!(out, "kernel = {}", m.kernel);
    let _ = writeln!(out, "c = {}", m.c);
    let _ = writeln!(out, "gamma = {}", m.gamma);
    let _ = writeln!(out, "coef0 = {}", m.coef0);
    let _ = writeln!(out, "n_features = {}", m.n_features);
    let _ = writeln!(out, "features = {}", c.features.join(" "));
    let _ = writeln!(out, "class_names = {}", c.class_names.join(" "));
    let _ = writeln!(out, "classes = {}", join(&m.classes));
    let _ = writeln!(out, "class_weights = {}", join(&m.class_weights));
    let _ = writeln!(out, "scaler_min = {}", join(&c.scaler.min));
    let _ = writeln!(out, "scaler_max = {}", join(&c.scaler.max));
    for sv in &m.support_vectors {
        let _ = writeln!(out, "sv = {}", join(sv));
    }
    for p in &m.pairs {
        let _ = writeln!(out, "pair = {} {} {}", p.first, p.second, p.rho);
        let _ = writeln!(out, "pair_support = {}", join(&p.support));
        let _ = writeln!(out, "pair_coef = {}", join(&p.coef));
    }
    out
}

fn parse_list<T: std::str::FromStr>(value: &str, key: &str) -> Result<Vec<T>> {
    value
        .split_whitespace()
        .map(|v| {
            v.parse()
                .map_err(|_| Error::Model(format!("bad value `{v}` for `{key}`")))
        })
        .collect()
}

fn parse_one<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Model(format!("bad value `{value}` for `{key}`")))
}

pub fn parse_model(text: &str) -> Result<Classifier> {
    let mut get = std::collections::BTreeMap::new();
    let mut svs = Vec::new();
    let mut pairs: Vec<PairModel> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::Model(format!("expected `key = value`, got `{line}`")))?;
        match key {
            "sv" => svs.push(parse_list::<f64>(value, key)?),
            "pair" => {
                let parts: Vec<&str> = value.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(Error::Model(format!("pair line needs 3 fields: `{value}`")));
                }
                pairs.push(PairModel {
                    first: parse_one(parts[0], key)?,
                    second: parse_one(parts[1], key)?,
                    rho: parse_one(parts[2], key)?,
                    support: Vec::new(),
                    coef: Vec::new(),
                });
            }
            "pair_support" | "pair_coef" => {
                let p = pairs
                    .last_mut()
                    .ok_or_else(|| Error::Model(format!("`{key}` before any pair")))?;
                if key == "pair_support" {
                    p.support = parse_list(value, key)?;
                } else {
                    p.coef = parse_list(value, key)?;
                }
            }
            _ => {
                get.insert(key.to_string(), value.to_string());
            }
        }
    }
    let field = |k: &str| {
        get.get(k)
            .cloned()
            .ok_or_else(|| Error::Model(format!("missing `{k}`")))
    };
    let version: u32 = parse_one(&field("version")?, "version")?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::Model(format!("unsupported model version {version}")));
    }
    let model = SvmModel {
        kernel: field("kernel")?.parse()?,
        c: parse_one(&field("c")?, "c")?,
        gamma: parse_one(&field("gamma")?, "gamma")?,
        coef0: parse_one(&field("coef0")?, "coef0")?,
        n_features: parse_one(&field("n_features")?, "n_features")?,
        classes: parse_list(&field("classes")?, "classes")?,
        class_weights: parse_list(&field("class_weights")?, "class_weights")?,
        support_vectors: svs,
        pairs,
    };
    let c = Classifier {
        scaler: ScalerBounds {
            min: parse_list(&field("scaler_min")?, "scaler_min")?,
            max: parse_list(&field("scaler_max")?, "scaler_max")?,
        },
        features: field("features")?
            .split_whitespace()
            .map(str::to_string)
            .collect(),
        class_names: field("class_names")?
            .split_whitespace()
            .map(str::to_string)
            .collect(),
        model,
    };
    let k = c.model.classes.len();
    let consistent = c.features.len() == c.model.n_features
        && c.scaler.dim() == c.model.n_features
        && c.model.class_weights.len() == k
        && c.model.pairs.len() == k * k.saturating_sub(1) / 2
        && c.model
            .support_vectors
            .iter()
            .all(|s| s.len() == c.model.n_features)
        && c.model.pairs.iter().all(|p| {
            p.support.len() == p.coef.len()
                && p.first < k
                && p.second < k
                && p.support.iter().all(|&s| s < c.model.support_vectors.len())
        })
        && c.model.classes.iter().all(|&l| l < c.class_names.len());
    if !consistent {
        return Err(Error::Model("inconsistent dimensions".into()));
    }
    Ok(c)
}

pub fn write_model(path: &Path, c: &Classifier) -> Result<()> {
    fs::write(path, format_model(c)).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<Classifier> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}
