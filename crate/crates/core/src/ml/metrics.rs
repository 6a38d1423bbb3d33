use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `N / (K · n_c)` for each class `c` present in `labels`.
pub fn balanced_weights(labels: &[usize]) -> BTreeMap<usize, f64> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let n = labels.len() as f64;
    let k = counts.len() as f64;
    counts
        .into_iter()
        .map(|(c, m)| (c, n / (k * m as f64)))
        .collect()
}

/// Counts with rows indexed by the true class and columns by the
/// prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_predictions(truth: &[usize], predicted: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                actual: predicted.len(),
            });
        }
        let mut cm = ConfusionMatrix::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(Error::Config(format!(
                    "class index {} out of range",
                    t.max(p)
                )));
            }
            cm.counts[t][p] += 1;
        }
        Ok(cm)
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for (row, o) in self.counts.iter_mut().zip(&other.counts) {
            for (v, w) in row.iter_mut().zip(o) {
                *v += w;
            }
        }
    }

    /// F1 of each class; `None` for classes absent from both the truth and
    /// the predictions.
    pub fn per_class_f1(&self) -> Vec<Option<f64>> {
        let k = self.classes();
        (0..k)
            .map(|c| {
                let tp = self.counts[c][c] as f64;
                let actual: u64 = self.counts[c].iter().sum();
                let predicted: u64 = (0..k).map(|r| self.counts[r][c]).sum();
                if actual == 0 && predicted == 0 {
                    return None;
                }
                let precision = if predicted > 0 {
                    tp / predicted as f64
                } else {
                    0.0
                };
                let recall = if actual > 0 { tp / actual as f64 } else { 0.0 };
                Some(if precision + recall > 0.0 {
                    2.0 * precision * recall / (precision + recall)
                } else {
                    0.0
                })
            })
            .collect()
    }
}

/// Unweighted mean of the per-class F1 scores over the classes that occur
/// in the truth or the predictions.
pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    let scores: Vec<f64> = cm.per_class_f1().into_iter().flatten().collect();
    if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}
