use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::FoldPlan;
use crate::error::{Error, Result};
use crate::ml::{
    apply_scaler, balanced_weights, fit_scaler, macro_f1, svm_predict, svm_train, ConfusionMatrix,
    SvmParams,
};

/// Where the min-max scaler is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// On the training side of each fold.
    FoldLocal,
    /// Once on every evaluated event, test sides included.
    Global,
}

impl std::str::FromStr for ScalingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fold_local" => Ok(ScalingMode::FoldLocal),
            "global" => Ok(ScalingMode::Global),
            other => Err(Error::Config(format!(
                "unknown scaling mode `{other}` (fold_local, global)"
            ))),
        }
    }
}

struct PreparedFold {
    train: Vec<Vec<f64>>,
    train_labels: Vec<usize>,
    test: Vec<Vec<f64>>,
    test_labels: Vec<usize>,
    weights: Option<BTreeMap<usize, f64>>,
}

/// Scaled fold data shared by every candidate evaluation of one
/// experiment.
pub struct CrossValidator {
    folds: Vec<PreparedFold>,
    classes: usize,
    params: SvmParams,
}

/// Cross-validated score of one feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub f1_mean: f64,
    pub f1_std: f64,
    pub fold_f1: Vec<f64>,
    pub confusions: Vec<ConfusionMatrix>,
}

impl CrossValidator {
    /// Scales `rows` per `scaling` for each fold of `plan`. `balanced`
    /// switches on per-fold balanced class weights.
    pub fn new(
        rows: &[Vec<f64>],
        labels: &[usize],
        plan: &FoldPlan,
        params: SvmParams,
        scaling: ScalingMode,
        balanced: bool,
    ) -> Result<Self> {
        params.validate()?;
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                actual: labels.len(),
            });
        }
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        let global = match scaling {
            ScalingMode::Global => Some(fit_scaler(rows)?),
            ScalingMode::FoldLocal => None,
        };
        let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
            (
                idx.iter().map(|&i| rows[i].clone()).collect(),
                idx.iter().map(|&i| labels[i]).collect(),
            )
        };
        let folds = plan
            .folds
            .iter()
            .map(|f| {
                if f.train.is_empty() || f.test.is_empty() {
                    return Err(Error::Protocol("fold with an empty side".into()));
                }
                let (train, train_labels) = pick(&f.train);
                let (test, test_labels) = pick(&f.test);
                let scaler = match &global {
                    Some(s) => s.clone(),
                    None => fit_scaler(&train)?,
                };
                Ok(PreparedFold {
                    train: apply_scaler(&scaler, &train)?,
                    weights: balanced.then(|| balanced_weights(&train_labels)),
                    train_labels,
                    test: apply_scaler(&scaler, &test)?,
                    test_labels,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CrossValidator {
            folds,
            classes,
            params,
        })
    }

    pub fn fold_count(&self) -> usize {
        self.folds.len()
    }

    /// Trains and tests every fold on the feature columns `features`.
    pub fn evaluate(&self, features: &[usize]) -> Result<Evaluation> {
        let select = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| features.iter().map(|&c| r[c]).collect())
                .collect()
        };
        let mut fold_f1 = Vec::with_capacity(self.folds.len());
        let mut confusions = Vec::with_capacity(self.folds.len());
        for f in &self.folds {
            let model = svm_train(
                &select(&f.train),
                &f.train_labels,
                &self.params,
                f.weights.as_ref(),
            )?;
            let predicted = svm_predict(&model, &select(&f.test))?;
            let cm = ConfusionMatrix::from_predictions(&f.test_labels, &predicted, self.classes)?;
            fold_f1.push(macro_f1(&cm));
            confusions.push(cm);
        }
        let n = fold_f1.len() as f64;
        let f1_mean = fold_f1.iter().sum::<f64>() / n;
        let f1_std = (fold_f1.iter().map(|v| (v - f1_mean).powi(2)).sum::<f64>() / n).sqrt();
        Ok(Evaluation {
            f1_mean,
            f1_std,
            fold_f1,
            confusions,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Number of selected features after this run.
    pub k: usize,
    pub feature: String,
    pub feature_index: usize,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub fold_f1: Vec<f64>,
    pub confusions: Vec<ConfusionMatrix>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub steps: Vec<TraceStep>,
    /// Classifier trainings performed (candidates × folds, summed over runs).
    pub trainings: u64,
}

impl SelectionTrace {
    pub fn winners(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.feature_index).collect()
    }

    pub fn f1_at(&self, k: usize) -> Option<f64> {
        self.steps.get(k.checked_sub(1)?).map(|s| s.f1_mean)
    }
}

/// Greedy forward selection: each run adds the candidate whose addition
/// scores the highest mean macro-F1; ties keep the lowest feature index.
pub fn greedy_select(
    cv: &CrossValidator,
    names: &[String],
    k_max: usize,
) -> Result<SelectionTrace> {
    let mut trace = SelectionTrace::default();
    let mut selected: Vec<usize> = Vec::new();
    for k in 1..=k_max.min(names.len()) {
        let candidates: Vec<usize> = (0..names.len()).filter(|c| !selected.contains(c)).collect();
        let scored: Vec<Evaluation> = candidates
            .par_iter()
            .map(|&c| {
                let mut set = selected.clone();
                set.push(c);
                cv.evaluate(&set)
            })
            .collect::<Result<_>>()?;
        trace.trainings += (candidates.len() * cv.fold_count()) as u64;
        let mut best = 0;
        for (n, e) in scored.iter().enumerate() {
            if e.f1_mean > scored[best].f1_mean {
                best = n;
            }
        }
        let winner = candidates[best];
        let eval = scored.into_iter().nth(best).expect("candidate exists");
        log::info!("run {k}: {} f1 {:.4}", names[winner], eval.f1_mean);
        selected.push(winner);
        trace.steps.push(TraceStep {
            k,
            feature: names[winner].clone(),
            feature_index: winner,
            f1_mean: eval.f1_mean,
            f1_std: eval.f1_std,
            fold_f1: eval.fold_f1,
            confusions: eval.confusions,
        });
    }
    Ok(trace)
}
