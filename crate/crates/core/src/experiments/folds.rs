use std::collections::BTreeMap;
use std::fmt::Display;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::table::FeatureTable;
use crate::transient::MechType;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    pub strategy: String,
    pub seed: u64,
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }
}

fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut in_test = vec![false; n];
    for &t in test {
        in_test[t] = true;
    }
    (0..n).filter(|&i| !in_test[i]).collect()
}

/// Stratified `k`-fold split. Members of each class are shuffled by the
/// seed, then dealt to the folds in turn with one counter running across
/// all classes, so fold sizes differ by at most one as well.
pub fn stratified_kfold<L: Ord + Clone + Display>(
    labels: &[L],
    k: usize,
    seed: u64,
) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("k-fold needs k ≥ 2, got {k}")));
    }
    let mut classes: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        classes.entry(l.clone()).or_default().push(i);
    }
    if let Some((class, members)) = classes.iter().find(|(_, m)| m.len() < k) {
        return Err(Error::ClassTooSmall {
            class: class.to_string(),
            count: members.len(),
            required: k,
        });
    }
    let mut tests = vec![Vec::new(); k];
    let mut counter = 0usize;
    for (c, members) in classes.values().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for idx in shuffled {
            tests[counter % k].push(idx);
            counter += 1;
        }
    }
    let folds = tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            Fold {
                train: complement(labels.len(), &test),
                test,
            }
        })
        .collect();
    Ok(FoldPlan {
        folds,
        strategy: format!("stratified_{k}_fold"),
        seed,
    })
}

/// One fold per (pump, compressor, fan) motor triple: the test side holds
/// every event of the three motors.
pub fn motor_holdout_splits(motors: &[&str], mech: &[MechType]) -> Result<FoldPlan> {
    if motors.len() != mech.len() {
        return Err(Error::DimensionMismatch {
            expected: motors.len(),
            actual: mech.len(),
        });
    }
    let mut by_type: BTreeMap<MechType, BTreeMap<&str, Vec<usize>>> = BTreeMap::new();
    for (i, (&m, &t)) in motors.iter().zip(mech).enumerate() {
        if t == MechType::Other {
            return Err(Error::Protocol(format!(
                "motor {m} has mechanical output `other`; only pump, compressor and fan are allowed"
            )));
        }
        by_type.entry(t).or_default().entry(m).or_default().push(i);
    }
    let group = |t: MechType| -> Result<Vec<&Vec<usize>>> {
        let g: Vec<&Vec<usize>> = by_type
            .get(&t)
            .map(|m| m.values().collect())
            .unwrap_or_default();
        if g.is_empty() {
            return Err(Error::Protocol(format!("no {t} motors")));
        }
        Ok(g)
    };
    let (pumps, compressors, fans) = (
        group(MechType::Pump)?,
        group(MechType::Compressor)?,
        group(MechType::Fan)?,
    );
    let mut folds = Vec::with_capacity(pumps.len() * compressors.len() * fans.len());
    for p in &pumps {
        for c in &compressors {
            for f in &fans {
                let mut test: Vec<usize> =
                    p.iter().chain(c.iter()).chain(f.iter()).copied().collect();
                test.sort_unstable();
                folds.push(Fold {
                    train: complement(motors.len(), &test),
                    test,
                });
            }
        }
    }
    Ok(FoldPlan {
        folds,
        strategy: "motor_holdout".into(),
        seed: 0,
    })
}

/// Keeps the first `per_motor` rows of every motor, in table order (which
/// is chronological within a motor).
pub fn equalize_events(table: &FeatureTable, per_motor: usize) -> Result<FeatureTable> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &table.rows {
        *counts.entry(r.motor_id.as_str()).or_default() += 1;
    }
    if let Some((motor, &count)) = counts.iter().find(|(_, &c)| c < per_motor) {
        return Err(Error::MotorTooSmall {
            motor: motor.to_string(),
            count,
            required: per_motor,
        });
    }
    let mut kept: BTreeMap<String, usize> = BTreeMap::new();
    let mut out = FeatureTable::new(table.names.clone());
    for r in &table.rows {
        let n = kept.entry(r.motor_id.clone()).or_default();
        if *n < per_motor {
            *n += 1;
            out.rows.push(r.clone());
        }
    }
    Ok(out)
}
