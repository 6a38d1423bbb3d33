//! Soft-margin SVMs trained by sequential minimal optimization, combined
//! one-vs-one for multi-class problems.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    /// `(γ·x·y + coef0)³`
    Poly3,
    /// `exp(−γ·|x − y|²)`
    Rbf,
}

impl Kernel {
    pub const ALL: [Kernel; 3] = [Kernel::Linear, Kernel::Poly3, Kernel::Rbf];

    pub fn as_str(self) -> &'static str {
        match self {
            Kernel::Linear => "linear",
            Kernel::Poly3 => "poly3",
            Kernel::Rbf => "rbf",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Kernel::Linear),
            "poly3" => Ok(Kernel::Poly3),
            "rbf" => Ok(Kernel::Rbf),
            other => Err(Error::Config(format!(
                "unknown kernel `{other}` (linear, poly3, rbf)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c: f64,
    /// Kernel scale; `None` means `1 / n_features`.
    pub gamma: Option<f64>,
    pub coef0: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            kernel: Kernel::Linear,
            c: 1.0,
            gamma: None,
            coef0: 0.0,
            tolerance: 1e-3,
            max_iterations: 100_000,
        }
    }
}

impl SvmParams {
    pub fn with_kernel(kernel: Kernel) -> Self {
        SvmParams {
            kernel,
            ..SvmParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::Config(format!(
                "svm C must be positive, got {}",
                self.c
            )));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                return Err(Error::Config(format!(
                    "svm gamma must be positive, got {g}"
                )));
            }
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::Config(
                "svm tolerance and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Evaluates a kernel with resolved hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelFn {
    pub kernel: Kernel,
    pub gamma: f64,
    pub coef0: f64,
}

impl KernelFn {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.kernel {
            Kernel::Linear => dot(x, y),
            Kernel::Poly3 => (self.gamma * dot(x, y) + self.coef0).powi(3),
            Kernel::Rbf => {
                let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-self.gamma * d).exp()
            }
        }
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// One binary machine separating `classes[first]` (+1) from
/// `classes[second]` (−1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub first: usize,
    pub second: usize,
    /// Indices into [`SvmModel::support_vectors`].
    pub support: Vec<usize>,
    /// `αᵢ·yᵢ` for each support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub gamma: f64,
    pub coef0: f64,
    pub n_features: usize,
    /// Sorted class labels.
    pub classes: Vec<usize>,
    /// Penalty multiplier of each class, aligned with `classes`.
    pub class_weights: Vec<f64>,
    pub support_vectors: Vec<Vec<f64>>,
    /// Pairs in order (0,1), (0,2), …, (1,2), … over class positions.
    pub pairs: Vec<PairModel>,
}

struct BinaryProblem<'a> {
    kernel: &'a [Vec<f64>],
    idx: &'a [usize],
    y: Vec<f64>,
    c: Vec<f64>,
}

struct BinarySolution {
    alpha: Vec<f64>,
    rho: f64,
}

const TAU: f64 = 1e-12;

fn solve_binary(p: &BinaryProblem, tolerance: f64, max_iterations: usize) -> BinarySolution {
    let l = p.idx.len();
    let k = |a: usize, b: usize| p.kernel[p.idx[a]][p.idx[b]];
    let y = &p.y;
    let mut alpha = vec![0.0; l];
    let mut grad = vec![-1.0; l];
    let upper = |alpha: &[f64], t: usize| alpha[t] >= p.c[t];
    let lower = |alpha: &[f64], t: usize| alpha[t] <= 0.0;

    let mut iter = 0;
    loop {
        // second-order working set selection
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..l {
            let up = if y[t] > 0.0 {
                !upper(&alpha, t)
            } else {
                !lower(&alpha, t)
            };
            if up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            break;
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..l {
            let low = if y[t] > 0.0 {
                !lower(&alpha, t)
            } else {
                !upper(&alpha, t)
            };
            if !low {
                continue;
            }
            let v = y[t] * grad[t];
            gmax2 = gmax2.max(v);
            let diff = gmax + v;
            if diff > 0.0 {
                let quad = k(i, i) + k(t, t) - 2.0 * k(i, t);
                let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < tolerance || j == usize::MAX {
            break;
        }
        if iter >= max_iterations {
            log::warn!("svm solver stopped at the iteration cap of {max_iterations}");
            break;
        }
        iter += 1;

        let (ci, cj) = (p.c[i], p.c[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
        let quad = if quad > 0.0 { quad } else { TAU };
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..l {
            grad[t] += y[t] * (y[i] * k(i, t) * di + y[j] * k(j, t) * dj);
        }
    }

    // bias from the free vectors, else the midpoint of the feasible range
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..l {
        let yg = y[t] * grad[t];
        if upper(&alpha, t) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(&alpha, t) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    };
    BinarySolution { alpha, rho }
}

/// Full kernel matrix of `rows`.
pub fn kernel_matrix(rows: &[Vec<f64>], kf: &KernelFn) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut m = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a..n {
            let v = kf.eval(&rows[a], &rows[b]);
            m[a][b] = v;
            m[b][a] = v;
        }
    }
    m
}

/// Trains one binary machine per class pair. `weights` multiplies the
/// penalty `C` per class; missing classes (or `None`) use 1.
pub fn svm_train(
    rows: &[Vec<f64>],
    labels: &[usize],
    params: &SvmParams,
    weights: Option<&BTreeMap<usize, f64>>,
) -> Result<SvmModel> {
    params.validate()?;
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            actual: labels.len(),
        });
    }
    let n_features = rows.first().map_or(0, Vec::len);
    if let Some(r) = rows.iter().find(|r| r.len() != n_features) {
        return Err(Error::DimensionMismatch {
            expected: n_features,
            actual: r.len(),
        });
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass(classes.len()));
    }
    let gamma = params.gamma.unwrap_or(1.0 / n_features.max(1) as f64);
    let kf = KernelFn {
        kernel: params.kernel,
        gamma,
        coef0: params.coef0,
    };
    let class_weights: Vec<f64> = classes
        .iter()
        .map(|c| weights.and_then(|w| w.get(c)).copied().unwrap_or(1.0))
        .collect();
    let kernel = kernel_matrix(rows, &kf);
    let members: Vec<Vec<usize>> = classes
        .iter()
        .map(|c| (0..labels.len()).filter(|&t| labels[t] == *c).collect())
        .collect();

    let mut pairs = Vec::new();
    let mut sv_of_row: BTreeMap<usize, usize> = BTreeMap::new();
    let mut pair_support: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    for a in 0..classes.len() {
        for b in a + 1..classes.len() {
            let idx: Vec<usize> = members[a].iter().chain(&members[b]).copied().collect();
            let na = members[a].len();
            let y: Vec<f64> = (0..idx.len())
                .map(|t| if t < na { 1.0 } else { -1.0 })
                .collect();
            let c: Vec<f64> = (0..idx.len())
                .map(|t| {
                    params.c
                        * if t < na {
                            class_weights[a]
                        } else {
                            class_weights[b]
                        }
                })
                .collect();
            let sol = solve_binary(
                &BinaryProblem {
                    kernel: &kernel,
                    idx: &idx,
                    y: y.clone(),
                    c,
                },
                params.tolerance,
                params.max_iterations,
            );
            let mut rows_used = Vec::new();
            let mut coef = Vec::new();
            for (t, &al) in sol.alpha.iter().enumerate() {
                if al > 0.0 {
                    rows_used.push(idx[t]);
                    coef.push(al * y[t]);
                    sv_of_row.entry(idx[t]).or_insert(0);
                }
            }
            pair_support.push((rows_used, coef));
            pairs.push(PairModel {
                first: a,
                second: b,
                support: Vec::new(),
                coef: Vec::new(),
                rho: sol.rho,
            });
        }
    }
    // number support vectors by training row order
    for (n, v) in sv_of_row.values_mut().enumerate() {
        *v = n;
    }
    let support_vectors: Vec<Vec<f64>> = sv_of_row.keys().map(|&r| rows[r].clone()).collect();
    for (pair, (rows_used, coef)) in pairs.iter_mut().zip(pair_support) {
        pair.support = rows_used.iter().map(|r| sv_of_row[r]).collect();
        pair.coef = coef;
    }
    Ok(SvmModel {
        kernel: params.kernel,
        c: params.c,
        gamma,
        coef0: params.coef0,
        n_features,
        classes,
        class_weights,
        support_vectors,
        pairs,
    })
}

impl SvmModel {
    pub fn kernel_fn(&self) -> KernelFn {
        KernelFn {
            kernel: self.kernel,
            gamma: self.gamma,
            coef0: self.coef0,
        }
    }

    /// Decision value of every pair machine, in pair order. Positive values
    /// favour the pair's first class.
    pub fn decision_values(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: row.len(),
            });
        }
        let kf = self.kernel_fn();
        let kv: Vec<f64> = self
            .support_vectors
            .iter()
            .map(|sv| kf.eval(sv, row))
            .collect();
        Ok(self
            .pairs
            .iter()
            .map(|p| {
                p.support
                    .iter()
                    .zip(&p.coef)
                    .map(|(&s, c)| c * kv[s])
                    .sum::<f64>()
                    - p.rho
            })
            .collect())
    }

    /// Pairwise vote; ties go to the lowest class.
    pub fn vote(&self, decisions: &[f64]) -> usize {
        let mut votes = vec![0usize; self.classes.len()];
        for (p, d) in self.pairs.iter().zip(decisions) {
            votes[if *d > 0.0 { p.first } else { p.second }] += 1;
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        self.classes[best]
    }

    pub fn predict_one(&self, row: &[f64]) -> Result<usize> {
        Ok(self.vote(&self.decision_values(row)?))
    }
}

pub fn svm_predict(m: &SvmModel, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
    rows.iter().map(|r| m.predict_one(r)).collect()
}
