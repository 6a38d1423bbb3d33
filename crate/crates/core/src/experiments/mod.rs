//! The two evaluation protocols: identifying individual motors under
//! stratified k-fold cross-validation, and inferring the mechanical output
//! under leave-one-motor-per-class-out cross-validation. Both wrap greedy
//! forward feature selection.

mod folds;
mod report;
mod selection;

use serde::{Deserialize, Serialize};

pub use folds::{equalize_events, motor_holdout_splits, stratified_kfold, Fold, FoldPlan};
pub use report::{render_report, REPORT_FILES};
pub use selection::{
    greedy_select, CrossValidator, Evaluation, ScalingMode, SelectionTrace, TraceStep,
};

use crate::error::{Error, Result};
use crate::features::table::FeatureTable;
use crate::ml::{Kernel, SvmParams};
use crate::transient::MechType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// One class per motor, stratified k-fold.
    Motors,
    /// One class per mechanical output, unseen motors in every test fold.
    Mech,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Motors => "motors",
            Protocol::Mech => "mech",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "motors" => Ok(Protocol::Motors),
            "mech" => Ok(Protocol::Mech),
            other => Err(Error::Config(format!(
                "unknown protocol `{other}` (motors, mech)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kernels: Vec<Kernel>,
    pub k_max: usize,
    /// Folds of the stratified split.
    pub folds: usize,
    /// Events kept per motor by the mechanical-output protocol.
    pub per_motor: usize,
    pub seed: u64,
    pub svm: SvmParams,
    pub scaling: ScalingMode,
    pub balanced_weights: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kernels: Kernel::ALL.to_vec(),
            k_max: 15,
            folds: 8,
            per_motor: 8,
            seed: 0,
            svm: SvmParams::default(),
            scaling: ScalingMode::FoldLocal,
            balanced_weights: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernels.is_empty() {
            return Err(Error::Config("no kernels selected".into()));
        }
        if self.k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        if self.folds < 2 || self.per_motor == 0 {
            return Err(Error::Config("folds must be ≥ 2 and per_motor ≥ 1".into()));
        }
        self.svm.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTrace {
    pub kernel: Kernel,
    pub trace: SelectionTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub protocol: Protocol,
    pub seed: u64,
    pub config_digest: String,
    pub scaling: ScalingMode,
    pub class_names: Vec<String>,
    /// Events the protocol evaluated, as `event_file` names in table order.
    pub events: Vec<String>,
    pub fold_count: usize,
    /// Test-side motors of each fold.
    pub fold_motors: Vec<Vec<String>>,
    pub feature_names: Vec<String>,
    pub kernels: Vec<KernelTrace>,
}

impl ExperimentReport {
    pub fn trace(&self, kernel: Kernel) -> Option<&SelectionTrace> {
        self.kernels
            .iter()
            .find(|k| k.kernel == kernel)
            .map(|k| &k.trace)
    }
}

fn fold_motors(table: &FeatureTable, plan: &FoldPlan) -> Vec<Vec<String>> {
    plan.folds
        .iter()
        .map(|f| {
            let mut m: Vec<String> = f
                .test
                .iter()
                .map(|&i| table.rows[i].motor_id.clone())
                .collect();
            m.dedup();
            m
        })
        .collect()
}

fn run(
    protocol: Protocol,
    table: &FeatureTable,
    labels: Vec<usize>,
    class_names: Vec<String>,
    plan: FoldPlan,
    cfg: &ExperimentConfig,
    digest: &str,
) -> Result<ExperimentReport> {
    let rows: Vec<Vec<f64>> = table.rows.iter().map(|r| r.values.clone()).collect();
    let mut kernels = Vec::with_capacity(cfg.kernels.len());
    for &kernel in &cfg.kernels {
        let params = SvmParams { kernel, ..cfg.svm };
        let cv = CrossValidator::new(
            &rows,
            &labels,
            &plan,
            params,
            cfg.scaling,
            cfg.balanced_weights,
        )?;
        log::info!(
            "{} protocol, {kernel} kernel, {} folds",
            protocol.as_str(),
            cv.fold_count()
        );
        kernels.push(KernelTrace {
            kernel,
            trace: greedy_select(&cv, &table.names, cfg.k_max)?,
        });
    }
    Ok(ExperimentReport {
        protocol,
        seed: cfg.seed,
        config_digest: digest.to_string(),
        scaling: cfg.scaling,
        class_names,
        events: table.rows.iter().map(|r| r.event_file.clone()).collect(),
        fold_count: plan.len(),
        fold_motors: fold_motors(table, &plan),
        feature_names: table.names.clone(),
        kernels,
    })
}

/// Motor identification: every motor is a class.
pub fn run_motor_experiment(
    table: &FeatureTable,
    cfg: &ExperimentConfig,
    digest: &str,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut class_names: Vec<String> = table.rows.iter().map(|r| r.motor_id.clone()).collect();
    class_names.sort();
    class_names.dedup();
    if class_names.len() < 2 {
        return Err(Error::Protocol(format!(
            "{} motor(s) in the table, at least 2 needed",
            class_names.len()
        )));
    }
    let labels: Vec<usize> = table
        .rows
        .iter()
        .map(|r| {
            class_names
                .binary_search(&r.motor_id)
                .expect("motor listed")
        })
        .collect();
    let ids: Vec<&str> = table.rows.iter().map(|r| r.motor_id.as_str()).collect();
    let plan =
        stratified_kfold(&ids, cfg.folds, cfg.seed).map_err(|e| Error::Protocol(e.to_string()))?;
    run(
        Protocol::Motors,
        table,
        labels,
        class_names,
        plan,
        cfg,
        digest,
    )
}

pub const MECH_CLASSES: [MechType; 3] = [MechType::Pump, MechType::Compressor, MechType::Fan];

/// Mechanical-output inference on motors of type pump, compressor and fan,
/// each reduced to its first `per_motor` events.
pub fn run_mech_experiment(
    table: &FeatureTable,
    cfg: &ExperimentConfig,
    digest: &str,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let typed = table.filtered(|r| r.mech_type != MechType::Other);
    let equal =
        equalize_events(&typed, cfg.per_motor).map_err(|e| Error::Protocol(e.to_string()))?;
    let ids: Vec<&str> = equal.rows.iter().map(|r| r.motor_id.as_str()).collect();
    let mech: Vec<MechType> = equal.rows.iter().map(|r| r.mech_type).collect();
    let plan = motor_holdout_splits(&ids, &mech)?;
    let labels: Vec<usize> = mech
        .iter()
        .map(|m| {
            MECH_CLASSES
                .iter()
                .position(|c| c == m)
                .expect("typed rows")
        })
        .collect();
    let names = MECH_CLASSES.iter().map(|m| m.to_string()).collect();
    run(Protocol::Mech, &equal, labels, names, plan, cfg, digest)
}

pub fn run_experiment(
    protocol: Protocol,
    table: &FeatureTable,
    cfg: &ExperimentConfig,
    digest: &str,
) -> Result<ExperimentReport> {
    match protocol {
        Protocol::Motors => run_motor_experiment(table, cfg, digest),
        Protocol::Mech => run_mech_experiment(table, cfg, digest),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::table::FeatureRow;

    fn toy_table(
        motors: &[(&str, MechType, usize)],
        signal: impl Fn(usize, MechType, usize) -> Vec<f64>,
    ) -> FeatureTable {
        let mut t = FeatureTable::new((0..4).map(|i| format!("f{i}")).collect());
        for (m, &(id, mech, n)) in motors.iter().enumerate() {
            for k in 0..n {
                t.rows.push(FeatureRow {
                    motor_id: id.into(),
                    mech_type: mech,
                    event_file: format!("{id}/event_{k:03}.csv"),
                    values: signal(m, mech, k),
                });
            }
        }
        t
    }

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            kernels: vec![Kernel::Linear],
            k_max: 2,
            folds: 4,
            per_motor: 4,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn motor_protocol_on_separable_toy() {
        let t = toy_table(
            &[
                ("a", MechType::Pump, 8),
                ("b", MechType::Fan, 8),
                ("c", MechType::Fan, 9),
            ],
            |m, _, k| vec![m as f64 + 0.01 * k as f64, k as f64, 0.0, (k % 3) as f64],
        );
        let r = run_motor_experiment(&t, &small_cfg(), "d").unwrap();
        assert_eq!(r.fold_count, 4);
        let trace = r.trace(Kernel::Linear).unwrap();
        assert_eq!(trace.steps[0].feature, "f0");
        assert_eq!(trace.steps[0].f1_mean, 1.0);
        // Σ folds × candidates over two runs
        assert_eq!(trace.trainings, 4 * (4 + 3));
    }

    #[test]
    fn identical_rows_score_near_chance() {
        let t = toy_table(
            &[
                ("a", MechType::Pump, 8),
                ("b", MechType::Fan, 8),
                ("c", MechType::Fan, 8),
            ],
            |_, _, _| vec![1.0, 2.0, 3.0, 4.0],
        );
        let r = run_motor_experiment(&t, &small_cfg(), "d").unwrap();
        let f1 = r.trace(Kernel::Linear).unwrap().steps[0].f1_mean;
        assert!(f1 <= 0.5, "{f1}");
    }

    #[test]
    fn mech_protocol_holds_out_motors() {
        let roster = [
            ("p1", MechType::Pump, 5),
            ("p2", MechType::Pump, 6),
            ("c1", MechType::Compressor, 4),
            ("c2", MechType::Compressor, 7),
            ("f1", MechType::Fan, 4),
            ("f2", MechType::Fan, 5),
            ("o1", MechType::Other, 2),
        ];
        let t = toy_table(&roster, |m, mech, k| {
            vec![mech as usize as f64, m as f64, k as f64, 0.5]
        });
        let cfg = ExperimentConfig {
            svm: SvmParams {
                c: 100.0,
                ..SvmParams::default()
            },
            ..small_cfg()
        };
        let r = run_mech_experiment(&t, &cfg, "d").unwrap();
        assert_eq!(r.fold_count, 8);
        assert_eq!(r.events.len(), 24);
        for motors in &r.fold_motors {
            assert_eq!(motors.len(), 3);
        }
        let trace = r.trace(Kernel::Linear).unwrap();
        assert_eq!(trace.steps[0].feature, "f0");
        assert_eq!(trace.steps[0].f1_mean, 1.0);
    }

    #[test]
    fn protocol_errors() {
        let t = toy_table(&[("a", MechType::Pump, 8)], |_, _, _| vec![0.0; 4]);
        assert!(matches!(
            run_motor_experiment(&t, &small_cfg(), "d"),
            Err(Error::Protocol(_))
        ));
        let t = toy_table(
            &[("a", MechType::Pump, 8), ("b", MechType::Fan, 3)],
            |_, _, _| vec![0.0; 4],
        );
        assert!(matches!(
            run_motor_experiment(&t, &small_cfg(), "d"),
            Err(Error::Protocol(_))
        ));
        assert!(matches!(
            run_mech_experiment(&t, &small_cfg(), "d"),
            Err(Error::Protocol(_))
        ));
    }
}
