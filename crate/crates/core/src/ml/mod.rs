//! Min-max scaling, class-weighted one-vs-one SVMs and classification
//! metrics.

mod metrics;
mod model_file;
mod scaler;
mod svm;

pub use metrics::{balanced_weights, macro_f1, ConfusionMatrix};
pub use model_file::{
    format_model, parse_model, read_model, write_model, Classifier, MODEL_FORMAT_VERSION,
};
pub use scaler::{apply_scaler, fit_scaler, ScalerBounds};
pub use svm::{
    kernel_matrix, svm_predict, svm_train, Kernel, KernelFn, PairModel, SvmModel, SvmParams,
};

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn positive_affine_rescaling_keeps_predictions(
            rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 12..30),
            a in prop::collection::vec(0.1f64..50.0, 3),
            b in prop::collection::vec(-100.0f64..100.0, 3),
        ) {
            let labels: Vec<usize> = rows.iter().map(|r| usize::from(r[0] + 0.5 * r[1] > 0.0) + usize::from(r[2] > 5.0)).collect();
            prop_assume!(labels.iter().any(|l| *l != labels[0]));
            let moved: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&a).zip(&b).map(|((x, s), o)| s * x + o).collect()).collect();
            let predict = |data: &[Vec<f64>]| {
                let s = fit_scaler(data).unwrap();
                let x = apply_scaler(&s, data).unwrap();
                let m = svm_train(&x, &labels, &SvmParams::default(), Some(&balanced_weights(&labels))).unwrap();
                svm_predict(&m, &x).unwrap()
            };
            prop_assert_eq!(predict(&rows), predict(&moved));
        }
    }
}
