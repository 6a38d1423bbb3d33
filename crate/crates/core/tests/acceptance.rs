//! End-to-end acceptance suite. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL line. Pass criterion
//! numbers as arguments to run a subset.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use motorid::experiments::{
    equalize_events, motor_holdout_splits, render_report, run_mech_experiment,
    run_motor_experiment, stratified_kfold, ExperimentConfig, ExperimentReport,
};
use motorid::features::table::{FeatureRow, FeatureTable};
use motorid::features::{
    extract_all, feature_categories, feature_names, fit_exponential, fit_linear, harmonic_features,
    harmonic_magnitudes, FeatureCategory, PeakSeries,
};
use motorid::ml::{macro_f1, ConfusionMatrix, Kernel};
use motorid::synth::oracle::naive_dft;
use motorid::synth::{
    generate_corpus, reference_roster, synthesize_features, RosterOptions, SignatureMode,
    SynthConfig, REFERENCE_MOTORS,
};
use motorid::transient::{
    detect_turn_on, preprocess_event, TurnOnEvent, POINTS_PER_PERIOD, RETAINED_PERIODS,
};
use motorid::{config_digest, DetectionConfig, MechType, Waveform};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn sine(phase: f64) -> f64 {
    (2.0 * PI * phase).sin()
}

/// A 50 Hz event built directly from per-period closures of phase.
fn periodic_event(current: impl Fn(f64) -> f64) -> TurnOnEvent {
    let bounds: Vec<f64> = (0..=RETAINED_PERIODS)
        .map(|k| 0.02 * (k + 1) as f64)
        .collect();
    let period: Vec<f64> = (0..POINTS_PER_PERIOD)
        .map(|m| current(m as f64 / POINTS_PER_PERIOD as f64))
        .collect();
    let periods = vec![period.clone(); RETAINED_PERIODS];
    TurnOnEvent::from_periods(periods.clone(), periods, bounds)
}

fn feature_catalog() -> Outcome {
    let e = periodic_event(|ph| sine(ph) + 0.1 * sine(3.0 * ph));
    let fv = extract_all(&e);
    let mut counts: Vec<(FeatureCategory, usize)> = Vec::new();
    for &c in feature_categories() {
        match counts.last_mut() {
            Some((last, n)) if *last == c => *n += 1,
            _ => counts.push((c, 1)),
        }
    }
    let sizes: Vec<usize> = counts.iter().map(|(_, n)| *n).collect();
    let want = [4, 4, 20, 10, 10, 100, 5, 10, 10];
    let pass = fv.values.len() == 173 && feature_names().len() == 173 && sizes == want;
    outcome(
        pass,
        format!("{} values, blocks {sizes:?}", fv.values.len()),
    )
}

fn dft_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let x: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mags = harmonic_magnitudes(&x);
        for n in 1..=20 {
            let direct = naive_dft(&x, n);
            worst = worst.max((mags[n] - direct).abs() / direct);
        }
    }
    outcome(worst <= 1e-9, format!("max relative deviation {worst:.2e}"))
}

fn harmonic_trivials() -> Outcome {
    let (rel, thd, _) = harmonic_features(&periodic_event(sine));
    let pure = thd.iter().all(|t| *t < 1e-9)
        && (0..RETAINED_PERIODS)
            .all(|p| rel[p * 20] == 1.0 && rel[p * 20 + 1..(p + 1) * 20].iter().all(|h| *h < 1e-9));
    let (rel, _, _) = harmonic_features(&periodic_event(|ph| sine(ph) + 0.2 * sine(3.0 * ph)));
    let third = (0..RETAINED_PERIODS)
        .map(|p| (rel[p * 20 + 2] - 0.2).abs())
        .fold(0.0, f64::max);
    outcome(
        pure && third <= 1e-6,
        format!("pure sine clean: {pure}, |I3|/|I1| deviation {third:.1e}"),
    )
}

fn fit_recovery() -> Outcome {
    let times: Vec<f64> = (0..RETAINED_PERIODS)
        .map(|k| 0.025 + 0.02 * k as f64)
        .collect();
    let mut worst_rate = 0.0_f64;
    for rate in [1.0, 5.0, 14.0, 50.0, 100.0] {
        let values: Vec<f64> = times
            .iter()
            .map(|t| 3.0 * (-rate * (t - times[0])).exp() + 1.0)
            .collect();
        let got = fit_exponential(&PeakSeries::new(times.clone(), values));
        worst_rate = worst_rate.max((got - rate).abs() / rate);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_slope = 0.0_f64;
    for _ in 0..100 {
        let t: Vec<f64> = (0..RETAINED_PERIODS)
            .map(|k| 0.02 * k as f64 + rng.random_range(0.0..0.01))
            .collect();
        let v: Vec<f64> = (0..RETAINED_PERIODS)
            .map(|_| rng.random_range(-5.0..5.0))
            .collect();
        let n = t.len() as f64;
        let (st, sv) = (t.iter().sum::<f64>(), v.iter().sum::<f64>());
        let stv: f64 = t.iter().zip(&v).map(|(a, b)| a * b).sum();
        let stt: f64 = t.iter().map(|a| a * a).sum();
        let closed = (n * stv - st * sv) / (n * stt - st * st);
        let got = fit_linear(&PeakSeries::new(t, v));
        worst_slope = worst_slope.max((got - closed).abs() / closed.abs().max(1.0));
    }
    outcome(
        worst_rate <= 0.01 && worst_slope <= 1e-9,
        format!(
            "rate error {:.3} %, slope error {worst_slope:.1e}",
            100.0 * worst_rate
        ),
    )
}

fn features_of(w: &Waveform, cfg: &DetectionConfig) -> Option<Vec<f64>> {
    let t = *detect_turn_on(w, cfg).first()?;
    preprocess_event(w, t, cfg)
        .ok()
        .map(|e| extract_all(&e).values)
}

fn preprocessing_invariance() -> Outcome {
    let roster =
        motorid::synth::with_events(&reference_roster(&RosterOptions::default(), 5).unwrap(), 3);
    let events = generate_corpus(&roster[..17], &SynthConfig::default(), 5).unwrap();
    let cfg = DetectionConfig::default();
    let mut worst = 0.0_f64;
    let mut checked = 0;
    for ev in events.iter().take(50) {
        let w = &ev.waveform;
        let Some(base) = features_of(w, &cfg) else {
            return outcome(false, format!("{} produced no event", ev.file_name()));
        };
        let mut variants = Vec::new();
        for alpha in [0.5, 3.0, 10.0] {
            let mut s = w.clone();
            s.current.iter_mut().for_each(|v| *v *= alpha);
            variants.push(s);
        }
        let mut neg = w.clone();
        neg.current.iter_mut().for_each(|v| *v = -*v);
        neg.voltage.iter_mut().for_each(|v| *v = -*v);
        variants.push(neg);
        for v in &variants {
            let Some(f) = features_of(v, &cfg) else {
                return outcome(
                    false,
                    format!("{} lost its event under a transform", ev.file_name()),
                );
            };
            for (a, b) in base.iter().zip(&f) {
                worst = worst.max((a - b).abs() / a.abs().max(1.0));
            }
        }
        checked += 1;
    }
    outcome(
        checked == 50 && worst <= 1e-9,
        format!("{checked} events, max deviation {worst:.1e}"),
    )
}

fn reference_labels() -> (Vec<String>, Vec<MechType>) {
    let mut ids = Vec::new();
    let mut mech = Vec::new();
    for &(id, m, n) in REFERENCE_MOTORS.iter() {
        for _ in 0..n {
            ids.push(id.to_string());
            mech.push(m);
        }
    }
    (ids, mech)
}

fn protocol_combinatorics() -> Outcome {
    let (ids, mech) = reference_labels();
    let mut table = FeatureTable::new(vec!["x".into()]);
    for (k, (id, m)) in ids.iter().zip(&mech).enumerate() {
        table.rows.push(FeatureRow {
            motor_id: id.clone(),
            mech_type: *m,
            event_file: format!("{id}/event_{k:03}.csv"),
            values: vec![0.0],
        });
    }
    let typed = table.filtered(|r| r.mech_type != MechType::Other);
    let equal = equalize_events(&typed, 8).unwrap();
    let eq_ids: Vec<&str> = equal.rows.iter().map(|r| r.motor_id.as_str()).collect();
    let eq_mech: Vec<MechType> = equal.rows.iter().map(|r| r.mech_type).collect();
    let plan = motor_holdout_splits(&eq_ids, &eq_mech).unwrap();
    let sizes_ok = plan.folds.iter().all(|f| f.test.len() == 24);

    let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let strat = stratified_kfold(&id_refs, 8, 0).unwrap();
    let mut worst = 0.0_f64;
    for &(id, _, n) in REFERENCE_MOTORS.iter() {
        let expected = n as f64 / 8.0;
        for f in &strat.folds {
            let c = f.test.iter().filter(|&&i| ids[i] == id).count() as f64;
            worst = worst.max((c - expected).abs());
        }
    }
    outcome(
        plan.len() == 120 && sizes_ok && worst < 1.0,
        format!(
            "{} holdout folds, all of size 24: {sizes_ok}; stratified max deviation {worst:.3}",
            plan.len()
        ),
    )
}

fn metric_anchors() -> Outcome {
    let diag: Vec<usize> = (0..18).collect();
    let perfect = macro_f1(&ConfusionMatrix::from_predictions(&diag, &diag, 18).unwrap());

    let truth: Vec<usize> = (0..18).flat_map(|c| std::iter::repeat_n(c, 20)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trials = 1000;
    let mut sum = 0.0;
    for _ in 0..trials {
        let guess: Vec<usize> = truth.iter().map(|_| rng.random_range(0..18)).collect();
        sum += macro_f1(&ConfusionMatrix::from_predictions(&truth, &guess, 18).unwrap());
    }
    let random = sum / trials as f64;

    // truth 6×A, 4×B; predicted A: 5 of A, 1 of B
    let truth2 = [0, 0, 0, 0, 0, 0, 1, 1, 1, 1];
    let pred2 = [0, 0, 0, 0, 0, 1, 0, 1, 1, 1];
    let two = macro_f1(&ConfusionMatrix::from_predictions(&truth2, &pred2, 2).unwrap());
    let f1_a = 2.0 * 5.0 / (2.0 * 5.0 + 1.0 + 1.0);
    let f1_b = 2.0 * 3.0 / (2.0 * 3.0 + 1.0 + 1.0);
    let hand = (f1_a + f1_b) / 2.0;

    let pass = perfect == 1.0 && (random - 1.0 / 18.0).abs() <= 0.015 && (two - hand).abs() <= 1e-4;
    outcome(
        pass,
        format!(
            "diagonal {perfect}, random guesser {:.2} %, two-class {two:.4} vs {hand:.4}",
            100.0 * random
        ),
    )
}

fn experiment_config(kernel: Kernel, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        kernels: vec![kernel],
        seed,
        ..ExperimentConfig::default()
    }
}

fn corpus(mode: SignatureMode, seed: u64) -> FeatureTable {
    let o = RosterOptions {
        mode,
        ..RosterOptions::default()
    };
    let roster = reference_roster(&o, seed).unwrap();
    synthesize_features(
        &roster,
        &SynthConfig::default(),
        &DetectionConfig::default(),
        &Default::default(),
        seed,
    )
    .unwrap()
}

fn f1_curve(r: &ExperimentReport, kernel: Kernel) -> BTreeMap<usize, f64> {
    let trace = r.trace(kernel).unwrap();
    trace.steps.iter().map(|s| (s.k, s.f1_mean)).collect()
}

fn separability() -> Outcome {
    let start = Instant::now();
    let table = corpus(SignatureMode::Distinct, 11);
    let r =
        run_motor_experiment(&table, &experiment_config(Kernel::Linear, 11), "acceptance").unwrap();
    let f1 = f1_curve(&r, Kernel::Linear);
    let elapsed = start.elapsed();
    let (a, b, c) = (f1[&1], f1[&5], f1[&14]);
    let pass = c >= 0.95 && a < b && b < c && elapsed <= Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "{} events, f1 k=1 {a:.3}, k=5 {b:.3}, k=14 {c:.3}, {:.0} s",
            table.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn mech_null() -> Outcome {
    let start = Instant::now();
    let cfg = experiment_config(Kernel::Linear, 13);
    let null = run_mech_experiment(
        &corpus(SignatureMode::TypeIndependent, 13),
        &cfg,
        "acceptance",
    )
    .unwrap();
    let keyed =
        run_mech_experiment(&corpus(SignatureMode::TypeKeyed, 13), &cfg, "acceptance").unwrap();
    let elapsed = start.elapsed();
    let null_curve = f1_curve(&null, Kernel::Linear);
    let null_f1 = null_curve[&cfg.k_max];
    let keyed_f1 = f1_curve(&keyed, Kernel::Linear)[&cfg.k_max];
    let pass = (null_f1 - 1.0 / 3.0).abs() <= 0.15
        && keyed_f1 >= 0.9
        && elapsed <= Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "{} folds, independent {null_f1:.3} (k = 1: {:.3}), type-keyed {keyed_f1:.3}, {:.0} s",
            null.fold_count,
            null_curve[&1],
            elapsed.as_secs_f64()
        ),
    )
}

fn report_bytes(
    jobs: usize,
    table: &FeatureTable,
    cfg: &ExperimentConfig,
) -> BTreeMap<String, Vec<u8>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .unwrap();
    let digest = config_digest(&serde_json::to_string(cfg).unwrap());
    let r = pool
        .install(|| run_motor_experiment(table, cfg, &digest))
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    render_report(&r, table, dir.path()).unwrap();
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        files.insert(
            path.file_name().unwrap().to_string_lossy().into_owned(),
            fs::read(&path).unwrap(),
        );
    }
    files
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let table = corpus(SignatureMode::Distinct, 17);
    let cfg = experiment_config(Kernel::Rbf, 17);
    let serial = report_bytes(1, &table, &cfg);
    let parallel = report_bytes(4, &table, &cfg);
    let again = report_bytes(4, &table, &cfg);
    let elapsed = start.elapsed();
    let pass = !serial.is_empty()
        && serial == parallel
        && parallel == again
        && elapsed <= Duration::from_secs(1200);
    outcome(
        pass,
        format!(
            "{} report files identical across --jobs 1/4 and a rerun: {}, {:.0} s",
            serial.len(),
            serial == parallel && parallel == again,
            elapsed.as_secs_f64()
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 10] = [
    (1, "feature catalog", feature_catalog),
    (2, "DFT oracle equivalence", dft_oracle),
    (3, "THD and harmonic trivials", harmonic_trivials),
    (4, "fit recovery", fit_recovery),
    (5, "preprocessing invariances", preprocessing_invariance),
    (6, "protocol combinatorics", protocol_combinatorics),
    (7, "metric anchors", metric_anchors),
    (8, "end-to-end separability", separability),
    (9, "end-to-end null result", mech_null),
    (10, "determinism", determinism),
];

fn main() {
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = Vec::new();
    for (id, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {verdict} {name}: {} [{:.2} s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
