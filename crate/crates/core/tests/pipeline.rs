use std::fmt;
use std::sync::Arc;

use nestprog::linalg::Matrix;
use nestprog::models::{Algorithm, HyperParams, Learner, ModelError, ProbabilityModel};
use nestprog::nestedcv::{
    make_fold_plan, read_oof, run_nested_cv, run_repeated, write_oof, NestedCvError, NestedCvOptions,
};
use nestprog::synth::{generate, SynthSpec};
use nestprog::tabular::{Cell, ColumnKind, ColumnSpec, OutcomeSpec, PredictorTable, Schema, TabularDataset};
use nestprog::tuning::{named_preset, Grid};
use nestprog::Seed;

/// Ignores its input and predicts 0.5 for every row.
#[derive(Clone)]
struct Constant;

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("constant")
    }
}

struct Half(usize);

impl ProbabilityModel for Half {
    fn n_features(&self) -> usize {
        self.0
    }

    fn predict_row(&self, _: &[f64]) -> f64 {
        0.5
    }
}

impl Learner for Constant {
    type Model = Half;

    fn fit(&self, x: &Matrix, _: &[bool], _: Seed) -> Result<Half, ModelError> {
        Ok(Half(x.cols()))
    }
}

fn tiny(n: usize, positives: usize) -> TabularDataset {
    let cols = vec![ColumnSpec { name: "x".into(), kind: ColumnKind::Numeric }];
    let outcome = OutcomeSpec { name: "y".into(), positive: "1".into(), negative: Some("0".into()) };
    let schema = Arc::new(Schema::new(cols, Some(outcome), None).unwrap());
    let cells = (0..n).map(|i| Cell::Value(i as f64 * 0.37 % 5.0)).collect();
    let ids = (0..n).map(|i| format!("r{i}")).collect();
    let table = PredictorTable::new(schema, cells, ids).unwrap();
    TabularDataset::new(table, (0..n).map(|i| i < positives).collect()).unwrap()
}

fn synth(n: usize, pi: f64, seed: u64) -> TabularDataset {
    generate(&SynthSpec::adni_like(n, pi, 1.5, Seed(seed))).unwrap().0
}

#[test]
fn constant_model_has_chance_metrics() {
    let ds = tiny(60, 20);
    let r = run_nested_cv(&ds, &[Constant], &NestedCvOptions::default(), Seed(3)).unwrap();
    assert_eq!(r.metrics.auc, 0.5);
    assert!((r.metrics.sensitivity + r.metrics.specificity - 1.0).abs() < 1e-12);
    assert!(r.oof.probability.iter().all(|&p| p == 0.5));
}

#[test]
fn oof_covers_each_row_once() {
    let ds = tiny(62, 25);
    let r = run_nested_cv(&ds, &[Constant], &NestedCvOptions::default(), Seed(8)).unwrap();
    assert_eq!(r.folds.len(), 20);
    let mut seen = vec![0; 62];
    r.folds.iter().flat_map(|f| &f.test_rows).for_each(|&i| seen[i] += 1);
    assert!(seen.iter().all(|&c| c == 1));
    assert_eq!(r.oof.fold, r.plan.fold_of());
}

#[test]
fn single_class_and_small_inputs_fail() {
    let ds = tiny(30, 0);
    assert!(matches!(
        run_nested_cv(&ds, &[Constant], &NestedCvOptions::default(), Seed(1)),
        Err(NestedCvError::SingleClass { .. })
    ));
    let ds = tiny(5, 2);
    assert!(matches!(
        run_nested_cv(&ds, &[Constant], &NestedCvOptions::default(), Seed(1)),
        Err(NestedCvError::TooFewRows(5))
    ));
    assert!(make_fold_plan(5, Seed(0)).is_err());
}

#[test]
fn repeats_need_two_runs() {
    let ds = tiny(30, 12);
    assert!(matches!(
        run_repeated(&ds, &[Constant], &NestedCvOptions::default(), Seed(0), 1),
        Err(NestedCvError::TooFewRepeats(1))
    ));
    let s = run_repeated(&ds, &[Constant], &NestedCvOptions::default(), Seed(0), 3).unwrap();
    assert_eq!(s.mean[0], 0.5);
    assert_eq!(s.sd[0], 0.0);
}

#[test]
fn oof_csv_round_trips() {
    let ds = synth(90, 0.3, 5);
    let cands = Grid::fixed(&named_preset("desk", Algorithm::Cart, ds.n_cols()).unwrap()).candidates();
    let r = run_nested_cv(&ds, &cands, &NestedCvOptions::default(), Seed(2)).unwrap();
    let mut buf = Vec::new();
    write_oof(&r.oof, &mut buf).unwrap();
    assert_eq!(read_oof(buf.as_slice()).unwrap(), r.oof);
}

#[test]
fn seeds_change_the_plan_not_the_contract() {
    let ds = synth(90, 0.3, 6);
    let cands: Vec<HyperParams> = Grid::fixed(&named_preset("desk", Algorithm::En, ds.n_cols()).unwrap()).candidates();
    let a = run_nested_cv(&ds, &cands, &NestedCvOptions::default(), Seed(1)).unwrap();
    let b = run_nested_cv(&ds, &cands, &NestedCvOptions::default(), Seed(2)).unwrap();
    assert_ne!(a.plan.fold_of(), b.plan.fold_of());
    assert!(a.metrics.auc > 0.7 && b.metrics.auc > 0.7, "{} {}", a.metrics.auc, b.metrics.auc);
}

#[test]
fn training_part_never_sees_test_rows() {
    let ds = synth(60, 0.3, 7);
    let opts = NestedCvOptions { keep_preprocess: true, ..NestedCvOptions::default() };
    let cands = Grid::fixed(&named_preset("desk", Algorithm::Cart, ds.n_cols()).unwrap()).candidates();
    let r = run_nested_cv(&ds, &cands, &opts, Seed(4)).unwrap();
    let fold = &r.folds[3];
    let (_, train) = ds.split_rows(&fold.test_rows).unwrap();
    let direct = nestprog::preprocess::PreprocessModel::fit(&train, 5).unwrap().to_text();
    assert_eq!(fold.preprocess.as_deref(), Some(direct.as_str()));
}
