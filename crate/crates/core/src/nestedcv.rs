//! Outer leave-3-rows-out cross-validation around inner grid search, and
//! its repeated form.
//!
//! Seeds fan out as `run → (FoldPlan, attempt)` for the outer partition and
//! `run → (OuterFold, k) → {InnerCv, Model}` for everything inside fold
//! `k`, so any fold can be recomputed in isolation. Repeats use
//! `master → (Repeat, i)` as their run seed. Parallel work is reduced by
//! fold and repeat index, never by completion order.

use std::io::Write;

use log::{info, warn};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use thiserror::Error;

use crate::metrics::{summarize, MetricsError, MetricsSummary, RocCurve};
use crate::models::{Learner, ModelError, ProbabilityModel};
use crate::preprocess::{PreprocessError, PreprocessModel};
use crate::seed::{Seed, Stream};
use crate::tabular::{TabularDataset, TabularError};
use crate::tuning::{grid_search, TuningError};

pub const TEST_ROWS: usize = 3;
pub const MAX_PLAN_ATTEMPTS: u64 = 10;

#[derive(Debug, Error)]
pub enum NestedCvError {
    #[error("nested CV needs at least 6 rows, got {0}")]
    TooFewRows(usize),
    #[error("outcome has a single class ({positives} positive of {n})")]
    SingleClass { positives: usize, n: usize },
    #[error("no fold plan with both classes in every training part after {0} attempts")]
    NoValidPlan(u64),
    #[error("repeated nested CV needs at least 2 repeats, got {0}")]
    TooFewRepeats(usize),
    #[error("fold {fold}: preprocessing failed: {source}")]
    Preprocess { fold: usize, source: PreprocessError },
    #[error("fold {fold}: tuning failed: {source}")]
    Tuning { fold: usize, source: TuningError },
    #[error("fold {fold}: refit failed: {source}")]
    Model { fold: usize, source: ModelError },
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

/// Outer partition of `n` rows into folds of 3 or 4.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    seed: Seed,
    fold_of: Vec<usize>,
    n_folds: usize,
}

impl FoldPlan {
    pub fn seed(&self) -> Seed {
        self.seed
    }

    pub fn n_rows(&self) -> usize {
        self.fold_of.len()
    }

    pub fn n_folds(&self) -> usize {
        self.n_folds
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    /// Rows of fold `k` in ascending order.
    pub fn rows(&self, k: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == k).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_folds];
        self.fold_of.iter().for_each(|&f| s[f] += 1);
        s
    }
}

/// Shuffles rows with `seed` and deals them into `floor(n/3)` consecutive
/// chunks; the first `n mod 3` chunks take one extra row.
pub fn make_fold_plan(n: usize, seed: Seed) -> Result<FoldPlan, NestedCvError> {
    if n < 2 * TEST_ROWS {
        return Err(NestedCvError::TooFewRows(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed.rng());
    let n_folds = n / TEST_ROWS;
    let extra = n % TEST_ROWS;
    let mut fold_of = vec![0; n];
    let mut pos = 0;
    for k in 0..n_folds {
        let size = TEST_ROWS + usize::from(k < extra);
        for &row in &order[pos..pos + size] {
            fold_of[row] = k;
        }
        pos += size;
    }
    Ok(FoldPlan { seed, fold_of, n_folds })
}

/// First plan (attempt 0, 1, …) whose training parts all contain both classes.
pub fn valid_fold_plan(y: &[bool], run: Seed) -> Result<FoldPlan, NestedCvError> {
    let positives = y.iter().filter(|&&b| b).count();
    let negatives = y.len() - positives;
    for attempt in 0..MAX_PLAN_ATTEMPTS {
        let plan = make_fold_plan(y.len(), run.child(Stream::FoldPlan, attempt))?;
        let mut pos = vec![0; plan.n_folds];
        let mut neg = vec![0; plan.n_folds];
        for (i, &f) in plan.fold_of.iter().enumerate() {
            if y[i] { pos[f] += 1 } else { neg[f] += 1 }
        }
        if (0..plan.n_folds).all(|k| pos[k] < positives && neg[k] < negatives) {
            return Ok(plan);
        }
        warn!("fold plan attempt {attempt} left a training part with one class; redrawing");
    }
    Err(NestedCvError::NoValidPlan(MAX_PLAN_ATTEMPTS))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NestedCvOptions {
    pub neighbors: usize,
    /// Keep each fold's serialized preprocessing model.
    pub keep_preprocess: bool,
}

impl Default for NestedCvOptions {
    fn default() -> Self {
        NestedCvOptions { neighbors: crate::preprocess::DEFAULT_NEIGHBORS, keep_preprocess: false }
    }
}

#[derive(Clone, Debug)]
pub struct FoldRecord<L> {
    pub fold: usize,
    pub test_rows: Vec<usize>,
    pub best: L,
    pub best_index: usize,
    pub inner_auc: f64,
    pub inner_fold_hash: u64,
    pub fallback_imputations: usize,
    pub preprocess: Option<String>,
}

/// Out-of-fold predictions aligned to dataset row order.
#[derive(Clone, Debug, PartialEq)]
pub struct OofPredictions {
    pub ids: Vec<String>,
    pub fold: Vec<usize>,
    pub probability: Vec<f64>,
    pub label: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct NestedCvResult<L> {
    pub plan: FoldPlan,
    pub oof: OofPredictions,
    pub folds: Vec<FoldRecord<L>>,
    pub metrics: MetricsSummary,
    pub roc: RocCurve,
}

type FoldOutcome<L> = Result<(FoldRecord<L>, Vec<f64>), NestedCvError>;

fn run_fold<L: Learner>(
    ds: &TabularDataset,
    candidates: &[L],
    opts: &NestedCvOptions,
    plan: &FoldPlan,
    run: Seed,
    k: usize,
) -> FoldOutcome<L> {
    let test_rows = plan.rows(k);
    let (test, train) = ds.split_rows(&test_rows)?;
    let prep = PreprocessModel::fit(&train, opts.neighbors).map_err(|source| NestedCvError::Preprocess { fold: k, source })?;
    let dtrain = prep.transform(&train).map_err(|source| NestedCvError::Preprocess { fold: k, source })?;
    let dtest = prep.transform(&test).map_err(|source| NestedCvError::Preprocess { fold: k, source })?;
    let fold_seed = run.child(Stream::OuterFold, k as u64);
    let tuned = grid_search(&dtrain.x, &dtrain.y, candidates, fold_seed.child(Stream::InnerCv, 0))
        .map_err(|source| NestedCvError::Tuning { fold: k, source })?;
    let model = tuned
        .best
        .fit(&dtrain.x, &dtrain.y, fold_seed.child(Stream::Model, 0))
        .map_err(|source| NestedCvError::Model { fold: k, source })?;
    let prob = model.predict_proba(&dtest.x).map_err(|source| NestedCvError::Model { fold: k, source })?;
    let record = FoldRecord {
        fold: k,
        test_rows,
        inner_auc: tuned.mean_auc[tuned.best_index],
        best: tuned.best,
        best_index: tuned.best_index,
        inner_fold_hash: tuned.fold_hash,
        fallback_imputations: dtrain.fallback_imputations + dtest.fallback_imputations,
        preprocess: opts.keep_preprocess.then(|| prep.to_text()),
    };
    Ok((record, prob))
}

/// Runs nested CV with the ambient rayon pool; see [`with_workers`].
pub fn run_nested_cv<L: Learner>(
    ds: &TabularDataset,
    candidates: &[L],
    opts: &NestedCvOptions,
    seed: Seed,
) -> Result<NestedCvResult<L>, NestedCvError> {
    let n = ds.n_rows();
    if n < 2 * TEST_ROWS {
        return Err(NestedCvError::TooFewRows(n));
    }
    let positives = ds.positives();
    if positives == 0 || positives == n {
        return Err(NestedCvError::SingleClass { positives, n });
    }
    let plan = valid_fold_plan(ds.outcome(), seed)?;
    let results: Vec<FoldOutcome<L>> = (0..plan.n_folds)
        .into_par_iter()
        .map(|k| run_fold(ds, candidates, opts, &plan, seed, k))
        .collect();
    let mut probability = vec![f64::NAN; n];
    let mut folds = Vec::with_capacity(plan.n_folds);
    for r in results {
        let (record, prob) = r?;
        for (&row, p) in record.test_rows.iter().zip(prob) {
            probability[row] = p;
        }
        folds.push(record);
    }
    let fallbacks: usize = folds.iter().map(|f| f.fallback_imputations).sum();
    if fallbacks > 0 {
        info!("{fallbacks} cells fell back to the train mean during imputation");
    }
    let label = ds.outcome().to_vec();
    let metrics = summarize(&probability, &label)?;
    let roc = RocCurve::from_scores(&probability, &label)?;
    let oof = OofPredictions { ids: ds.ids().to_vec(), fold: plan.fold_of.clone(), probability, label };
    Ok(NestedCvResult { plan, oof, folds, metrics, roc })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepeatSummary {
    pub master: Seed,
    pub per_repeat: Vec<MetricsSummary>,
    pub mean: [f64; 5],
    pub sd: [f64; 5],
}

impl RepeatSummary {
    pub fn from_repeats(master: Seed, per_repeat: Vec<MetricsSummary>) -> RepeatSummary {
        let r = per_repeat.len() as f64;
        let mut mean = [0.0; 5];
        let mut sd = [0.0; 5];
        for s in 0..5 {
            let vals: Vec<f64> = per_repeat.iter().map(|m| m.values()[s]).collect();
            mean[s] = vals.iter().sum::<f64>() / r;
            sd[s] = (vals.iter().map(|v| (v - mean[s]).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
        }
        RepeatSummary { master, per_repeat, mean, sd }
    }

    pub fn repeats(&self) -> usize {
        self.per_repeat.len()
    }
}

/// Repeat `i` runs nested CV with seed `master.child(Repeat, i)`.
pub fn run_repeated<L: Learner>(
    ds: &TabularDataset,
    candidates: &[L],
    opts: &NestedCvOptions,
    master: Seed,
    repeats: usize,
) -> Result<RepeatSummary, NestedCvError> {
    if repeats < 2 {
        return Err(NestedCvError::TooFewRepeats(repeats));
    }
    let runs: Vec<Result<MetricsSummary, NestedCvError>> = (0..repeats)
        .into_par_iter()
        .map(|i| run_nested_cv(ds, candidates, opts, master.child(Stream::Repeat, i as u64)).map(|r| r.metrics))
        .collect();
    let per_repeat = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(RepeatSummary::from_repeats(master, per_repeat))
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, NestedCvError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| NestedCvError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// `id,fold,probability,label`, one row per dataset row; folds are 1-based.
pub fn write_oof<W: Write>(oof: &OofPredictions, mut w: W) -> std::io::Result<()> {
    writeln!(w, "id,fold,probability,label")?;
    for i in 0..oof.ids.len() {
        writeln!(w, "{},{},{:?},{}", oof.ids[i], oof.fold[i] + 1, oof.probability[i], u8::from(oof.label[i]))?;
    }
    Ok(())
}

/// Parses the layout written by [`write_oof`].
pub fn read_oof<R: std::io::Read>(reader: R) -> Result<OofPredictions, TabularError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "fold", "probability", "label"] {
        return Err(TabularError::Malformed(format!("unexpected OOF header `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut oof = OofPredictions { ids: Vec::new(), fold: Vec::new(), probability: Vec::new(), label: Vec::new() };
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| TabularError::Malformed(format!("OOF row {}: bad {what}", line + 1));
        let fold: usize = rec[1].parse().map_err(|_| bad("fold"))?;
        if fold == 0 {
            return Err(bad("fold"));
        }
        oof.ids.push(rec[0].to_string());
        oof.fold.push(fold - 1);
        oof.probability.push(rec[2].parse().map_err(|_| bad("probability"))?);
        oof.label.push(match &rec[3] {
            "1" => true,
            "0" => false,
            _ => return Err(bad("label")),
        });
    }
    Ok(oof)
}

/// One row per model with the five statistics at the Youden point.
pub fn write_metrics<W: Write>(rows: &[(String, MetricsSummary)], mut w: W) -> std::io::Result<()> {
    writeln!(w, "Model,{},Threshold", MetricsSummary::STATISTICS.join(","))?;
    for (name, m) in rows {
        let v = m.values();
        writeln!(w, "{name},{:.4},{:.4},{:.4},{:.4},{:.4},{:?}", v[0], v[1], v[2], v[3], v[4], m.threshold)?;
    }
    Ok(())
}

/// `mean(SD)` with two decimals for the mean and three for the SD.
pub fn format_mean_sd(mean: f64, sd: f64) -> String {
    format!("{mean:.2}({sd:.3})")
}

/// One row per statistic: mean, SD and the combined `mean(SD)` cell.
pub fn write_repeat_summary<W: Write>(name: &str, s: &RepeatSummary, mut w: W) -> std::io::Result<()> {
    writeln!(w, "Model,Statistic,Repeats,Mean,SD,Formatted")?;
    for (k, stat) in MetricsSummary::STATISTICS.iter().enumerate() {
        writeln!(
            w,
            "{name},{stat},{},{:.6},{:.6},{}",
            s.repeats(),
            s.mean[k],
            s.sd[k],
            format_mean_sd(s.mean[k], s.sd[k])
        )?;
    }
    Ok(())
}
