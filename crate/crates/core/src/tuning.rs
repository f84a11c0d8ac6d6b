//! Hyperparameter grids and grid search by stratified 5-fold inner
//! cross-validation.

use std::fmt;

use log::debug;
use rand::seq::SliceRandom;
use thiserror::Error;

use crate::linalg::Matrix;
use crate::metrics::auc;
use crate::models::{
    Algorithm, CartParams, EnParams, GbmParams, GpParams, HyperParams, Learner, RfParams, SvmParams,
};
use crate::seed::{splitmix64, Seed, Stream};

pub const INNER_FOLDS: usize = 5;
/// Fixed GBM minimum split improvement.
pub const GBM_MIN_SPLIT_IMPROVEMENT: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TuningError {
    #[error("stratified {INNER_FOLDS}-fold CV needs >= {INNER_FOLDS} rows per class, got {positives} positive and {negatives} negative")]
    ClassTooSmall { positives: usize, negatives: usize },
    #[error("grid is empty")]
    EmptyGrid,
    #[error("invalid grid for {algorithm}: {detail}")]
    InvalidGrid { algorithm: Algorithm, detail: String },
    #[error("every grid combination failed; first error: {0}")]
    AllFailed(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

/// Parameter names accepted per algorithm, with defaults for optional ones.
pub fn parameter_names(algorithm: Algorithm) -> &'static [(&'static str, Option<f64>)] {
    match algorithm {
        Algorithm::Rf => &[
            ("mtry", None),
            ("max_depth", None),
            ("min_split_improvement", None),
            ("min_rows", None),
            ("n_trees", Some(500.0)),
            ("bootstrap", Some(1.0)),
        ],
        Algorithm::Svm => &[("C", None), ("sigma", None)],
        Algorithm::Gbm => &[
            ("n_trees", None),
            ("max_depth", None),
            ("learn_rate", None),
            ("min_rows", None),
            ("min_split_improvement", Some(GBM_MIN_SPLIT_IMPROVEMENT)),
        ],
        Algorithm::En => &[("lambda", None), ("alpha", None)],
        Algorithm::Gp => &[("sigma", None)],
        Algorithm::Cart => &[("cp_index", None), ("minsplit", Some(20.0)), ("minbucket", Some(7.0))],
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

/// Cartesian product of named value lists; the first axis varies slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    algorithm: Algorithm,
    axes: Vec<Axis>,
}

fn count(v: f64, name: &str) -> Result<usize, String> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e12 {
        Ok(v as usize)
    } else {
        Err(format!("{name} must be a whole number, got {v}"))
    }
}

fn build(algorithm: Algorithm, get: &dyn Fn(&str) -> f64) -> Result<HyperParams, String> {
    Ok(match algorithm {
        Algorithm::Rf => HyperParams::Rf(RfParams {
            mtry: count(get("mtry"), "mtry")?,
            max_depth: count(get("max_depth"), "max_depth")?,
            min_rows: count(get("min_rows"), "min_rows")?,
            min_split_improvement: get("min_split_improvement"),
            n_trees: count(get("n_trees"), "n_trees")?,
            bootstrap: match get("bootstrap") {
                0.0 => false,
                1.0 => true,
                v => return Err(format!("bootstrap must be 0 or 1, got {v}")),
            },
        }),
        Algorithm::Svm => HyperParams::Svm(SvmParams { cost: get("C"), sigma: get("sigma") }),
        Algorithm::Gbm => HyperParams::Gbm(GbmParams {
            n_trees: count(get("n_trees"), "n_trees")?,
            max_depth: count(get("max_depth"), "max_depth")?,
            learn_rate: get("learn_rate"),
            min_rows: count(get("min_rows"), "min_rows")?,
            min_split_improvement: get("min_split_improvement"),
        }),
        Algorithm::En => HyperParams::En(EnParams { lambda: get("lambda"), alpha: get("alpha") }),
        Algorithm::Gp => HyperParams::Gp(GpParams { sigma: get("sigma") }),
        Algorithm::Cart => HyperParams::Cart(CartParams {
            cp_index: u32::try_from(count(get("cp_index"), "cp_index")?).map_err(|e| e.to_string())?,
            min_split: count(get("minsplit"), "minsplit")?,
            min_bucket: count(get("minbucket"), "minbucket")?,
        }),
    })
}

impl Grid {
    /// Checks names, fills nothing in: missing optional parameters take
    /// their defaults at combination time.
    pub fn new(algorithm: Algorithm, axes: Vec<Axis>) -> Result<Grid, TuningError> {
        let invalid = |detail: String| TuningError::InvalidGrid { algorithm, detail };
        let names = parameter_names(algorithm);
        for (i, a) in axes.iter().enumerate() {
            if !names.iter().any(|(n, _)| *n == a.name) {
                return Err(invalid(format!("unknown parameter `{}`", a.name)));
            }
            if axes[..i].iter().any(|b| b.name == a.name) {
                return Err(invalid(format!("parameter `{}` listed twice", a.name)));
            }
            if a.values.is_empty() {
                return Err(TuningError::EmptyGrid);
            }
        }
        for (n, default) in names {
            if default.is_none() && !axes.iter().any(|a| a.name == *n) {
                return Err(invalid(format!("missing parameter `{n}`")));
            }
        }
        let grid = Grid { algorithm, axes };
        // Parameters are validated field by field, so checking each axis
        // value against the first value of every other axis covers all combinations.
        for (i, a) in grid.axes.iter().enumerate() {
            for &v in &a.values {
                let mut idx = vec![0; grid.axes.len()];
                idx[i] = a.values.iter().position(|x| x.total_cmp(&v).is_eq()).expect("value present");
                let p = grid.params_at(&idx).map_err(invalid)?;
                p.validate().map_err(|e| invalid(e.to_string()))?;
            }
        }
        Ok(grid)
    }

    /// One-combination grid holding `params`.
    pub fn fixed(params: &HyperParams) -> Grid {
        let values: Vec<(&str, f64)> = match params {
            HyperParams::Rf(p) => vec![
                ("mtry", p.mtry as f64),
                ("max_depth", p.max_depth as f64),
                ("min_split_improvement", p.min_split_improvement),
                ("min_rows", p.min_rows as f64),
                ("n_trees", p.n_trees as f64),
                ("bootstrap", f64::from(u8::from(p.bootstrap))),
            ],
            HyperParams::Svm(p) => vec![("C", p.cost), ("sigma", p.sigma)],
            HyperParams::Gbm(p) => vec![
                ("n_trees", p.n_trees as f64),
                ("max_depth", p.max_depth as f64),
                ("learn_rate", p.learn_rate),
                ("min_rows", p.min_rows as f64),
                ("min_split_improvement", p.min_split_improvement),
            ],
            HyperParams::En(p) => vec![("lambda", p.lambda), ("alpha", p.alpha)],
            HyperParams::Gp(p) => vec![("sigma", p.sigma)],
            HyperParams::Cart(p) => vec![
                ("cp_index", p.cp_index as f64),
                ("minsplit", p.min_split as f64),
                ("minbucket", p.min_bucket as f64),
            ],
        };
        let axes = values.into_iter().map(|(n, v)| Axis { name: n.to_string(), values: vec![v] }).collect();
        Grid { algorithm: params.algorithm(), axes }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn params_at(&self, idx: &[usize]) -> Result<HyperParams, String> {
        let get = |name: &str| -> f64 {
            match self.axes.iter().position(|a| a.name == name) {
                Some(k) => self.axes[k].values[idx[k]],
                None => parameter_names(self.algorithm)
                    .iter()
                    .find(|(n, _)| *n == name)
                    .and_then(|(_, d)| *d)
                    .expect("required parameters checked in Grid::new"),
            }
        };
        build(self.algorithm, &get)
    }

    /// The `i`-th combination in declared order.
    pub fn combination(&self, mut i: usize) -> HyperParams {
        let mut idx = vec![0; self.axes.len()];
        for (k, a) in self.axes.iter().enumerate().rev() {
            idx[k] = i % a.values.len();
            i /= a.values.len();
        }
        self.params_at(&idx).expect("grid validated on construction")
    }

    pub fn candidates(&self) -> Vec<HyperParams> {
        (0..self.len()).map(|i| self.combination(i)).collect()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[", self.algorithm)?;
        for (i, a) in self.axes.iter().enumerate() {
            if i > 0 {
                f.write_str(" × ")?;
            }
            write!(f, "{}:{}", a.name, a.values.len())?;
        }
        write!(f, "] = {}", self.len())
    }
}

/// `lo/den, (lo+1)/den, …, hi/den`, each the double nearest the decimal.
fn steps(lo: u32, hi: u32, den: f64) -> Vec<f64> {
    (lo..=hi).map(|i| i as f64 / den).collect()
}

fn axis(name: &str, values: Vec<f64>) -> Axis {
    Axis { name: name.to_string(), values }
}

/// The published grid for `algorithm` on a `p`-column training set.
/// `expand_gbm` replaces the GBM tree and min-rows subsets by full integer ranges.
pub fn preset_grid(algorithm: Algorithm, p: usize, expand_gbm: bool) -> Result<Grid, TuningError> {
    if p == 0 {
        return Err(TuningError::InvalidGrid { algorithm, detail: "dataset has no columns".into() });
    }
    let axes = match algorithm {
        Algorithm::Rf => vec![
            axis("mtry", steps(1, p as u32, 1.0)),
            axis("max_depth", steps(1, 10, 1.0)),
            axis("min_split_improvement", steps(1, 20, 100.0)),
            axis("min_rows", steps(1, 7, 1.0)),
        ],
        Algorithm::Svm => vec![axis("C", steps(1, 50, 10.0)), axis("sigma", steps(1, 50, 10.0))],
        Algorithm::Gbm => {
            let (trees, rows) = if expand_gbm {
                (steps(1, 400, 1.0), steps(1, 50, 1.0))
            } else {
                (vec![1.0, 10.0, 50.0, 100.0, 200.0, 400.0], vec![1.0, 5.0, 10.0, 20.0, 40.0, 50.0])
            };
            vec![
                axis("n_trees", trees),
                axis("max_depth", vec![25.0, 50.0, 75.0, 100.0]),
                axis("learn_rate", vec![0.01, 0.11]),
                axis("min_rows", rows),
                axis("min_split_improvement", vec![GBM_MIN_SPLIT_IMPROVEMENT]),
            ]
        }
        Algorithm::En => vec![axis("lambda", steps(0, 100, 10.0)), axis("alpha", steps(0, 100, 100.0))],
        Algorithm::Gp => vec![axis("sigma", steps(1, 2000, 1000.0))],
        Algorithm::Cart => vec![axis("cp_index", steps(1, 250, 1.0))],
    };
    Grid::new(algorithm, axes)
}

pub const PRESET_NAMES: [&str; 3] = ["cn-optimum", "mci-optimum", "desk"];

/// Named fixed-parameter configurations. `cn-optimum` and `mci-optimum`
/// carry the reference optima for the two cohorts (mtry capped at `p`);
/// `desk` is a lightly regularised point on each grid for quick runs.
pub fn named_preset(name: &str, algorithm: Algorithm, p: usize) -> Result<HyperParams, TuningError> {
    let cap = |m: usize| m.min(p.max(1));
    let rf = |mtry, max_depth, min_rows, msi| {
        HyperParams::Rf(RfParams::new(mtry, max_depth, min_rows, msi))
    };
    let gbm = |n_trees, min_rows| {
        HyperParams::Gbm(GbmParams {
            n_trees,
            max_depth: 50,
            learn_rate: 0.11,
            min_rows,
            min_split_improvement: GBM_MIN_SPLIT_IMPROVEMENT,
        })
    };
    Ok(match (name, algorithm) {
        ("cn-optimum", Algorithm::Rf) => rf(cap(6), 9, 1, 0.06),
        ("cn-optimum", Algorithm::Svm) => HyperParams::Svm(SvmParams { cost: 0.2, sigma: 0.8 }),
        ("cn-optimum", Algorithm::Gbm) => gbm(10, 40),
        ("cn-optimum", Algorithm::En) => HyperParams::En(EnParams { lambda: 10.0, alpha: 0.0 }),
        ("cn-optimum", Algorithm::Gp) => HyperParams::Gp(GpParams { sigma: 1.288 }),
        ("mci-optimum", Algorithm::Rf) => rf(cap(6), 10, 4, 0.06),
        ("mci-optimum", Algorithm::Svm) => HyperParams::Svm(SvmParams { cost: 0.1, sigma: 0.1 }),
        ("mci-optimum", Algorithm::Gbm) => gbm(100, 40),
        ("mci-optimum", Algorithm::En) => HyperParams::En(EnParams { lambda: 3.0, alpha: 0.01 }),
        ("mci-optimum", Algorithm::Gp) => HyperParams::Gp(GpParams { sigma: 1.191 }),
        ("cn-optimum" | "mci-optimum", Algorithm::Cart) => HyperParams::Cart(CartParams::with_cp(200)),
        ("desk", Algorithm::Rf) => rf(cap(((p as f64).sqrt() as usize).max(1)), 10, 1, 0.01),
        ("desk", Algorithm::Svm) => HyperParams::Svm(SvmParams { cost: 1.0, sigma: 0.1 }),
        ("desk", Algorithm::Gbm) => HyperParams::Gbm(GbmParams {
            n_trees: 50,
            max_depth: 25,
            learn_rate: 0.11,
            min_rows: 5,
            min_split_improvement: GBM_MIN_SPLIT_IMPROVEMENT,
        }),
        ("desk", Algorithm::En) => HyperParams::En(EnParams { lambda: 0.1, alpha: 0.01 }),
        ("desk", Algorithm::Gp) => HyperParams::Gp(GpParams { sigma: 0.01 }),
        ("desk", Algorithm::Cart) => HyperParams::Cart(CartParams::with_cp(1)),
        (other, _) => return Err(TuningError::UnknownPreset(other.to_string())),
    })
}

/// Stratified fold id per row: rows are shuffled, then positives and
/// negatives are dealt round-robin with one shared counter.
pub fn stratified_folds(y: &[bool], k: usize, seed: Seed) -> Vec<usize> {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.shuffle(&mut seed.rng());
    let mut fold = vec![0; y.len()];
    let mut counter = 0;
    for class in [true, false] {
        for &i in order.iter().filter(|&&i| y[i] == class) {
            fold[i] = counter % k;
            counter += 1;
        }
    }
    fold
}

/// Order-sensitive digest of a fold assignment.
pub fn fold_hash(folds: &[usize]) -> u64 {
    folds.iter().fold(0x6a09_e667_f3bc_c908, |h, &f| splitmix64(h ^ f as u64))
}

#[derive(Clone, Debug)]
pub struct TuningResult<L> {
    pub best: L,
    pub best_index: usize,
    /// Mean inner-CV AUC per combination; NaN where a fit failed or, for a
    /// single-combination grid, where no scoring was needed.
    pub mean_auc: Vec<f64>,
    pub folds: usize,
    /// Digest of the inner partition every combination was scored on.
    pub fold_hash: u64,
}

/// Scores every candidate on one stratified 5-fold partition drawn from
/// `seed` and returns the first candidate with the highest mean AUC.
pub fn grid_search<L: Learner>(
    x: &Matrix,
    y: &[bool],
    candidates: &[L],
    seed: Seed,
) -> Result<TuningResult<L>, TuningError> {
    if candidates.is_empty() {
        return Err(TuningError::EmptyGrid);
    }
    let positives = y.iter().filter(|&&b| b).count();
    let negatives = y.len() - positives;
    if positives < INNER_FOLDS || negatives < INNER_FOLDS {
        return Err(TuningError::ClassTooSmall { positives, negatives });
    }
    let folds = stratified_folds(y, INNER_FOLDS, seed);
    let hash = fold_hash(&folds);
    if candidates.len() == 1 {
        return Ok(TuningResult { best: candidates[0].clone(), best_index: 0, mean_auc: vec![f64::NAN], folds: INNER_FOLDS, fold_hash: hash });
    }
    let mut totals = vec![0.0; candidates.len()];
    let mut first_error: Option<String> = None;
    for k in 0..INNER_FOLDS {
        let train: Vec<usize> = (0..y.len()).filter(|&i| folds[i] != k).collect();
        let valid: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == k).collect();
        let xt = x.select_rows(&train);
        let yt: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let xv = x.select_rows(&valid);
        let yv: Vec<bool> = valid.iter().map(|&i| y[i]).collect();
        let scored = L::fit_and_score(candidates, &xt, &yt, &xv, seed.child(Stream::Model, k as u64));
        for (c, r) in scored.into_iter().enumerate() {
            let score = match r {
                Ok(p) => auc(&p, &yv).map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            match score {
                Ok(a) => totals[c] += a,
                Err(e) => {
                    if first_error.is_none() {
                        first_error = Some(format!("{}: {e}", candidates[c]));
                    }
                    totals[c] = f64::NAN;
                }
            }
        }
    }
    let mean_auc: Vec<f64> = totals.iter().map(|t| t / INNER_FOLDS as f64).collect();
    let mut best: Option<usize> = None;
    for (i, &m) in mean_auc.iter().enumerate() {
        if !m.is_nan() && best.is_none_or(|b| m > mean_auc[b]) {
            best = Some(i);
        }
    }
    let Some(best_index) = best else {
        return Err(TuningError::AllFailed(first_error.unwrap_or_default()));
    };
    if let Some(e) = first_error {
        debug!("grid search skipped failing combinations, first: {e}");
    }
    Ok(TuningResult {
        best: candidates[best_index].clone(),
        best_index,
        mean_auc,
        folds: INNER_FOLDS,
        fold_hash: hash,
    })
}
