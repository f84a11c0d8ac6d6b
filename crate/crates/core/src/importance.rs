//! Variable importance: forest impurity, elastic-net coefficient size and
//! model-agnostic permutation importance.
//!
//! Every report sums indicator columns into their nominal parent and scales
//! scores so the largest is 100.

use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use thiserror::Error;

use crate::metrics::{auc, MetricsError};
use crate::models::{Classifier, Learner, ModelError, ProbabilityModel};
use crate::preprocess::{FeatureMap, PreprocessError, PreprocessModel};
use crate::seed::{Seed, Stream};
use crate::tabular::{TabularDataset, TabularError};
use crate::tuning::{stratified_folds, INNER_FOLDS};

pub const DEFAULT_PERMUTATION_REPEATS: usize = 10;

#[derive(Debug, Error)]
pub enum ImportanceError {
    #[error("{method} importance needs a {expected} model, got {got}")]
    WrongModel { method: Method, expected: &'static str, got: String },
    #[error("model has {model} features but the feature map lists {map}")]
    FeatureCount { model: usize, map: usize },
    #[error("permutation importance needs >= {INNER_FOLDS} rows per class")]
    ClassTooSmall,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Impurity,
    Coefficient,
    Permutation,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Impurity => "rf_impurity",
            Method::Coefficient => "en_coefficient",
            Method::Permutation => "permutation",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceReport {
    pub method: Method,
    /// `(variable, score)` sorted by descending score; equal scores keep variable order.
    pub entries: Vec<(String, f64)>,
}

impl ImportanceReport {
    /// Scales non-negative per-variable scores to max 100 and ranks them.
    pub fn from_variables(method: Method, raw: Vec<(String, f64)>) -> ImportanceReport {
        let max = raw.iter().map(|(_, v)| *v).fold(0.0, f64::max);
        let mut entries: Vec<(String, f64)> =
            raw.into_iter().map(|(n, v)| (n, if max > 0.0 { 100.0 * v / max } else { v })).collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1));
        ImportanceReport { method, entries }
    }

    /// Sums feature scores into their parent variables first.
    pub fn from_features(method: Method, features: &FeatureMap, raw: &[f64]) -> ImportanceReport {
        let vars = features
            .groups()
            .into_iter()
            .map(|(parent, idx)| (parent, idx.iter().map(|&i| raw[i]).sum()))
            .collect();
        Self::from_variables(method, vars)
    }

    pub fn score(&self, variable: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == variable).map(|(_, v)| *v)
    }

    pub fn rank(&self, variable: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == variable).map(|r| r + 1)
    }

    /// `rank,variable,score,method`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "rank,variable,score,method")?;
        for (i, (n, v)) in self.entries.iter().enumerate() {
            writeln!(w, "{},{n},{v:.4},{}", i + 1, self.method)?;
        }
        Ok(())
    }
}

fn check_width(model: &Classifier, features: &FeatureMap) -> Result<(), ImportanceError> {
    if model.n_features() != features.len() {
        return Err(ImportanceError::FeatureCount { model: model.n_features(), map: features.len() });
    }
    Ok(())
}

pub fn rf_impurity_importance(model: &Classifier, features: &FeatureMap) -> Result<ImportanceReport, ImportanceError> {
    let Classifier::Rf(forest) = model else {
        return Err(ImportanceError::WrongModel { method: Method::Impurity, expected: "rf", got: model.algorithm().to_string() });
    };
    check_width(model, features)?;
    Ok(ImportanceReport::from_features(Method::Impurity, features, &forest.impurity_importance()))
}

pub fn en_coefficient_importance(model: &Classifier, features: &FeatureMap) -> Result<ImportanceReport, ImportanceError> {
    let Classifier::En(en) = model else {
        return Err(ImportanceError::WrongModel { method: Method::Coefficient, expected: "en", got: model.algorithm().to_string() });
    };
    check_width(model, features)?;
    let raw: Vec<f64> = en.coefficients().iter().map(|b| b.abs()).collect();
    Ok(ImportanceReport::from_features(Method::Coefficient, features, &raw))
}

/// Mean held-out AUC drop when one variable's columns are shuffled.
///
/// Folds are stratified 5-fold from `seed`; each fold preprocesses on its
/// training part, fits `learner`, and for every variable shuffles that
/// variable's transformed columns jointly within the held-out rows
/// `repeats` times. Variables dropped by a fold's preprocessing contribute
/// a zero drop for that fold.
pub fn permutation_importance<L: Learner>(
    ds: &TabularDataset,
    learner: &L,
    neighbors: usize,
    seed: Seed,
    repeats: usize,
) -> Result<ImportanceReport, ImportanceError> {
    let y = ds.outcome();
    let pos = ds.positives();
    if pos < INNER_FOLDS || y.len() - pos < INNER_FOLDS {
        return Err(ImportanceError::ClassTooSmall);
    }
    let variables: Vec<String> = ds.schema().columns().iter().map(|c| c.name.clone()).collect();
    let folds = stratified_folds(y, INNER_FOLDS, seed.child(Stream::Permutation, 0));
    let mut total = vec![0.0; variables.len()];
    for k in 0..INNER_FOLDS {
        let held: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == k).collect();
        let (test, train) = ds.split_rows(&held)?;
        let prep = PreprocessModel::fit(&train, neighbors)?;
        let dtrain = prep.transform(&train)?;
        let dtest = prep.transform(&test)?;
        let model = learner.fit(&dtrain.x, &dtrain.y, seed.child(Stream::Model, k as u64))?;
        let base = auc(&model.predict_proba(&dtest.x)?, &dtest.y)?;
        let groups = dtest.features.groups();
        let fold_seed = seed.child(Stream::Permutation, 1 + k as u64);
        let drops: Vec<Result<(String, f64), ImportanceError>> = groups
            .par_iter()
            .enumerate()
            .map(|(g, (name, cols))| {
                let mut sum = 0.0;
                for r in 0..repeats {
                    let mut rng = fold_seed.child(Stream::Permutation, ((g as u64) << 20) | r as u64).rng();
                    let mut order: Vec<usize> = (0..dtest.x.rows()).collect();
                    order.shuffle(&mut rng);
                    let mut xp = dtest.x.clone();
                    for (dst, &src) in order.iter().enumerate() {
                        for &c in cols {
                            xp.set(dst, c, dtest.x.get(src, c));
                        }
                    }
                    sum += base - auc(&model.predict_proba(&xp)?, &dtest.y)?;
                }
                Ok((name.clone(), sum / repeats as f64))
            })
            .collect();
        for d in drops {
            let (name, drop) = d?;
            if let Some(v) = variables.iter().position(|n| *n == name) {
                total[v] += drop;
            }
        }
    }
    let raw = variables
        .into_iter()
        .zip(total)
        .map(|(n, t)| (n, (t / INNER_FOLDS as f64).max(0.0)))
        .collect();
    Ok(ImportanceReport::from_variables(Method::Permutation, raw))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(names: &[&str], parents: &[&str]) -> FeatureMap {
        FeatureMap {
            names: names.iter().map(|s| s.to_string()).collect(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn coefficient_rescaling() {
        let f = map(&["a", "b", "c"], &["a", "b", "c"]);
        let r = ImportanceReport::from_features(Method::Coefficient, &f, &[2.0, 4.0, 1.0]);
        assert_eq!(r.score("a"), Some(50.0));
        assert_eq!(r.score("b"), Some(100.0));
        assert_eq!(r.score("c"), Some(25.0));
        assert_eq!(r.rank("b"), Some(1));
    }

    #[test]
    fn all_zero_scores_stay_zero() {
        let f = map(&["a", "b"], &["a", "b"]);
        let r = ImportanceReport::from_features(Method::Coefficient, &f, &[0.0, 0.0]);
        assert!(r.entries.iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn dummies_aggregate_into_parent() {
        let f = map(&["x", "g_b", "g_c"], &["x", "g", "g"]);
        let r = ImportanceReport::from_features(Method::Impurity, &f, &[1.0, 0.5, 1.5]);
        assert_eq!(r.entries.len(), 2);
        assert_eq!(r.score("g"), Some(100.0));
        assert_eq!(r.score("x"), Some(50.0));
    }

    #[test]
    fn csv_layout() {
        let r = ImportanceReport::from_variables(Method::Permutation, vec![("a".into(), 1.0), ("b".into(), 3.0)]);
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "rank,variable,score,method\n1,b,100.0000,permutation\n2,a,33.3333,permutation\n"
        );
    }
}
