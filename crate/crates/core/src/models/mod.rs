//! The six binary classifiers and their hyperparameters.
//!
//! Every trainer takes a fully numeric design matrix with a boolean outcome
//! (`true` = positive) and returns a model exposing a positive-class
//! probability. Deterministic trainers (EN, SVM, GP, CART) first sort the
//! training rows into a canonical content order, so permuting the training
//! rows never changes their output. RF draws bootstrap rows and split
//! features from the injected seed.

pub mod cart;
pub mod elastic_net;
pub mod forest;
pub mod gbm;
pub mod gp;
pub mod quadrature;
pub mod svm;
pub mod tree;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::Matrix;
use crate::seed::Seed;

pub use cart::{CartModel, CartParams};
pub use elastic_net::{ElasticNetModel, EnParams};
pub use forest::{ForestModel, RfParams};
pub use gbm::{GbmModel, GbmParams};
pub use gp::{GpModel, GpParams};
pub use svm::{SvmModel, SvmParams};

/// Internal log-odds are clipped to this magnitude.
pub const MAX_LOG_ODDS: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid training input: {0}")]
    InvalidInput(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("{algorithm} did not converge: {detail}")]
    NonConvergence { algorithm: Algorithm, detail: String },
    #[error("model expects {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Rf,
    Svm,
    Gbm,
    En,
    Gp,
    Cart,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] =
        [Algorithm::Rf, Algorithm::Svm, Algorithm::Gbm, Algorithm::En, Algorithm::Gp, Algorithm::Cart];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rf => "rf",
            Algorithm::Svm => "svm",
            Algorithm::Gbm => "gbm",
            Algorithm::En => "en",
            Algorithm::Gp => "gp",
            Algorithm::Cart => "cart",
        }
    }

    /// Row label used in metrics tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Algorithm::Rf => "Random Forest",
            Algorithm::Svm => "SVM with Radial Kernel",
            Algorithm::Gbm => "GBM",
            Algorithm::En => "Elastic Net",
            Algorithm::Gp => "Gaussian Process",
            Algorithm::Cart => "CART",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rf" | "random_forest" => Ok(Algorithm::Rf),
            "svm" | "svm_rbf" => Ok(Algorithm::Svm),
            "gbm" => Ok(Algorithm::Gbm),
            "en" | "elastic_net" | "glmnet" => Ok(Algorithm::En),
            "gp" | "gp_rbf" => Ok(Algorithm::Gp),
            "cart" | "rpart" => Ok(Algorithm::Cart),
            other => Err(format!("unknown algorithm `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum HyperParams {
    Rf(RfParams),
    Svm(SvmParams),
    Gbm(GbmParams),
    En(EnParams),
    Gp(GpParams),
    Cart(CartParams),
}

impl HyperParams {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            HyperParams::Rf(_) => Algorithm::Rf,
            HyperParams::Svm(_) => Algorithm::Svm,
            HyperParams::Gbm(_) => Algorithm::Gbm,
            HyperParams::En(_) => Algorithm::En,
            HyperParams::Gp(_) => Algorithm::Gp,
            HyperParams::Cart(_) => Algorithm::Cart,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            HyperParams::Rf(p) => p.validate(),
            HyperParams::Svm(p) => p.validate(),
            HyperParams::Gbm(p) => p.validate(),
            HyperParams::En(p) => p.validate(),
            HyperParams::Gp(p) => p.validate(),
            HyperParams::Cart(p) => p.validate(),
        }
    }

    pub fn train(&self, x: &Matrix, y: &[bool], seed: Seed) -> Result<Classifier, ModelError> {
        Ok(match self {
            HyperParams::Rf(p) => Classifier::Rf(forest::train_random_forest(x, y, p, seed)?),
            HyperParams::Svm(p) => Classifier::Svm(svm::train_svm_rbf(x, y, p, seed)?),
            HyperParams::Gbm(p) => Classifier::Gbm(gbm::train_gbm(x, y, p)?),
            HyperParams::En(p) => Classifier::En(elastic_net::train_elastic_net(x, y, p)?),
            HyperParams::Gp(p) => Classifier::Gp(gp::train_gp_rbf(x, y, p)?),
            HyperParams::Cart(p) => Classifier::Cart(cart::train_cart(x, y, p)?),
        })
    }
}

impl fmt::Display for HyperParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperParams::Rf(p) => write!(
                f,
                "rf(mtry={}, max_depth={}, min_rows={}, min_split_improvement={}, n_trees={}, bootstrap={})",
                p.mtry, p.max_depth, p.min_rows, p.min_split_improvement, p.n_trees, p.bootstrap
            ),
            HyperParams::Svm(p) => write!(f, "svm(C={}, sigma={})", p.cost, p.sigma),
            HyperParams::Gbm(p) => write!(
                f,
                "gbm(n_trees={}, max_depth={}, learn_rate={}, min_rows={}, min_split_improvement={})",
                p.n_trees, p.max_depth, p.learn_rate, p.min_rows, p.min_split_improvement
            ),
            HyperParams::En(p) => write!(f, "en(lambda={}, alpha={})", p.lambda, p.alpha),
            HyperParams::Gp(p) => write!(f, "gp(sigma={})", p.sigma),
            HyperParams::Cart(p) => write!(
                f,
                "cart(cp_index={}, minsplit={}, minbucket={})",
                p.cp_index, p.min_split, p.min_bucket
            ),
        }
    }
}

/// Anything that predicts a positive-class probability for a feature row.
pub trait ProbabilityModel {
    fn n_features(&self) -> usize;

    /// Probability for one row; callers have checked the row width.
    fn predict_row(&self, row: &[f64]) -> f64;

    fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>, ModelError> {
        if x.cols() != self.n_features() {
            return Err(ModelError::DimensionMismatch { expected: self.n_features(), got: x.cols() });
        }
        Ok((0..x.rows()).map(|i| clamp_probability(self.predict_row(x.row(i)))).collect())
    }
}

/// A trainable configuration. [`HyperParams`] is the production implementor;
/// tests plug in their own.
pub trait Learner: Clone + Send + Sync + fmt::Display {
    type Model: ProbabilityModel + Send + Sync;

    fn fit(&self, x: &Matrix, y: &[bool], seed: Seed) -> Result<Self::Model, ModelError>;

    /// Fits every candidate on one training split and scores `x_valid`.
    /// The result is in candidate order regardless of evaluation order.
    fn fit_and_score(
        candidates: &[Self],
        x: &Matrix,
        y: &[bool],
        x_valid: &Matrix,
        seed: Seed,
    ) -> Vec<Result<Vec<f64>, ModelError>> {
        candidates
            .par_iter()
            .map(|c| c.fit(x, y, seed).and_then(|m| m.predict_proba(x_valid)))
            .collect()
    }
}

impl Learner for HyperParams {
    type Model = Classifier;

    fn fit(&self, x: &Matrix, y: &[bool], seed: Seed) -> Result<Classifier, ModelError> {
        self.train(x, y, seed)
    }

    /// CART candidates that differ only in the pruning penalty share one
    /// grown tree; each is a pruning of it, identical to training separately.
    fn fit_and_score(
        candidates: &[Self],
        x: &Matrix,
        y: &[bool],
        x_valid: &Matrix,
        seed: Seed,
    ) -> Vec<Result<Vec<f64>, ModelError>> {
        let all_cart = candidates.iter().all(|c| matches!(c, HyperParams::Cart(_)));
        if !all_cart || candidates.len() < 2 {
            return candidates
                .par_iter()
                .map(|c| c.fit(x, y, seed).and_then(|m| m.predict_proba(x_valid)))
                .collect();
        }
        let params: Vec<&CartParams> = candidates
            .iter()
            .map(|c| match c {
                HyperParams::Cart(p) => p,
                _ => unreachable!("checked all_cart"),
            })
            .collect();
        let mut out: Vec<Option<Result<Vec<f64>, ModelError>>> = vec![None; candidates.len()];
        let mut done = vec![false; candidates.len()];
        for i in 0..params.len() {
            if done[i] {
                continue;
            }
            let group: Vec<usize> = (i..params.len())
                .filter(|&j| !done[j] && params[j].same_growth(params[i]))
                .collect();
            match cart::CartGrowth::grow(x, y, params[i]) {
                Ok(growth) => {
                    let scored: Vec<_> = group
                        .par_iter()
                        .map(|&j| growth.prune(params[j]).and_then(|m| m.predict_proba(x_valid)))
                        .collect();
                    for (&j, r) in group.iter().zip(scored) {
                        out[j] = Some(r);
                    }
                }
                Err(e) => {
                    for &j in &group {
                        out[j] = Some(Err(e.clone()));
                    }
                }
            }
            for &j in &group {
                done[j] = true;
            }
        }
        out.into_iter().map(|r| r.expect("every candidate scored")).collect()
    }
}

/// A trained model of one of the six algorithms.
#[derive(Clone, Debug)]
pub enum Classifier {
    Rf(ForestModel),
    Svm(SvmModel),
    Gbm(GbmModel),
    En(ElasticNetModel),
    Gp(GpModel),
    Cart(CartModel),
}

impl Classifier {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Classifier::Rf(_) => Algorithm::Rf,
            Classifier::Svm(_) => Algorithm::Svm,
            Classifier::Gbm(_) => Algorithm::Gbm,
            Classifier::En(_) => Algorithm::En,
            Classifier::Gp(_) => Algorithm::Gp,
            Classifier::Cart(_) => Algorithm::Cart,
        }
    }

    fn inner(&self) -> &dyn ProbabilityModel {
        match self {
            Classifier::Rf(m) => m,
            Classifier::Svm(m) => m,
            Classifier::Gbm(m) => m,
            Classifier::En(m) => m,
            Classifier::Gp(m) => m,
            Classifier::Cart(m) => m,
        }
    }

    /// Versioned plain-text dump of the trained state, for audit.
    pub fn to_text(&self) -> String {
        let body = match self {
            Classifier::Rf(m) => m.to_text(),
            Classifier::Svm(m) => m.to_text(),
            Classifier::Gbm(m) => m.to_text(),
            Classifier::En(m) => m.to_text(),
            Classifier::Gp(m) => m.to_text(),
            Classifier::Cart(m) => m.to_text(),
        };
        format!("nestprog-model v1\nalgorithm {}\nfeatures {}\n{body}", self.algorithm(), self.n_features())
    }
}

impl ProbabilityModel for Classifier {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        self.inner().predict_row(row)
    }
}

pub fn clamp_probability(p: f64) -> f64 {
    if p.is_nan() {
        0.5
    } else {
        p.clamp(0.0, 1.0)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    let z = z.clamp(-MAX_LOG_ODDS, MAX_LOG_ODDS);
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-6, 1.0 - 1e-6);
    (p / (1.0 - p)).ln()
}

pub(crate) fn check_training(x: &Matrix, y: &[bool]) -> Result<(), ModelError> {
    if x.rows() == 0 {
        return Err(ModelError::InvalidInput("no training rows".into()));
    }
    if x.rows() != y.len() {
        return Err(ModelError::InvalidInput(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    if x.cols() == 0 {
        return Err(ModelError::InvalidInput("no features".into()));
    }
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(ModelError::InvalidInput("non-finite feature value".into()));
    }
    Ok(())
}

/// Row order sorted by (feature bits, label); ties keep input order.
pub(crate) fn canonical_order(x: &Matrix, y: &[bool]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.rows()).collect();
    idx.sort_by(|&a, &b| {
        for (u, v) in x.row(a).iter().zip(x.row(b)) {
            match u.total_cmp(v) {
                Ordering::Equal => continue,
                other => return other,
            }
        }
        y[a].cmp(&y[b])
    });
    idx
}

pub(crate) fn canonicalize(x: &Matrix, y: &[bool]) -> (Matrix, Vec<bool>) {
    let order = canonical_order(x, y);
    (x.select_rows(&order), order.iter().map(|&i| y[i]).collect())
}

pub(crate) fn fmt_floats(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_clipped_and_finite() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(1e9) < 1.0 && sigmoid(-1e9) > 0.0);
        assert!(logit(0.0).is_finite() && logit(1.0).is_finite());
    }

    #[test]
    fn canonical_order_is_permutation_invariant() {
        let (x, y) = testdata::blobs(20, 3, 0.5, 1);
        let perm: Vec<usize> = (0..20).rev().collect();
        let (xp, yp): (Matrix, Vec<bool>) = (x.select_rows(&perm), perm.iter().map(|&i| y[i]).collect());
        assert_eq!(canonicalize(&x, &y), canonicalize(&xp, &yp));
    }

    #[test]
    fn parse_algorithm_names() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("knn".parse::<Algorithm>().is_err());
    }
}
