//! Random forest of Gini trees on bootstrap samples.

use super::tree::{self, Criterion, FeatureSampling, Limits, Tree};
use super::{check_training, fmt_floats, ModelError, ProbabilityModel};
use crate::linalg::Matrix;
use crate::seed::{Seed, Stream};

pub const DEFAULT_TREES: usize = 500;

#[derive(Clone, Debug, PartialEq)]
pub struct RfParams {
    pub mtry: usize,
    pub max_depth: usize,
    /// Minimum rows in every leaf.
    pub min_rows: usize,
    pub min_split_improvement: f64,
    pub n_trees: usize,
    pub bootstrap: bool,
}

impl RfParams {
    pub fn new(mtry: usize, max_depth: usize, min_rows: usize, min_split_improvement: f64) -> Self {
        RfParams { mtry, max_depth, min_rows, min_split_improvement, n_trees: DEFAULT_TREES, bootstrap: true }
    }

    /// One-tree, no-bootstrap, all-features configuration without structural limits.
    pub fn single_unconstrained_tree(p: usize) -> Self {
        RfParams { mtry: p, max_depth: usize::MAX, min_rows: 1, min_split_improvement: 0.0, n_trees: 1, bootstrap: false }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.mtry < 1 || self.max_depth < 1 || self.min_rows < 1 || self.n_trees < 1 {
            return Err(ModelError::InvalidParams("rf counts must be >= 1".into()));
        }
        if !(self.min_split_improvement >= 0.0) {
            return Err(ModelError::InvalidParams("rf min_split_improvement must be >= 0".into()));
        }
        Ok(())
    }
}

pub fn train_random_forest(x: &Matrix, y: &[bool], params: &RfParams, seed: Seed) -> Result<ForestModel, ModelError> {
    check_training(x, y)?;
    params.validate()?;
    let t: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
    let limits = Limits {
        max_depth: params.max_depth,
        min_split: 2,
        min_leaf: params.min_rows,
        min_improvement: params.min_split_improvement,
    };
    let n = x.rows();
    let all_rows: Vec<usize> = (0..n).collect();
    let mtry = params.mtry.min(x.cols());
    let trees = (0..params.n_trees)
        .map(|i| {
            let mut rng = seed.child(Stream::Bootstrap, i as u64).rng();
            let rows = if params.bootstrap { tree::bootstrap_rows(n, &mut rng) } else { all_rows.clone() };
            tree::grow(x, &t, &rows, Criterion::Gini, &limits, FeatureSampling::Random { mtry, rng: &mut rng })
        })
        .collect();
    Ok(ForestModel { trees, n_features: x.cols() })
}

#[derive(Clone, Debug)]
pub struct ForestModel {
    trees: Vec<Tree>,
    n_features: usize,
}

impl ForestModel {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Mean decrease in impurity per feature, averaged over trees.
    pub fn impurity_importance(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        for t in &self.trees {
            for (o, v) in out.iter_mut().zip(t.impurity_importance()) {
                *o += v;
            }
        }
        let k = self.trees.len() as f64;
        out.iter_mut().for_each(|v| *v /= k);
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("trees {}\nimportance {}\n", self.trees.len(), fmt_floats(&self.impurity_importance()));
        for t in &self.trees {
            out.push_str(&t.to_text());
        }
        out
    }
}

impl ProbabilityModel for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}
