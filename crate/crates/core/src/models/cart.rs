//! Single classification tree with cost-complexity pruning.
//!
//! The node risk used for pruning is `R(t) = (n_t / N) · Gini(t)`, so the
//! whole-number complexity index maps to `α = cp_index × 1e-4` on the same
//! scale as the impurity decreases reported by the grower.

use super::tree::{self, Criterion, FeatureSampling, Limits, Tree};
use super::{canonicalize, check_training, ModelError, ProbabilityModel};
use crate::linalg::Matrix;

pub const CP_SCALE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct CartParams {
    pub cp_index: u32,
    pub min_split: usize,
    pub min_bucket: usize,
}

impl Default for CartParams {
    fn default() -> Self {
        CartParams { cp_index: 1, min_split: 20, min_bucket: 7 }
    }
}

impl CartParams {
    pub fn with_cp(cp_index: u32) -> Self {
        CartParams { cp_index, ..Self::default() }
    }

    pub fn alpha(&self) -> f64 {
        self.cp_index as f64 * CP_SCALE
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.min_split < 1 || self.min_bucket < 1 {
            return Err(ModelError::InvalidParams("cart minsplit and minbucket must be >= 1".into()));
        }
        Ok(())
    }

    /// Whether two parameter sets grow the same unpruned tree.
    pub fn same_growth(&self, other: &CartParams) -> bool {
        self.min_split == other.min_split && self.min_bucket == other.min_bucket
    }

    fn limits(&self) -> Limits {
        Limits { max_depth: usize::MAX, min_split: self.min_split, min_leaf: self.min_bucket, min_improvement: 0.0 }
    }
}

/// A fully grown tree awaiting pruning.
#[derive(Clone, Debug)]
pub struct CartGrowth {
    tree: Tree,
}

impl CartGrowth {
    pub fn grow(x: &Matrix, y: &[bool], params: &CartParams) -> Result<CartGrowth, ModelError> {
        check_training(x, y)?;
        params.validate()?;
        let (x, y) = canonicalize(x, y);
        let t: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
        let rows: Vec<usize> = (0..x.rows()).collect();
        let tree = tree::grow(&x, &t, &rows, Criterion::Gini, &params.limits(), FeatureSampling::All);
        Ok(CartGrowth { tree })
    }

    pub fn unpruned(&self) -> &Tree {
        &self.tree
    }

    pub fn prune(&self, params: &CartParams) -> Result<CartModel, ModelError> {
        params.validate()?;
        let alpha = params.alpha();
        let mut tree = self.tree.clone();
        let total = tree.n_train as f64;
        prune_node(&mut tree, 0, alpha, total);
        Ok(CartModel { tree: tree.compact(), params: params.clone() })
    }
}

/// Bottom-up minimisation of `R(T) + α·|leaves(T)|`; returns the subtree cost.
fn prune_node(tree: &mut Tree, i: usize, alpha: f64, total: f64) -> f64 {
    let node = &tree.nodes[i];
    let leaf_cost = node.n as f64 / total * node.impurity + alpha;
    let Some(split) = node.split.clone() else {
        return leaf_cost;
    };
    let below = prune_node(tree, split.left, alpha, total) + prune_node(tree, split.right, alpha, total);
    if leaf_cost <= below {
        tree.nodes[i].split = None;
        leaf_cost
    } else {
        below
    }
}

pub fn train_cart(x: &Matrix, y: &[bool], params: &CartParams) -> Result<CartModel, ModelError> {
    CartGrowth::grow(x, y, params)?.prune(params)
}

#[derive(Clone, Debug)]
pub struct CartModel {
    tree: Tree,
    params: CartParams,
}

impl CartModel {
    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn params(&self) -> &CartParams {
        &self.params
    }

    pub fn to_text(&self) -> String {
        format!(
            "cp_index {}\nminsplit {}\nminbucket {}\n{}",
            self.params.cp_index,
            self.params.min_split,
            self.params.min_bucket,
            self.tree.to_text()
        )
    }
}

impl ProbabilityModel for CartModel {
    fn n_features(&self) -> usize {
        self.tree.n_features
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        self.tree.predict(row)
    }
}
