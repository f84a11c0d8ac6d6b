//! Binary decision-tree grower shared by CART, random forest and GBM.
//!
//! Splits are exhaustive over each candidate feature's midpoints between
//! sorted distinct values. Equal impurity decreases resolve to the lowest
//! feature index, then the lowest threshold. Rows with `x <= threshold`
//! go left.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::Matrix;

/// Smallest impurity decrease treated as a real improvement.
const MIN_DECREASE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    /// Two-class Gini impurity on 0/1 targets, `2p(1 − p)`.
    Gini,
    /// Variance of real-valued targets.
    SquaredError,
}

impl Criterion {
    fn impurity(self, n: f64, sum: f64, sumsq: f64) -> f64 {
        if n <= 0.0 {
            return 0.0;
        }
        let mean = sum / n;
        match self {
            Criterion::Gini => 2.0 * mean * (1.0 - mean),
            Criterion::SquaredError => (sumsq / n - mean * mean).max(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Limits {
    /// Root has depth 0; a node at `max_depth` is never split.
    pub max_depth: usize,
    /// Minimum rows in a node for a split to be attempted.
    pub min_split: usize,
    /// Minimum rows in each child.
    pub min_leaf: usize,
    /// Minimum per-node impurity decrease for a split to be accepted.
    pub min_improvement: f64,
}

impl Limits {
    pub fn unconstrained() -> Self {
        Limits { max_depth: usize::MAX, min_split: 2, min_leaf: 1, min_improvement: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// `I(node) − (n_L/n) I(L) − (n_R/n) I(R)`.
    pub decrease: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub n: usize,
    pub sum: f64,
    pub impurity: f64,
    /// Leaf prediction; the target mean unless overwritten (GBM).
    pub value: f64,
    pub split: Option<Split>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
    /// Rows the tree was grown on (after any bootstrap).
    pub n_train: usize,
}

pub enum FeatureSampling<'a> {
    All,
    /// `mtry` features drawn uniformly without replacement at every split.
    Random { mtry: usize, rng: &'a mut ChaCha8Rng },
}

struct Grower<'a, 'b> {
    x: &'a Matrix,
    targets: &'a [f64],
    criterion: Criterion,
    limits: &'a Limits,
    sampling: FeatureSampling<'b>,
    nodes: Vec<Node>,
}

pub fn grow(
    x: &Matrix,
    targets: &[f64],
    rows: &[usize],
    criterion: Criterion,
    limits: &Limits,
    sampling: FeatureSampling<'_>,
) -> Tree {
    assert!(!rows.is_empty(), "cannot grow a tree on zero rows");
    let mut g = Grower { x, targets, criterion, limits, sampling, nodes: Vec::new() };
    let mut rows = rows.to_vec();
    g.build(&mut rows, 0);
    Tree { nodes: g.nodes, n_features: x.cols(), n_train: rows.len() }
}

impl Grower<'_, '_> {
    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let n = rows.len();
        let (sum, sumsq) = rows.iter().fold((0.0, 0.0), |(s, q), &r| {
            let t = self.targets[r];
            (s + t, q + t * t)
        });
        let impurity = self.criterion.impurity(n as f64, sum, sumsq);
        let id = self.nodes.len();
        self.nodes.push(Node { n, sum, impurity, value: sum / n as f64, split: None });

        if depth >= self.limits.max_depth || n < self.limits.min_split || n < 2 * self.limits.min_leaf.max(1) {
            return id;
        }
        let Some((feature, threshold, decrease)) = self.best_split(rows, impurity, sum, sumsq) else {
            return id;
        };
        if decrease <= MIN_DECREASE || decrease < self.limits.min_improvement {
            return id;
        }
        // Stable partition keeps row order within each child.
        let (mut left, mut right): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.x.get(r, feature) <= threshold);
        let l = self.build(&mut left, depth + 1);
        let r = self.build(&mut right, depth + 1);
        self.nodes[id].split = Some(Split { feature, threshold, decrease, left: l, right: r });
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.cols();
        match &mut self.sampling {
            FeatureSampling::Random { mtry, rng } if *mtry < p => {
                let mut f = rand::seq::index::sample(&mut **rng, p, *mtry).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize], impurity: f64, sum: f64, sumsq: f64) -> Option<(usize, f64, f64)> {
        let n = rows.len();
        let nf = n as f64;
        let min_leaf = self.limits.min_leaf.max(1);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order: Vec<(f64, f64)> = Vec::with_capacity(n);
        for f in self.candidate_features() {
            order.clear();
            order.extend(rows.iter().map(|&r| (self.x.get(r, f), self.targets[r])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            if order[0].0 == order[n - 1].0 {
                continue;
            }
            let (mut ls, mut lq) = (0.0, 0.0);
            for k in 1..n {
                let t = order[k - 1].1;
                ls += t;
                lq += t * t;
                if k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let (lo, hi) = (order[k - 1].0, order[k].0);
                if lo == hi {
                    continue;
                }
                let kl = k as f64;
                let kr = nf - kl;
                let il = self.criterion.impurity(kl, ls, lq);
                let ir = self.criterion.impurity(kr, sum - ls, sumsq - lq);
                let decrease = impurity - (kl / nf) * il - (kr / nf) * ir;
                if best.is_none_or(|b| decrease > b.2) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((f, threshold, decrease));
                }
            }
        }
        best
    }
}

impl Tree {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        while let Some(s) = &self.nodes[i].split {
            i = if row[s.feature] <= s.threshold { s.left } else { s.right };
        }
        i
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.nodes[self.leaf_index(row)].value
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_none()).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match &t.nodes[i].split {
                None => 0,
                Some(s) => 1 + walk(t, s.left).max(walk(t, s.right)),
            }
        }
        walk(self, 0)
    }

    /// Per-feature sum of `(n_node / n_train) × decrease` over all splits.
    pub fn impurity_importance(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        for node in &self.nodes {
            if let Some(s) = &node.split {
                out[s.feature] += node.n as f64 / self.n_train as f64 * s.decrease;
            }
        }
        out
    }

    /// Copy of the subtree reachable from the root, with nodes renumbered in preorder.
    pub fn compact(&self) -> Tree {
        fn copy(src: &Tree, i: usize, out: &mut Vec<Node>) -> usize {
            let id = out.len();
            let mut node = src.nodes[i].clone();
            node.split = None;
            out.push(node);
            if let Some(s) = &src.nodes[i].split {
                let l = copy(src, s.left, out);
                let r = copy(src, s.right, out);
                out[id].split = Some(Split { left: l, right: r, ..s.clone() });
            }
            id
        }
        let mut nodes = Vec::new();
        copy(self, 0, &mut nodes);
        Tree { nodes, n_features: self.n_features, n_train: self.n_train }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("tree nodes={} train_rows={}\n", self.nodes.len(), self.n_train);
        for (i, n) in self.nodes.iter().enumerate() {
            match &n.split {
                Some(s) => out.push_str(&format!(
                    "{i} split f={} t={:?} dec={:?} l={} r={} n={}\n",
                    s.feature, s.threshold, s.decrease, s.left, s.right, n.n
                )),
                None => out.push_str(&format!("{i} leaf v={:?} n={}\n", n.value, n.n)),
            }
        }
        out
    }
}

/// Draws `n` row indices with replacement.
pub fn bootstrap_rows(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}
