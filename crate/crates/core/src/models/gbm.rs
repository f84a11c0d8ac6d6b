//! Stagewise logistic gradient boosting with Newton leaf values.
//!
//! Each stage fits a squared-error regression tree to the residual `y − p`
//! and replaces every leaf mean with `Σr / Σp(1−p)`. If a stage would raise
//! the training log-loss its step is halved until it does not, so the loss
//! history is non-increasing by construction.

use super::tree::{self, Criterion, FeatureSampling, Limits, Tree};
use super::{check_training, fmt_floats, logit, sigmoid, ModelError, ProbabilityModel, MAX_LOG_ODDS};
use crate::linalg::Matrix;

const MIN_HESSIAN: f64 = 1e-12;
const MAX_HALVINGS: usize = 30;

#[derive(Clone, Debug, PartialEq)]
pub struct GbmParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learn_rate: f64,
    pub min_rows: usize,
    pub min_split_improvement: f64,
}

impl GbmParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_trees < 1 || self.max_depth < 1 || self.min_rows < 1 {
            return Err(ModelError::InvalidParams("gbm counts must be >= 1".into()));
        }
        if !(self.learn_rate > 0.0) {
            return Err(ModelError::InvalidParams("gbm learn_rate must be > 0".into()));
        }
        if !(self.min_split_improvement >= 0.0) {
            return Err(ModelError::InvalidParams("gbm min_split_improvement must be >= 0".into()));
        }
        Ok(())
    }
}

fn log_loss(f: &[f64], y: &[bool]) -> f64 {
    let total: f64 = f
        .iter()
        .zip(y)
        .map(|(&z, &label)| {
            let m = if label { -z } else { z };
            // log(1 + e^m), stable.
            if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() }
        })
        .sum();
    total / f.len() as f64
}

pub fn train_gbm(x: &Matrix, y: &[bool], params: &GbmParams) -> Result<GbmModel, ModelError> {
    check_training(x, y)?;
    params.validate()?;
    let n = x.rows();
    let rate = y.iter().filter(|&&b| b).count() as f64 / n as f64;
    let f0 = logit(rate);
    let mut f = vec![f0; n];
    let mut loss_history = vec![log_loss(&f, y)];
    let limits = Limits {
        max_depth: params.max_depth,
        min_split: 2,
        min_leaf: params.min_rows,
        min_improvement: params.min_split_improvement,
    };
    let rows: Vec<usize> = (0..n).collect();
    let mut stages = Vec::with_capacity(params.n_trees);
    let mut trial = vec![0.0; n];
    for _ in 0..params.n_trees {
        let p: Vec<f64> = f.iter().map(|&z| sigmoid(z)).collect();
        let r: Vec<f64> = y.iter().zip(&p).map(|(&label, &pi)| f64::from(u8::from(label)) - pi).collect();
        let mut t = tree::grow(x, &r, &rows, Criterion::SquaredError, &limits, FeatureSampling::All);
        let mut num = vec![0.0; t.nodes.len()];
        let mut den = vec![0.0; t.nodes.len()];
        let leaves: Vec<usize> = (0..n).map(|i| t.leaf_index(x.row(i))).collect();
        for (i, &leaf) in leaves.iter().enumerate() {
            num[leaf] += r[i];
            den[leaf] += p[i] * (1.0 - p[i]);
        }
        for (k, node) in t.nodes.iter_mut().enumerate() {
            if node.split.is_none() {
                let gamma = num[k] / den[k].max(MIN_HESSIAN);
                node.value = params.learn_rate * gamma.clamp(-MAX_LOG_ODDS, MAX_LOG_ODDS);
            }
        }
        let prev = *loss_history.last().expect("non-empty history");
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            for i in 0..n {
                trial[i] = (f[i] + scale * t.nodes[leaves[i]].value).clamp(-MAX_LOG_ODDS, MAX_LOG_ODDS);
            }
            let loss = log_loss(&trial, y);
            if loss <= prev {
                accepted = Some(loss);
                break;
            }
            scale *= 0.5;
        }
        let loss = match accepted {
            Some(loss) => {
                f.copy_from_slice(&trial);
                loss
            }
            None => {
                scale = 0.0;
                prev
            }
        };
        for node in t.nodes.iter_mut() {
            node.value *= scale;
        }
        loss_history.push(loss);
        stages.push(t);
    }
    Ok(GbmModel { f0, stages, loss_history, n_features: x.cols() })
}

#[derive(Clone, Debug)]
pub struct GbmModel {
    f0: f64,
    stages: Vec<Tree>,
    loss_history: Vec<f64>,
    n_features: usize,
}

impl GbmModel {
    pub fn initial_score(&self) -> f64 {
        self.f0
    }

    /// Training log-loss before the first stage and after each stage.
    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    pub fn stages(&self) -> &[Tree] {
        &self.stages
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("f0 {:?}\nstages {}\nloss {}\n", self.f0, self.stages.len(), fmt_floats(&self.loss_history));
        for t in &self.stages {
            out.push_str(&t.to_text());
        }
        out
    }
}

impl ProbabilityModel for GbmModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        let mut f = self.f0;
        for t in &self.stages {
            f = (f + t.predict(row)).clamp(-MAX_LOG_ODDS, MAX_LOG_ODDS);
        }
        sigmoid(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testdata;

    fn params(n_trees: usize, max_depth: usize, learn_rate: f64) -> GbmParams {
        GbmParams { n_trees, max_depth, learn_rate, min_rows: 1, min_split_improvement: 0.0 }
    }

    #[test]
    fn stump_recovers_cart_threshold() {
        let (x, y) = testdata::threshold_1d();
        let m = train_gbm(&x, &y, &params(1, 1, 1.0)).unwrap();
        let s = m.stages()[0].nodes[0].split.as_ref().unwrap();
        assert!((s.threshold - 0.05).abs() < 1e-12);
    }

    #[test]
    fn tiny_learn_rate_stays_at_base_rate() {
        let (x, y) = testdata::blobs(60, 2, 0.5, 3);
        let m = train_gbm(&x, &y, &params(1, 3, 1e-9)).unwrap();
        for p in m.predict_proba(&x).unwrap() {
            assert!((p - 0.5).abs() < 1e-8);
        }
        assert_eq!(sigmoid(m.initial_score()), 0.5);
    }

    #[test]
    fn loss_is_non_increasing() {
        let (x, y) = testdata::blobs(120, 3, 0.3, 6);
        let m = train_gbm(&x, &y, &params(50, 25, 0.11)).unwrap();
        assert!(m.loss_history().windows(2).all(|w| w[1] <= w[0]));
        assert!(m.loss_history().last().unwrap() < &m.loss_history()[0]);
    }

    #[test]
    fn single_class_is_clipped() {
        let x = Matrix::new(5, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        let m = train_gbm(&x, &[true; 5], &params(3, 2, 0.1)).unwrap();
        let p = m.predict_proba(&x).unwrap();
        assert!(p.iter().all(|v| v.is_finite() && *v > 0.99));
    }
}
