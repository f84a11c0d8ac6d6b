//! Penalised logistic regression fitted by proximal Newton with cyclic
//! coordinate descent on each weighted least-squares subproblem.
//!
//! The objective is `mean deviance + λ(α‖β‖₁ + (1−α)/2 ‖β‖²)`. Since the
//! deviance is twice the negative log-likelihood this equals twice
//! `mean NLL + (λ/2)(α‖β‖₁ + (1−α)/2 ‖β‖²)`, which is what the solver works on.

use super::{canonicalize, check_training, fmt_floats, logit, sigmoid, Algorithm, ModelError, ProbabilityModel};
use crate::linalg::{dot, Matrix};

pub const TOLERANCE: f64 = 1e-7;
pub const MAX_SWEEPS: usize = 100_000;
const MIN_WEIGHT: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct EnParams {
    pub lambda: f64,
    pub alpha: f64,
}

impl EnParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(ModelError::InvalidParams("en lambda must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ModelError::InvalidParams("en alpha must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

fn soft_threshold(u: f64, t: f64) -> f64 {
    if u > t {
        u - t
    } else if u < -t {
        u + t
    } else {
        0.0
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() }
}

struct Problem<'a> {
    x: &'a Matrix,
    y: Vec<f64>,
    /// Penalty weight on the NLL scale, `λ/2`.
    lam: f64,
    alpha: f64,
}

impl Problem<'_> {
    fn eta(&self, b0: f64, beta: &[f64]) -> Vec<f64> {
        (0..self.x.rows()).map(|i| b0 + dot(self.x.row(i), beta)).collect()
    }

    fn objective(&self, b0: f64, beta: &[f64]) -> f64 {
        let eta = self.eta(b0, beta);
        let nll: f64 = eta.iter().zip(&self.y).map(|(&e, &t)| softplus(e) - t * e).sum::<f64>() / self.y.len() as f64;
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        let l2: f64 = beta.iter().map(|b| b * b).sum();
        nll + self.lam * (self.alpha * l1 + 0.5 * (1.0 - self.alpha) * l2)
    }
}

pub fn train_elastic_net(x: &Matrix, y: &[bool], params: &EnParams) -> Result<ElasticNetModel, ModelError> {
    check_training(x, y)?;
    params.validate()?;
    let (x, y) = canonicalize(x, y);
    let n = x.rows();
    let p = x.cols();
    let nf = n as f64;
    let npos = y.iter().filter(|&&b| b).count();
    let mut b0 = logit(npos as f64 / nf);
    let mut beta = vec![0.0; p];
    if npos == 0 || npos == n {
        return Ok(ElasticNetModel { intercept: b0, coefficients: beta, params: params.clone(), sweeps: 0 });
    }
    let prob = Problem { x: &x, y: y.iter().map(|&b| f64::from(u8::from(b))).collect(), lam: params.lambda / 2.0, alpha: params.alpha };
    let l1 = prob.lam * prob.alpha;
    let l2 = prob.lam * (1.0 - prob.alpha);
    let cols: Vec<Vec<f64>> = (0..p).map(|j| x.column(j)).collect();

    let mut sweeps = 0usize;
    let mut obj = prob.objective(b0, &beta);
    loop {
        let eta = prob.eta(b0, &beta);
        let mut w = vec![0.0; n];
        // Working residual z − η of the quadratic model.
        let mut res = vec![0.0; n];
        for i in 0..n {
            let pi = sigmoid(eta[i]);
            w[i] = (pi * (1.0 - pi)).max(MIN_WEIGHT);
            res[i] = (prob.y[i] - pi) / w[i];
        }
        let wsum: f64 = w.iter().sum();
        let v: Vec<f64> = cols.iter().map(|c| c.iter().zip(&w).map(|(a, wi)| wi * a * a).sum::<f64>() / nf).collect();

        let (mut c0, mut c) = (b0, beta.clone());
        loop {
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(ModelError::NonConvergence {
                    algorithm: Algorithm::En,
                    detail: format!("{MAX_SWEEPS} coordinate sweeps exhausted"),
                });
            }
            let d0 = res.iter().zip(&w).map(|(r, wi)| wi * r).sum::<f64>() / wsum;
            c0 += d0;
            res.iter_mut().for_each(|r| *r -= d0);
            let mut max_change = d0.abs();
            for j in 0..p {
                let denom = v[j] + l2;
                if denom <= 0.0 {
                    continue;
                }
                let col = &cols[j];
                let grad: f64 = (0..n).map(|i| w[i] * col[i] * res[i]).sum::<f64>() / nf;
                let updated = soft_threshold(grad + v[j] * c[j], l1) / denom;
                let delta = updated - c[j];
                if delta != 0.0 {
                    c[j] = updated;
                    for i in 0..n {
                        res[i] -= delta * col[i];
                    }
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < TOLERANCE {
                break;
            }
        }

        // Backtracking along the Newton direction on the true objective.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let t0 = b0 + step * (c0 - b0);
            let tb: Vec<f64> = beta.iter().zip(&c).map(|(b, cj)| b + step * (cj - b)).collect();
            let o = prob.objective(t0, &tb);
            if o <= obj {
                accepted = Some((t0, tb, o));
                break;
            }
            step *= 0.5;
        }
        let Some((t0, tb, o)) = accepted else { break };
        let change = beta.iter().zip(&tb).map(|(a, b)| (a - b).abs()).fold((t0 - b0).abs(), f64::max);
        b0 = t0;
        beta = tb;
        obj = o;
        if change < TOLERANCE {
            break;
        }
    }
    Ok(ElasticNetModel { intercept: b0, coefficients: beta, params: params.clone(), sweeps })
}

#[derive(Clone, Debug)]
pub struct ElasticNetModel {
    intercept: f64,
    coefficients: Vec<f64>,
    params: EnParams,
    sweeps: usize,
}

impl ElasticNetModel {
    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn to_text(&self) -> String {
        format!(
            "lambda {:?}\nalpha {:?}\nintercept {:?}\ncoefficients {}\n",
            self.params.lambda,
            self.params.alpha,
            self.intercept,
            fmt_floats(&self.coefficients)
        )
    }
}

impl ProbabilityModel for ElasticNetModel {
    fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.intercept + dot(row, &self.coefficients))
    }
}
