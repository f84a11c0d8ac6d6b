//! Soft-margin C-SVC with a radial kernel and Platt-scaled probabilities.
//!
//! The dual is solved by SMO with second-order working-set selection and the
//! usual bias rule (mean of `y·G` over free vectors, else the midpoint of the
//! feasible interval). Platt's sigmoid is fitted by a safeguarded Newton
//! method on decision values from an internal 3-fold split of the training
//! rows.

use super::{canonicalize, check_training, fmt_floats, Algorithm, ModelError, ProbabilityModel};
use crate::linalg::{squared_distance, Matrix};
use crate::seed::{Seed, Stream};
use rand::seq::SliceRandom;

pub const KKT_TOLERANCE: f64 = 1e-3;
pub const MAX_ITERATIONS: usize = 1_000_000;
pub const PLATT_FOLDS: usize = 3;
const TAU: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SvmParams {
    pub cost: f64,
    pub sigma: f64,
}

impl SvmParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.cost > 0.0) || !self.cost.is_finite() {
            return Err(ModelError::InvalidParams("svm C must be > 0".into()));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(ModelError::InvalidParams("svm sigma must be > 0".into()));
        }
        Ok(())
    }
}

pub fn rbf(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    (-sigma * squared_distance(a, b)).exp()
}

pub fn kernel_matrix(x: &Matrix, sigma: f64) -> Matrix {
    let n = x.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k.set(i, i, 1.0);
        for j in 0..i {
            let v = rbf(x.row(i), x.row(j), sigma);
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    k
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
}

impl DualSolution {
    /// `Σ_j α_j y_j K_ij − ρ` for training row `i`.
    pub fn decision_on_training(&self, k: &Matrix, y: &[f64], i: usize) -> f64 {
        (0..y.len()).map(|j| self.alpha[j] * y[j] * k.get(i, j)).sum::<f64>() - self.rho
    }
}

/// Solves `min ½αᵀQα − eᵀα` s.t. `yᵀα = 0`, `0 ≤ α ≤ C`, with `Q_ij = y_i y_j K_ij`.
pub fn solve_dual(k: &Matrix, y: &[f64], cost: f64, eps: f64, max_iter: usize) -> Result<DualSolution, ModelError> {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * k.get(i, j);
    let is_up = |a: f64, yt: f64| (yt > 0.0 && a < cost) || (yt < 0.0 && a > 0.0);
    let is_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < cost);
    let mut iterations = 0;
    loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if is_up(alpha[t], y[t]) && (i_sel.is_none() || -y[t] * grad[t] > gmax) {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                if !is_low(alpha[t], y[t]) {
                    continue;
                }
                gmax2 = gmax2.max(y[t] * grad[t]);
                let b = gmax + y[t] * grad[t];
                if b > 0.0 {
                    let mut a = q(i, i) + q(t, t) - 2.0 * y[i] * y[t] * q(i, t);
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < obj_min {
                        obj_min = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (i_sel, j_sel) else { break };
        if gmax + gmax2 < eps {
            break;
        }
        if iterations >= max_iter {
            return Err(ModelError::NonConvergence {
                algorithm: Algorithm::Svm,
                detail: format!("SMO stopped after {max_iter} iterations with gap {:.3e}", gmax + gmax2),
            });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (qii, qjj, qij) = (q(i, i), q(j, j), q(i, j));
        if y[i] != y[j] {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > cost {
                    alpha[i] = cost;
                    alpha[j] = cost - diff;
                }
            } else if alpha[j] > cost {
                alpha[j] = cost;
                alpha[i] = cost + diff;
            }
        } else {
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > cost {
                if alpha[i] > cost {
                    alpha[i] = cost;
                    alpha[j] = sum - cost;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cost {
                if alpha[j] > cost {
                    alpha[j] = cost;
                    alpha[i] = sum - cost;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= cost {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else {
        0.0
    };
    Ok(DualSolution { alpha, rho, iterations })
}

/// Decision function of a kernel expansion.
#[derive(Clone, Debug)]
struct Expansion {
    vectors: Matrix,
    /// `α_i y_i` per support vector.
    coef: Vec<f64>,
    rho: f64,
    sigma: f64,
}

impl Expansion {
    fn fit(x: &Matrix, y: &[bool], params: &SvmParams) -> Result<Expansion, ModelError> {
        let npos = y.iter().filter(|&&b| b).count();
        if npos == 0 || npos == y.len() {
            // Single-class training: decision is the constant label.
            let rho = if npos == 0 { 1.0 } else { -1.0 };
            return Ok(Expansion { vectors: Matrix::zeros(0, x.cols()), coef: Vec::new(), rho, sigma: params.sigma });
        }
        let ys: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
        let k = kernel_matrix(x, params.sigma);
        let sol = solve_dual(&k, &ys, params.cost, KKT_TOLERANCE, MAX_ITERATIONS)?;
        let sv: Vec<usize> = (0..y.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
        Ok(Expansion {
            vectors: x.select_rows(&sv),
            coef: sv.iter().map(|&i| sol.alpha[i] * ys[i]).collect(),
            rho: sol.rho,
            sigma: params.sigma,
        })
    }

    fn decision(&self, row: &[f64]) -> f64 {
        (0..self.coef.len()).map(|i| self.coef[i] * rbf(self.vectors.row(i), row, self.sigma)).sum::<f64>() - self.rho
    }
}

/// Platt sigmoid `P(y=1 | f) = 1 / (1 + exp(A f + B))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    pub fn fit(dec: &[f64], y: &[bool]) -> Platt {
        let prior1 = y.iter().filter(|&&b| b).count() as f64;
        let prior0 = y.len() as f64 - prior1;
        let hi = (prior1 + 1.0) / (prior1 + 2.0);
        let lo = 1.0 / (prior0 + 2.0);
        let t: Vec<f64> = y.iter().map(|&b| if b { hi } else { lo }).collect();
        let (min_step, sigma, max_iter) = (1e-10, 1e-12, 100);
        let objective = |a: f64, b: f64| -> f64 {
            dec.iter()
                .zip(&t)
                .map(|(&d, &ti)| {
                    let f = d * a + b;
                    if f >= 0.0 { ti * f + (-f).exp().ln_1p() } else { (ti - 1.0) * f + f.exp().ln_1p() }
                })
                .sum()
        };
        let (mut a, mut b) = (0.0, ((prior0 + 1.0) / (prior1 + 1.0)).ln());
        let mut fval = objective(a, b);
        for _ in 0..max_iter {
            let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
            for (&d, &ti) in dec.iter().zip(&t) {
                let f = d * a + b;
                let (p, q) = if f >= 0.0 {
                    let e = (-f).exp();
                    (e / (1.0 + e), 1.0 / (1.0 + e))
                } else {
                    let e = f.exp();
                    (1.0 / (1.0 + e), e / (1.0 + e))
                };
                let d2 = p * q;
                h11 += d * d * d2;
                h22 += d2;
                h21 += d * d2;
                let d1 = ti - p;
                g1 += d * d1;
                g2 += d1;
            }
            if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
                break;
            }
            let det = h11 * h22 - h21 * h21;
            let da = -(h22 * g1 - h21 * g2) / det;
            let db = -(-h21 * g1 + h11 * g2) / det;
            let gd = g1 * da + g2 * db;
            let mut step = 1.0;
            while step >= min_step {
                let (na, nb) = (a + step * da, b + step * db);
                let nf = objective(na, nb);
                if nf < fval + 1e-4 * step * gd {
                    a = na;
                    b = nb;
                    fval = nf;
                    break;
                }
                step /= 2.0;
            }
            if step < min_step {
                break;
            }
        }
        Platt { a, b }
    }

    pub fn probability(&self, dec: f64) -> f64 {
        let f = dec * self.a + self.b;
        if f >= 0.0 {
            let e = (-f).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + f.exp())
        }
    }
}

/// Fold id per row: positives then negatives, each in shuffled order,
/// dealt round-robin with one running counter.
pub fn platt_folds(y: &[bool], seed: Seed) -> Vec<usize> {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.shuffle(&mut seed.child(Stream::Platt, 0).rng());
    let mut fold = vec![0; y.len()];
    let mut counter = 0;
    for class in [true, false] {
        for &i in order.iter().filter(|&&i| y[i] == class) {
            fold[i] = counter % PLATT_FOLDS;
            counter += 1;
        }
    }
    fold
}

pub fn train_svm_rbf(x: &Matrix, y: &[bool], params: &SvmParams, seed: Seed) -> Result<SvmModel, ModelError> {
    check_training(x, y)?;
    params.validate()?;
    let (x, y) = canonicalize(x, y);
    let folds = platt_folds(&y, seed);
    let mut dec = vec![0.0; y.len()];
    for f in 0..PLATT_FOLDS {
        let test: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == f).collect();
        let train: Vec<usize> = (0..y.len()).filter(|&i| folds[i] != f).collect();
        if test.is_empty() {
            continue;
        }
        if train.is_empty() {
            test.iter().for_each(|&i| dec[i] = 0.0);
            continue;
        }
        let yt: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let e = Expansion::fit(&x.select_rows(&train), &yt, params)?;
        for &i in &test {
            dec[i] = e.decision(x.row(i));
        }
    }
    let platt = Platt::fit(&dec, &y);
    let expansion = Expansion::fit(&x, &y, params)?;
    Ok(SvmModel { expansion, platt, params: params.clone() })
}

#[derive(Clone, Debug)]
pub struct SvmModel {
    expansion: Expansion,
    platt: Platt,
    params: SvmParams,
}

impl SvmModel {
    pub fn decision_value(&self, row: &[f64]) -> f64 {
        self.expansion.decision(row)
    }

    pub fn platt(&self) -> Platt {
        self.platt
    }

    pub fn n_support(&self) -> usize {
        self.expansion.coef.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "C {:?}\nsigma {:?}\nrho {:?}\nplatt {:?} {:?}\nsupport {}\n",
            self.params.cost,
            self.params.sigma,
            self.expansion.rho,
            self.platt.a,
            self.platt.b,
            self.n_support()
        );
        for i in 0..self.n_support() {
            out.push_str(&format!("{:?} {}\n", self.expansion.coef[i], fmt_floats(self.expansion.vectors.row(i))));
        }
        out
    }
}

impl ProbabilityModel for SvmModel {
    fn n_features(&self) -> usize {
        self.expansion.vectors.cols()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        self.platt.probability(self.decision_value(row))
    }
}
