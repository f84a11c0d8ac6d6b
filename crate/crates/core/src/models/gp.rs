//! Gaussian-process classifier with a logistic likelihood under the
//! Laplace approximation.
//!
//! The posterior mode is found by Newton iterations in the `f = K a`
//! parametrisation with step halving on the log posterior. Predictions
//! integrate the logistic link over the latent Gaussian marginal by
//! Gauss–Hermite quadrature.

use super::quadrature::normal_expectation;
use super::svm::{kernel_matrix, rbf};
use super::{canonicalize, check_training, fmt_floats, sigmoid, Algorithm, ModelError, ProbabilityModel};
use crate::linalg::{dot, Cholesky, Matrix};

pub const JITTER: f64 = 1e-8;
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
pub const MAX_NEWTON: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct GpParams {
    pub sigma: f64,
}

impl GpParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(ModelError::InvalidParams("gp sigma must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LaplaceMode {
    pub f: Vec<f64>,
    pub a: Vec<f64>,
    pub iterations: usize,
}

fn log_likelihood(f: &[f64], t: &[f64]) -> f64 {
    // log σ(y f) with y = 2t − 1.
    f.iter()
        .zip(t)
        .map(|(&fi, &ti)| {
            let m = -(2.0 * ti - 1.0) * fi;
            -(if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() })
        })
        .sum()
}

/// `∇ log p(y | f) = t − σ(f)` for 0/1 targets.
fn gradient(f: &[f64], t: &[f64]) -> Vec<f64> {
    f.iter().zip(t).map(|(&fi, &ti)| ti - sigmoid(fi)).collect()
}

fn cholesky_b(k: &Matrix, sqrt_w: &[f64]) -> Result<Cholesky, ModelError> {
    let n = sqrt_w.len();
    let mut b = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = sqrt_w[i] * k.get(i, j) * sqrt_w[j] + if i == j { 1.0 } else { 0.0 };
            b.set(i, j, v);
        }
    }
    Cholesky::factor(&b).ok_or_else(|| ModelError::NonConvergence {
        algorithm: Algorithm::Gp,
        detail: "I + W½KW½ not positive definite".into(),
    })
}

fn weights(f: &[f64]) -> Vec<f64> {
    f.iter()
        .map(|&fi| {
            let p = sigmoid(fi);
            (p * (1.0 - p)).sqrt()
        })
        .collect()
}

/// Newton search for the mode of `log p(y|f) − ½ fᵀK⁻¹f`. `k` must already
/// include the diagonal jitter.
pub fn laplace_mode(k: &Matrix, y: &[bool]) -> Result<LaplaceMode, ModelError> {
    let n = y.len();
    let t: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
    let mut a = vec![0.0; n];
    let mut f = vec![0.0; n];
    let psi = |a: &[f64], f: &[f64]| -0.5 * dot(a, f) + log_likelihood(f, &t);
    let mut obj = psi(&a, &f);
    for iteration in 0..=MAX_NEWTON {
        let g = gradient(&f, &t);
        let gap = g.iter().zip(&a).map(|(gi, ai)| (gi - ai).abs()).fold(0.0, f64::max);
        if gap < GRADIENT_TOLERANCE {
            return Ok(LaplaceMode { f, a, iterations: iteration });
        }
        if iteration == MAX_NEWTON {
            return Err(ModelError::NonConvergence {
                algorithm: Algorithm::Gp,
                detail: format!("Newton stopped after {MAX_NEWTON} iterations with gradient {gap:.3e}"),
            });
        }
        let sw = weights(&f);
        let chol = cholesky_b(k, &sw)?;
        let b: Vec<f64> = (0..n).map(|i| sw[i] * sw[i] * f[i] + g[i]).collect();
        let kb = k.mat_vec(&b);
        let swkb: Vec<f64> = (0..n).map(|i| sw[i] * kb[i]).collect();
        let corr = chol.solve(&swkb);
        let target: Vec<f64> = (0..n).map(|i| b[i] - sw[i] * corr[i]).collect();

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = a.iter().zip(&target).map(|(ai, ti)| ai + step * (ti - ai)).collect();
            let tf = k.mat_vec(&trial);
            let o = psi(&trial, &tf);
            if o >= obj {
                a = trial;
                f = tf;
                obj = o;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No ascent possible from here; accept the full step so the
            // gradient test decides.
            a = target;
            f = k.mat_vec(&a);
            obj = psi(&a, &f);
        }
    }
    unreachable!("loop returns at MAX_NEWTON")
}

pub fn train_gp_rbf(x: &Matrix, y: &[bool], params: &GpParams) -> Result<GpModel, ModelError> {
    check_training(x, y)?;
    params.validate()?;
    let (x, y) = canonicalize(x, y);
    let mut k = kernel_matrix(&x, params.sigma);
    for i in 0..x.rows() {
        k.set(i, i, k.get(i, i) + JITTER);
    }
    let mode = laplace_mode(&k, &y)?;
    let t: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
    let residual = gradient(&mode.f, &t);
    let sqrt_w = weights(&mode.f);
    let chol = cholesky_b(&k, &sqrt_w)?;
    Ok(GpModel { x, residual, sqrt_w, chol, sigma: params.sigma, iterations: mode.iterations })
}

#[derive(Clone, Debug)]
pub struct GpModel {
    x: Matrix,
    residual: Vec<f64>,
    sqrt_w: Vec<f64>,
    chol: Cholesky,
    sigma: f64,
    iterations: usize,
}

impl GpModel {
    /// Latent predictive mean and variance at `row`.
    pub fn latent(&self, row: &[f64]) -> (f64, f64) {
        let ks: Vec<f64> = (0..self.x.rows()).map(|i| rbf(self.x.row(i), row, self.sigma)).collect();
        let mean = dot(&ks, &self.residual);
        let wk: Vec<f64> = ks.iter().zip(&self.sqrt_w).map(|(k, w)| k * w).collect();
        let v = self.chol.solve_lower(&wk);
        let var = (1.0 + JITTER - dot(&v, &v)).max(0.0);
        (mean, var)
    }

    pub fn newton_iterations(&self) -> usize {
        self.iterations
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("sigma {:?}\nrows {}\nresidual {}\nsqrt_w {}\n", self.sigma, self.x.rows(), fmt_floats(&self.residual), fmt_floats(&self.sqrt_w));
        for i in 0..self.x.rows() {
            out.push_str(&fmt_floats(self.x.row(i)));
            out.push('\n');
        }
        out
    }
}

impl ProbabilityModel for GpModel {
    fn n_features(&self) -> usize {
        self.x.cols()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        let (mean, var) = self.latent(row);
        normal_expectation(mean, var, sigmoid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testdata;

    #[test]
    fn single_positive_point() {
        let x = Matrix::new(1, 2, vec![0.5, -0.5]);
        let m = train_gp_rbf(&x, &[true], &GpParams { sigma: 1.0 }).unwrap();
        assert!(m.predict_row(&[0.5, -0.5]) > 0.5);
    }

    #[test]
    fn mirrored_pair_is_neutral_at_origin() {
        let x = Matrix::new(2, 2, vec![1.0, 0.5, -1.0, -0.5]);
        let m = train_gp_rbf(&x, &[true, false], &GpParams { sigma: 0.7 }).unwrap();
        assert!((m.predict_row(&[0.0, 0.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mode_satisfies_optimality() {
        let (x, y) = testdata::blobs(60, 3, 0.6, 2);
        let mut k = kernel_matrix(&x, 0.5);
        for i in 0..60 {
            k.set(i, i, k.get(i, i) + JITTER);
        }
        let mode = laplace_mode(&k, &y).unwrap();
        let t: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
        // ∇ log posterior = ∇ log p(y|f) − K⁻¹ f, and K⁻¹ f = a.
        let kinv_f = Cholesky::factor(&k).unwrap().solve(&mode.f);
        let g = gradient(&mode.f, &t);
        let worst = g.iter().zip(&mode.a).map(|(gi, ai)| (gi - ai).abs()).fold(0.0, f64::max);
        assert!(worst < GRADIENT_TOLERANCE);
        let fa = k.mat_vec(&mode.a);
        assert!(fa.iter().zip(&mode.f).all(|(u, v)| (u - v).abs() < 1e-12));
        assert!(kinv_f.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn probabilities_separate_blobs() {
        let (x, y) = testdata::blobs(60, 2, 1.5, 3);
        let m = train_gp_rbf(&x, &y, &GpParams { sigma: 0.5 }).unwrap();
        let p = m.predict_proba(&x).unwrap();
        let correct = (0..60).filter(|&i| (p[i] > 0.5) == y[i]).count();
        assert!(correct >= 55);
    }
}
