//! Ridge-regularized logistic regression fitted by damped Newton steps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRAD_TOL: f64 = 1e-8;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogregOptions {
    /// Ridge strength λ; `None` means 1/n.
    pub l2: Option<f64>,
    pub fit_intercept: bool,
}

impl Default for LogregOptions {
    fn default() -> Self {
        LogregOptions { l2: None, fit_intercept: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogregParams {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub fit_intercept: bool,
    pub l2: f64,
    pub converged: bool,
    pub grad_norm: f64,
    /// Objective value after each accepted step, starting at the initial point.
    pub loss_history: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Design matrix with a trailing column of ones when an intercept is fitted.
pub fn design(x: &[Vec<f64>], fit_intercept: bool) -> DMatrix<f64> {
    let d = x.first().map_or(0, Vec::len);
    let cols = d + usize::from(fit_intercept);
    DMatrix::from_fn(x.len(), cols, |i, j| if j < d { x[i][j] } else { 1.0 })
}

/// Mean log-loss plus (λ/2)·‖θ‖², penalizing every coefficient of the
/// augmented design (the intercept included).
pub fn objective(xa: &DMatrix<f64>, y: &[f64], theta: &DVector<f64>, l2: f64) -> f64 {
    let z = xa * theta;
    let n = y.len() as f64;
    let data: f64 = z.iter().zip(y).map(|(z, y)| softplus(*z) - y * z).sum::<f64>() / n;
    data + 0.5 * l2 * theta.norm_squared()
}

pub fn gradient(xa: &DMatrix<f64>, y: &[f64], theta: &DVector<f64>, l2: f64) -> DVector<f64> {
    let z = xa * theta;
    let n = y.len() as f64;
    let r = DVector::from_fn(y.len(), |i, _| sigmoid(z[i]) - y[i]);
    xa.transpose() * r / n + theta * l2
}

/// `(1/n)·X̃ᵀSX̃ + λI` with `S = diag(p(1−p))`.
pub fn hessian(xa: &DMatrix<f64>, theta: &DVector<f64>, l2: f64) -> DMatrix<f64> {
    let z = xa * theta;
    let n = xa.nrows() as f64;
    let mut weighted = xa.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        let p = sigmoid(z[i]);
        row *= p * (1.0 - p);
    }
    let mut h = xa.transpose() * weighted / n;
    for i in 0..h.nrows() {
        h[(i, i)] += l2;
    }
    h
}

pub fn fit_logreg(x: &[Vec<f64>], y: &[u8], opts: LogregOptions) -> Result<LogregParams> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::invalid(format!("{} feature rows for {} labels", x.len(), y.len())));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("features contain non-finite values"));
    }
    let n = x.len();
    let l2 = opts.l2.unwrap_or(1.0 / n as f64);
    if !(l2 >= 0.0) {
        return Err(Error::invalid(format!("ridge strength must be ≥ 0, got {l2}")));
    }
    let xa = design(x, opts.fit_intercept);
    let yf: Vec<f64> = y.iter().map(|v| f64::from(*v)).collect();
    let mut theta = DVector::zeros(xa.ncols());
    let mut loss = objective(&xa, &yf, &theta, l2);
    let mut history = vec![loss];
    let mut grad = gradient(&xa, &yf, &theta, l2);
    let mut converged = grad.norm() <= GRAD_TOL;
    for _ in 0..MAX_ITER {
        if converged {
            break;
        }
        let h = hessian(&xa, &theta, l2);
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            // singular curvature (λ = 0 and degenerate data): fall back to gradient descent
            None => grad.clone(),
        };
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let cand = &theta - &step * t;
            let cand_loss = objective(&xa, &yf, &cand, l2);
            if cand_loss <= loss - 1e-4 * t * slope {
                theta = cand;
                loss = cand_loss;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        grad = gradient(&xa, &yf, &theta, l2);
        converged = grad.norm() <= GRAD_TOL;
        if !accepted {
            break;
        }
        history.push(loss);
    }
    let d = x[0].len();
    Ok(LogregParams {
        weights: theta.iter().take(d).copied().collect(),
        intercept: if opts.fit_intercept { theta[d] } else { 0.0 },
        fit_intercept: opts.fit_intercept,
        l2,
        converged,
        grad_norm: grad.norm(),
        loss_history: history,
    })
}

impl LogregParams {
    pub fn theta(&self) -> DVector<f64> {
        let mut v = self.weights.clone();
        if self.fit_intercept {
            v.push(self.intercept);
        }
        DVector::from_vec(v)
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.intercept)
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.probability(x) >= 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_data_is_fitted() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![f64::from(i) / 10.0 - 1.0]).collect();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        let m = fit_logreg(&x, &y, LogregOptions::default()).unwrap();
        assert!(m.converged && m.grad_norm <= GRAD_TOL);
        let acc = x.iter().zip(&y).filter(|(x, y)| m.predict(x) == **y).count();
        assert_eq!(acc, 20);
        assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn constant_labels_predict_constant() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![f64::from(i)]).collect();
        let m = fit_logreg(&x, &[0; 10], LogregOptions::default()).unwrap();
        assert!(x.iter().all(|x| m.predict(x) == 0));
    }

    #[test]
    fn scalar_curvature() {
        let x = vec![vec![1.0]; 4];
        let m = fit_logreg(&x, &[0, 1, 0, 1], LogregOptions { l2: Some(0.0), fit_intercept: false }).unwrap();
        assert_eq!(m.weights, vec![0.0]);
        let h = hessian(&design(&x, false), &m.theta(), 0.0);
        assert_eq!(h[(0, 0)], 0.25);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(fit_logreg(&[vec![f64::NAN]], &[1], LogregOptions::default()).is_err());
    }
}
