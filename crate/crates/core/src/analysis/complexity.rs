//! Fit-based Rademacher complexity and loss-curvature sharpness.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deciders::logreg::{design, hessian, LogregParams};
use crate::deciders::{fit, DeciderKind, DecisionTable, FitOptions};
use crate::error::{Error, Result};

pub const MIN_DRAWS: usize = 10;
pub const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityResult {
    pub method: String,
    pub family: DeciderKind,
    pub estimate: f64,
    pub stderr: f64,
    /// Estimate divided by the constant-classifier estimate on the same draws.
    pub normalized: Option<f64>,
    pub n: usize,
    pub draws: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

fn correlation(sigma: &[f64], h: &[u8]) -> f64 {
    sigma.iter().zip(h).map(|(s, h)| s * (2.0 * f64::from(*h) - 1.0)).sum::<f64>() / sigma.len() as f64
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// For each draw, fits `family` to random ±1 signs and records how well the
/// fitted classifier correlates with them. The fit stands in for the
/// supremum, so the estimate is a lower bound on the true quantity.
pub fn rademacher_estimate(
    method: &str,
    features: &[Vec<f64>],
    family: DeciderKind,
    draws: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<ComplexityResult> {
    if features.is_empty() || draws == 0 {
        return Err(Error::invalid("Rademacher estimate needs features and at least one draw"));
    }
    let n = features.len();
    let pairs: Vec<(f64, f64)> = (0..draws)
        .into_par_iter()
        .map(|d| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(d as u64));
            let sigma: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let labels: Vec<u8> = sigma.iter().map(|s| u8::from(*s > 0.0)).collect();
            let table = DecisionTable::from_labels(features, &labels);
            let draw_opts = FitOptions { seed: opts.seed.wrapping_add(d as u64), ..*opts };
            let fitted = fit(family, &table, &draw_opts, "")?.predict_table(&table)?;
            let constant = fit(DeciderKind::Constant, &table, &draw_opts, "")?.predict_table(&table)?;
            Ok((correlation(&sigma, &fitted), correlation(&sigma, &constant)))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let baseline: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (estimate, stderr) = mean_stderr(&values);
    let (base, _) = mean_stderr(&baseline);
    let mut flags = Vec::new();
    if draws < MIN_DRAWS {
        flags.push(format!("only {draws} draws; estimate is noisy"));
    }
    Ok(ComplexityResult {
        method: method.to_owned(),
        family,
        estimate,
        stderr,
        normalized: (base > 0.0).then(|| estimate / base),
        n,
        draws,
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessResult {
    pub method: String,
    pub lambda_max: f64,
    pub log10_lambda_max: f64,
    pub l2: f64,
    pub iterations: usize,
    pub n: usize,
}

/// Largest eigenvalue of a symmetric positive semi-definite matrix by power
/// iteration on the Rayleigh quotient.
pub fn power_lambda_max(h: &DMatrix<f64>) -> (f64, usize) {
    let d = h.nrows();
    if d == 0 {
        return (0.0, 0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = DVector::from_fn(d, |_, _| rng.random_range(0.5..1.5));
    v.normalize_mut();
    let mut lambda = v.dot(&(h * &v));
    for it in 1..=POWER_MAX_ITER {
        let w = h * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return (0.0, it);
        }
        v = w / norm;
        let next = v.dot(&(h * &v));
        if (next - lambda).abs() <= POWER_TOL * next.abs() {
            return (next, it);
        }
        lambda = next;
    }
    (lambda, POWER_MAX_ITER)
}

pub fn dense_lambda_max(h: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// λ_max of the regularized log-loss Hessian at the fitted optimum. `x`
/// must be the features the model was fitted on (standardized if the model
/// was).
pub fn sharpness(method: &str, model: &LogregParams, x: &[Vec<f64>]) -> Result<SharpnessResult> {
    if !model.converged {
        return Err(Error::invalid(format!(
            "logistic model did not converge (gradient norm {:.3e}); refit before measuring sharpness",
            model.grad_norm
        )));
    }
    if x.is_empty() || x[0].len() != model.weights.len() {
        return Err(Error::invalid("feature matrix does not match the model"));
    }
    let h = hessian(&design(x, model.fit_intercept), &model.theta(), model.l2);
    let (lambda_max, iterations) = power_lambda_max(&h);
    Ok(SharpnessResult {
        method: method.to_owned(),
        lambda_max,
        log10_lambda_max: lambda_max.log10(),
        l2: model.l2,
        iterations,
        n: x.len(),
    })
}
