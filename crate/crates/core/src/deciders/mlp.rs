//! Two-hidden-layer perceptron trained by full-batch gradient descent.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logreg::sigmoid;
use crate::error::{Error, Result};

pub const HIDDEN: usize = 64;
pub const LEARNING_RATE: f64 = 1e-2;
pub const EPOCHS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    /// Row-major weights, one matrix per layer as (rows = outputs).
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: f64,
    pub seed: u64,
    pub final_loss: f64,
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..limit))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn relu(m: &mut DMatrix<f64>) {
    m.apply(|v| *v = v.max(0.0));
}

fn add_bias(m: &mut DMatrix<f64>, b: &DVector<f64>) {
    for mut row in m.row_iter_mut() {
        row += b.transpose();
    }
}

pub fn fit_mlp(x: &[Vec<f64>], y: &[u8], seed: u64) -> Result<MlpParams> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::invalid(format!("{} feature rows for {} labels", x.len(), y.len())));
    }
    let (n, d) = (x.len(), x[0].len());
    let xm = DMatrix::from_fn(n, d, |i, j| x[i][j]);
    let yv = DVector::from_fn(n, |i, _| f64::from(y[i]));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // weights stored as (inputs × outputs) so the forward pass is X·W
    let mut w1 = glorot(&mut rng, d, HIDDEN);
    let mut w2 = glorot(&mut rng, HIDDEN, HIDDEN);
    let mut w3 = glorot(&mut rng, HIDDEN, 1);
    let mut b1 = DVector::zeros(HIDDEN);
    let mut b2 = DVector::zeros(HIDDEN);
    let mut b3 = 0.0;
    let mut loss = f64::NAN;
    for _ in 0..EPOCHS {
        let mut h1 = &xm * &w1;
        add_bias(&mut h1, &b1);
        relu(&mut h1);
        let mut h2 = &h1 * &w2;
        add_bias(&mut h2, &b2);
        relu(&mut h2);
        let z = &h2 * &w3;
        let p = DVector::from_fn(n, |i, _| sigmoid(z[(i, 0)] + b3));
        loss = p
            .iter()
            .zip(yv.iter())
            .map(|(p, y)| -(y * p.max(1e-15).ln() + (1.0 - y) * (1.0 - p).max(1e-15).ln()))
            .sum::<f64>()
            / n as f64;
        // dL/dz for mean binary cross-entropy
        let dz = DMatrix::from_fn(n, 1, |i, _| (p[i] - yv[i]) / n as f64);
        let gw3 = h2.transpose() * &dz;
        let gb3: f64 = dz.sum();
        let mut dh2 = &dz * w3.transpose();
        dh2.zip_apply(&h2, |g, h| {
            if h <= 0.0 {
                *g = 0.0
            }
        });
        let gw2 = h1.transpose() * &dh2;
        let gb2 = dh2.row_sum().transpose();
        let mut dh1 = &dh2 * w2.transpose();
        dh1.zip_apply(&h1, |g, h| {
            if h <= 0.0 {
                *g = 0.0
            }
        });
        let gw1 = xm.transpose() * &dh1;
        let gb1 = dh1.row_sum().transpose();
        w1 -= gw1 * LEARNING_RATE;
        b1 -= gb1 * LEARNING_RATE;
        w2 -= gw2 * LEARNING_RATE;
        b2 -= gb2 * LEARNING_RATE;
        w3 -= gw3 * LEARNING_RATE;
        b3 -= gb3 * LEARNING_RATE;
    }
    Ok(MlpParams {
        w1: to_rows(&w1.transpose()),
        b1: b1.iter().copied().collect(),
        w2: to_rows(&w2.transpose()),
        b2: b2.iter().copied().collect(),
        w3: w3.iter().copied().collect(),
        b3,
        seed,
        final_loss: loss,
    })
}

fn layer(w: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
    w.iter().zip(b).map(|(row, b)| (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b).max(0.0)).collect()
}

impl MlpParams {
    pub fn probability(&self, x: &[f64]) -> f64 {
        let h1 = layer(&self.w1, &self.b1, x);
        let h2 = layer(&self.w2, &self.b2, &h1);
        sigmoid(self.w3.iter().zip(&h2).map(|(w, h)| w * h).sum::<f64>() + self.b3)
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.probability(x) >= 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Vec<Vec<f64>>, Vec<u8>) {
        let x: Vec<Vec<f64>> =
            (0..40).map(|i| vec![if i < 20 { -1.5 } else { 1.5 } + f64::from(i % 20) / 40.0]).collect();
        let y = (0..40).map(|i| u8::from(i >= 20)).collect();
        (x, y)
    }

    #[test]
    fn deterministic_given_seed() {
        let (x, y) = separable();
        assert_eq!(fit_mlp(&x, &y, 7).unwrap(), fit_mlp(&x, &y, 7).unwrap());
    }

    #[test]
    fn fits_separable_data() {
        let (x, y) = separable();
        let m = fit_mlp(&x, &y, 1).unwrap();
        let acc = x.iter().zip(&y).filter(|(x, y)| m.predict(x) == **y).count();
        assert_eq!(acc, 40);
    }

    #[test]
    fn constant_labels() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![f64::from(i) / 5.0 - 1.0]).collect();
        let m = fit_mlp(&x, &[1; 10], 3).unwrap();
        assert!(x.iter().all(|x| m.predict(x) == 1));
    }
}
