//! L2-regularized logistic regression fit by full-batch gradient descent
//! with a revert-and-halve step size rule.

use crate::error::Error;
use crate::learners::{require_both_classes, sigmoid, softplus};

#[derive(Debug, Clone, PartialEq)]
pub struct LrParams {
    /// Inverse regularization strength; the penalty term is
    /// (1/c) * 0.5 * ||w||^2 and never touches the bias.
    pub c: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for LrParams {
    fn default() -> Self {
        LrParams {
            c: 1000.0,
            max_iters: 10_000,
            grad_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub n_features: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

/// Objective: mean cross-entropy plus (1/c) * 0.5 * ||w||^2.
pub fn loss(x: &[Vec<f64>], y: &[bool], w: &[f64], b: f64, c: f64) -> f64 {
    let n = x.len() as f64;
    let mut ce = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z = dot(w, row) + b;
        // log(1+e^z) - t*z, computed stably on either side of zero
        let t = f64::from(u8::from(label));
        ce += softplus(z) - t * z;
    }
    let reg: f64 = w.iter().map(|v| v * v).sum::<f64>() * 0.5 / c;
    ce / n + reg
}

/// Gradient of `loss` in (w, b).
pub fn grad(x: &[Vec<f64>], y: &[bool], w: &[f64], b: f64, c: f64) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let err = sigmoid(dot(w, row) + b) - f64::from(u8::from(label));
        for (g, v) in gw.iter_mut().zip(row) {
            *g += err * v;
        }
        gb += err;
    }
    for (g, wv) in gw.iter_mut().zip(w) {
        *g = *g / n + wv / c;
    }
    (gw, gb / n)
}

pub fn train(x: &[Vec<f64>], y: &[bool], params: &LrParams) -> Result<LogisticModel, Error> {
    require_both_classes(y)?;
    let p = x[0].len();
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut lr = 1.0;
    let mut current = loss(x, y, &w, b, params.c);
    let mut iterations = 0;

    for _ in 0..params.max_iters {
        let (gw, gb) = grad(x, y, &w, b, params.c);
        let gnorm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        if gnorm < params.grad_tol {
            break;
        }
        // Halve the step until the full-batch loss actually drops.
        loop {
            let cand_w: Vec<f64> = w.iter().zip(&gw).map(|(wv, g)| wv - lr * g).collect();
            let cand_b = b - lr * gb;
            let cand_loss = loss(x, y, &cand_w, cand_b, params.c);
            if cand_loss < current {
                w = cand_w;
                b = cand_b;
                current = cand_loss;
                break;
            }
            lr *= 0.5;
            if lr < 1e-15 {
                break;
            }
        }
        iterations += 1;
        if lr < 1e-15 {
            break;
        }
    }

    Ok(LogisticModel {
        n_features: p,
        weights: w,
        bias: b,
        iterations,
    })
}

impl LogisticModel {
    pub fn scores(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter()
            .map(|row| sigmoid(dot(&self.weights, row) + self.bias))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
