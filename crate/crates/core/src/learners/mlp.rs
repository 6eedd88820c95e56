//! Single-hidden-layer perceptron: ReLU hidden units, sigmoid output,
//! mean cross-entropy loss, full-batch adaptive-moment steps with a
//! revert-and-halve guard so the recorded loss never rises.

use rand::Rng;

use crate::error::Error;
use crate::learners::{sigmoid, softplus};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    /// Training epochs; 0 is a test hook that keeps the raw
    /// initialization.
    pub epochs: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 32,
            learning_rate: 0.01,
            epochs: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MlpModel {
    pub n_features: usize,
    pub hidden: usize,
    /// Loss after each epoch, non-increasing by construction.
    pub losses: Vec<f64>,
    w1: Vec<f64>, // hidden x n_features, row-major
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

pub fn train(x: &[Vec<f64>], y: &[bool], params: &MlpParams, seed: u64) -> Result<MlpModel, Error> {
    let p = x[0].len();
    let h = params.hidden;

    // Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)), weights
    // drawn layer by layer in storage order; biases start at zero.
    let mut rng = stream(seed, "mlp_init");
    let a1 = (6.0 / (p + h) as f64).sqrt();
    let w1: Vec<f64> = (0..h * p).map(|_| rng.gen_range(-a1..a1)).collect();
    let a2 = (6.0 / (h + 1) as f64).sqrt();
    let w2: Vec<f64> = (0..h).map(|_| rng.gen_range(-a2..a2)).collect();

    let mut model = MlpModel {
        n_features: p,
        hidden: h,
        losses: Vec::with_capacity(params.epochs),
        w1,
        b1: vec![0.0; h],
        w2,
        b2: 0.0,
    };

    let dim = h * p + h + h + 1;
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let mut lr = params.learning_rate;
    let mut theta = model.params_vec();
    let mut current = model.loss(x, y);

    for epoch in 1..=params.epochs {
        let g = model.grad_vec(x, y);
        for i in 0..dim {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        }
        let bc1 = 1.0 - beta1.powi(epoch as i32);
        let bc2 = 1.0 - beta2.powi(epoch as i32);
        let dir: Vec<f64> = (0..dim)
            .map(|i| (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps))
            .collect();

        // Fixed direction this epoch; shrink the step until the loss
        // drops. An underflowed step leaves the epoch a no-op.
        loop {
            if lr < 1e-15 {
                break;
            }
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t - lr * d).collect();
            model.set_params(&cand);
            let cand_loss = model.loss(x, y);
            if cand_loss < current {
                theta = cand;
                current = cand_loss;
                break;
            }
            lr *= 0.5;
        }
        model.set_params(&theta);
        model.losses.push(current);
    }

    Ok(model)
}

impl MlpModel {
    pub fn scores(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|row| sigmoid(self.forward(row).1)).collect()
    }

    /// (hidden activations, output pre-activation)
    fn forward(&self, row: &[f64]) -> (Vec<f64>, f64) {
        let h = self.hidden;
        let p = self.n_features;
        let mut act = vec![0.0; h];
        for k in 0..h {
            let mut pre = self.b1[k];
            for j in 0..p {
                pre += self.w1[k * p + j] * row[j];
            }
            act[k] = pre.max(0.0);
        }
        let z = self.w2.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>() + self.b2;
        (act, z)
    }

    /// Mean cross-entropy over the batch.
    pub fn loss(&self, x: &[Vec<f64>], y: &[bool]) -> f64 {
        let mut total = 0.0;
        for (row, &t) in x.iter().zip(y) {
            let (_, z) = self.forward(row);
            total += softplus(z) - f64::from(u8::from(t)) * z;
        }
        total / x.len() as f64
    }

    /// Analytic gradient, flattened in the same order as `params_vec`.
    pub fn grad_vec(&self, x: &[Vec<f64>], y: &[bool]) -> Vec<f64> {
        let h = self.hidden;
        let p = self.n_features;
        let n = x.len() as f64;
        let mut gw1 = vec![0.0; h * p];
        let mut gb1 = vec![0.0; h];
        let mut gw2 = vec![0.0; h];
        let mut gb2 = 0.0;
        for (row, &t) in x.iter().zip(y) {
            let (act, z) = self.forward(row);
            let dz = (sigmoid(z) - f64::from(u8::from(t))) / n;
            gb2 += dz;
            for k in 0..h {
                gw2[k] += dz * act[k];
                if act[k] > 0.0 {
                    let dpre = dz * self.w2[k];
                    gb1[k] += dpre;
                    for j in 0..p {
                        gw1[k * p + j] += dpre * row[j];
                    }
                }
            }
        }
        let mut out = gw1;
        out.extend(gb1);
        out.extend(gw2);
        out.push(gb2);
        out
    }

    /// Flattened parameters: w1 rows, b1, w2, b2.
    pub fn params_vec(&self) -> Vec<f64> {
        let mut out = self.w1.clone();
        out.extend(self.b1.iter());
        out.extend(self.w2.iter());
        out.push(self.b2);
        out
    }

    pub fn set_params(&mut self, theta: &[f64]) {
        let hp = self.hidden * self.n_features;
        self.w1.copy_from_slice(&theta[..hp]);
        self.b1.copy_from_slice(&theta[hp..hp + self.hidden]);
        self.w2
            .copy_from_slice(&theta[hp + self.hidden..hp + 2 * self.hidden]);
        self.b2 = theta[hp + 2 * self.hidden];
    }
}
