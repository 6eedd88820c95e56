//! Gradient-boosted trees on logistic loss with second-order split
//! gains, row subsampling, and per-tree column sampling.

use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::learners::sigmoid;
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq)]
pub struct GbParams {
    pub learning_rate: f64,
    pub max_depth: usize,
    /// Minimum split loss, subtracted inside the gain.
    pub gamma: f64,
    /// Row fraction drawn without replacement each round.
    pub subsample: f64,
    /// Feature fraction drawn per tree.
    pub colsample_bytree: f64,
    /// L2 leaf regularizer.
    pub lambda: f64,
    pub n_rounds: usize,
}

impl Default for GbParams {
    fn default() -> Self {
        GbParams {
            learning_rate: 0.0975,
            max_depth: 4,
            gamma: 0.4735,
            subsample: 0.6232,
            colsample_bytree: 0.9605,
            lambda: 1.0,
            n_rounds: 119,
        }
    }
}

#[derive(Debug, Clone)]
enum GbNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<GbNode>,
        right: Box<GbNode>,
    },
}

impl GbNode {
    fn value(&self, row: &[f64]) -> f64 {
        match self {
            GbNode::Leaf { value } => *value,
            GbNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.value(row)
                } else {
                    right.value(row)
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GbModel {
    pub n_features: usize,
    /// Raw positive-class frequency of the training labels.
    base_rate: f64,
    base_margin: f64,
    trees: Vec<GbNode>,
}

pub fn train(x: &[Vec<f64>], y: &[bool], params: &GbParams, seed: u64) -> Result<GbModel, Error> {
    let n = x.len();
    let p = x[0].len();
    let base_rate = y.iter().filter(|v| **v).count() as f64 / n as f64;
    let base_margin = logit(base_rate.clamp(1e-7, 1.0 - 1e-7));

    let n_sub = ((params.subsample * n as f64).floor() as usize).clamp(1, n);
    let n_col = ((params.colsample_bytree * p as f64).floor() as usize).clamp(1, p);

    let mut margin = vec![base_margin; n];
    let mut trees: Vec<GbNode> = Vec::new();
    for round in 0..params.n_rounds {
        let mut rng: ChaCha8Rng = substream(seed, "gb_round", round as u64);
        let rows = sample_sorted(&mut rng, n, n_sub);
        let cols = sample_sorted(&mut rng, p, n_col);

        // First-order and second-order stats of the logistic loss at the
        // current margins.
        let grad: Vec<f64> = margin
            .iter()
            .zip(y)
            .map(|(m, &t)| sigmoid(*m) - f64::from(u8::from(t)))
            .collect();
        let hess: Vec<f64> = margin
            .iter()
            .map(|m| {
                let s = sigmoid(*m);
                s * (1.0 - s)
            })
            .collect();

        let tree = grow_gb(x, &grad, &hess, rows, params.max_depth, &cols, params);
        // A round whose root cannot clear gamma contributes nothing and
        // is dropped, leaving the margins untouched.
        let Some(tree) = tree else { continue };
        for (m, row) in margin.iter_mut().zip(x) {
            *m += tree.value(row);
        }
        trees.push(tree);
    }

    Ok(GbModel {
        n_features: p,
        base_rate,
        base_margin,
        trees,
    })
}

/// Builds one regression tree on (g, h) sums. Returns None when even the
/// root has no split with positive regularized gain.
fn grow_gb(
    x: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    rows: Vec<usize>,
    depth_left: usize,
    cols: &[usize],
    params: &GbParams,
) -> Option<GbNode> {
    let node = grow_gb_node(x, grad, hess, rows, depth_left, cols, params);
    match node {
        GbNode::Leaf { .. } => None,
        split => Some(split),
    }
}

fn grow_gb_node(
    x: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    rows: Vec<usize>,
    depth_left: usize,
    cols: &[usize],
    params: &GbParams,
) -> GbNode {
    let g: f64 = rows.iter().map(|&r| grad[r]).sum();
    let h: f64 = rows.iter().map(|&r| hess[r]).sum();
    let leaf = GbNode::Leaf {
        value: -g / (h + params.lambda) * params.learning_rate,
    };
    if depth_left == 0 || rows.len() < 2 {
        return leaf;
    }

    let parent_term = g * g / (h + params.lambda);
    let mut best: Option<(usize, f64)> = None;
    let mut best_gain = 0.0;
    for &j in cols {
        let mut vals: Vec<f64> = rows.iter().map(|&r| x[r][j]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let mut gl = 0.0;
            let mut hl = 0.0;
            for &r in &rows {
                if x[r][j] <= thr {
                    gl += grad[r];
                    hl += hess[r];
                }
            }
            let gr = g - gl;
            let hr = h - hl;
            let gain = 0.5
                * (gl * gl / (hl + params.lambda) + gr * gr / (hr + params.lambda) - parent_term)
                - params.gamma;
            if gain > best_gain {
                best_gain = gain;
                best = Some((j, thr));
            }
        }
    }

    match best {
        None => leaf,
        Some((feature, threshold)) => {
            let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
            for &r in &rows {
                if x[r][feature] <= threshold {
                    left_rows.push(r);
                } else {
                    right_rows.push(r);
                }
            }
            let left = grow_gb_node(x, grad, hess, left_rows, depth_left - 1, cols, params);
            let right = grow_gb_node(x, grad, hess, right_rows, depth_left - 1, cols, params);
            GbNode::Split {
                feature,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
    }
}

impl GbModel {
    pub fn scores(&self, x: &[Vec<f64>]) -> Vec<f64> {
        if self.trees.is_empty() {
            // Degenerate ensemble: echo the training frequency exactly.
            return vec![self.base_rate; x.len()];
        }
        x.iter()
            .map(|row| {
                let m: f64 = self.base_margin + self.trees.iter().map(|t| t.value(row)).sum::<f64>();
                sigmoid(m)
            })
            .collect()
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Distinct indices in ascending order; sorting removes any dependence
/// on the sampler's internal ordering.
fn sample_sorted(rng: &mut ChaCha8Rng, universe: usize, amount: usize) -> Vec<usize> {
    if amount >= universe {
        return (0..universe).collect();
    }
    let mut idx = rand::seq::index::sample(rng, universe, amount).into_vec();
    idx.sort_unstable();
    idx
}
