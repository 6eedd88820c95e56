//! Soft-margin SVM with an RBF kernel, solved in the dual by
//! deterministic pairwise (SMO-style) updates.

use crate::error::Error;
use crate::learners::{require_both_classes, sigmoid};

#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    /// None selects 1 / (n_features * mean feature variance).
    pub gamma: Option<f64>,
    /// KKT violation tolerance.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_iters: 100_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SvmModel {
    pub n_features: usize,
    pub converged: bool,
    pub gamma: f64,
    train_x: Vec<Vec<f64>>,
    /// alpha_i * y_i with y in {-1, +1}; zero entries are kept.
    alpha_y: Vec<f64>,
    bias: f64,
}

struct Solver<'a> {
    k: Vec<Vec<f64>>,
    y: Vec<f64>,
    alpha: Vec<f64>,
    b: f64,
    c: f64,
    tol: f64,
    n: usize,
    iters_left: &'a mut usize,
}

pub fn train(x: &[Vec<f64>], y: &[bool], params: &SvmParams) -> Result<SvmModel, Error> {
    require_both_classes(y)?;
    let n = x.len();
    let p = x[0].len();
    let gamma = params.gamma.unwrap_or_else(|| scale_gamma(x));

    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let d2: f64 = x[i]
                .iter()
                .zip(&x[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let v = (-gamma * d2).exp();
            k[i][j] = v;
            k[j][i] = v;
        }
    }

    let signed: Vec<f64> = y.iter().map(|&t| if t { 1.0 } else { -1.0 }).collect();
    let mut iters_left = params.max_iters;
    let mut solver = Solver {
        k,
        y: signed,
        alpha: vec![0.0; n],
        b: 0.0,
        c: params.c,
        tol: params.tol,
        n,
        iters_left: &mut iters_left,
    };
    let converged = solver.run();

    let alpha_y: Vec<f64> = solver
        .alpha
        .iter()
        .zip(&solver.y)
        .map(|(a, s)| a * s)
        .collect();
    Ok(SvmModel {
        n_features: p,
        converged,
        gamma,
        train_x: x.to_vec(),
        alpha_y,
        bias: solver.b,
    })
}

/// 1 / (p * mean population variance); unit gamma when the data carry
/// no spread at all.
fn scale_gamma(x: &[Vec<f64>]) -> f64 {
    let n = x.len() as f64;
    let p = x[0].len();
    let mut total_var = 0.0;
    for j in 0..p {
        let mean = x.iter().map(|r| r[j]).sum::<f64>() / n;
        total_var += x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
    }
    let mean_var = total_var / p as f64;
    if mean_var > 0.0 {
        1.0 / (p as f64 * mean_var)
    } else {
        1.0
    }
}

impl Solver<'_> {
    /// Alternates full passes with non-bound passes until a full pass
    /// changes nothing. Returns false if the iteration budget ran out.
    fn run(&mut self) -> bool {
        let mut examine_all = true;
        let mut num_changed = 1;
        while num_changed > 0 || examine_all {
            num_changed = 0;
            for i in 0..self.n {
                if !examine_all && !self.is_free(i) {
                    continue;
                }
                if *self.iters_left == 0 {
                    return false;
                }
                *self.iters_left -= 1;
                num_changed += usize::from(self.examine(i));
            }
            if examine_all {
                examine_all = false;
            } else if num_changed == 0 {
                examine_all = true;
            }
        }
        true
    }

    fn is_free(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    fn decision(&self, i: usize) -> f64 {
        let mut f = self.b;
        for j in 0..self.n {
            if self.alpha[j] > 0.0 {
                f += self.alpha[j] * self.y[j] * self.k[j][i];
            }
        }
        f
    }

    fn error(&self, i: usize) -> f64 {
        self.decision(i) - self.y[i]
    }

    fn examine(&mut self, i2: usize) -> bool {
        let e2 = self.error(i2);
        let r2 = e2 * self.y[i2];
        let violates =
            (r2 < -self.tol && self.alpha[i2] < self.c) || (r2 > self.tol && self.alpha[i2] > 0.0);
        if !violates {
            return false;
        }

        // Partner choice: widest error gap among free points first
        // (lower index on ties), then every other point in wraparound
        // order from i2.
        let mut best: Option<(f64, usize)> = None;
        for j in 0..self.n {
            if j != i2 && self.is_free(j) {
                let gap = (e2 - self.error(j)).abs();
                if best.is_none_or(|(g, _)| gap > g) {
                    best = Some((gap, j));
                }
            }
        }
        if let Some((_, j)) = best {
            if self.take_step(j, i2, e2) {
                return true;
            }
        }
        for j in (i2 + 1..self.n).chain(0..i2) {
            if self.take_step(j, i2, e2) {
                return true;
            }
        }
        false
    }

    fn take_step(&mut self, i1: usize, i2: usize, e2: f64) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let e1 = self.error(i1);
        let s = y1 * y2;
        let (lo, hi) = if s < 0.0 {
            ((a2 - a1).max(0.0), (self.c + a2 - a1).min(self.c))
        } else {
            ((a1 + a2 - self.c).max(0.0), (a1 + a2).min(self.c))
        };
        if lo >= hi {
            return false;
        }
        let eta = self.k[i1][i1] + self.k[i2][i2] - 2.0 * self.k[i1][i2];
        if eta <= 0.0 {
            // Degenerate curvature (duplicate points); skip the pair.
            return false;
        }
        let mut a2_new = a2 + y2 * (e1 - e2) / eta;
        a2_new = a2_new.clamp(lo, hi);
        if (a2_new - a2).abs() < 1e-8 * (a2_new + a2 + 1e-8) {
            return false;
        }
        let a1_new = a1 + s * (a2 - a2_new);

        let b1 = self.b - e1 - y1 * (a1_new - a1) * self.k[i1][i1] - y2 * (a2_new - a2) * self.k[i1][i2];
        let b2 = self.b - e2 - y1 * (a1_new - a1) * self.k[i1][i2] - y2 * (a2_new - a2) * self.k[i2][i2];
        let free1 = a1_new > 0.0 && a1_new < self.c;
        let free2 = a2_new > 0.0 && a2_new < self.c;
        self.b = if free1 {
            b1
        } else if free2 {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        self.alpha[i1] = a1_new;
        self.alpha[i2] = a2_new;
        true
    }
}

impl SvmModel {
    /// Sigmoid-squashed decision values; a ranking score, not a
    /// calibrated probability.
    pub fn scores(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter()
            .map(|q| {
                let mut f = self.bias;
                for (row, ay) in self.train_x.iter().zip(&self.alpha_y) {
                    if *ay != 0.0 {
                        let d2: f64 =
                            row.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                        f += ay * (-self.gamma * d2).exp();
                    }
                }
                sigmoid(f)
            })
            .collect()
    }
}
