//! Gaussian naive Bayes with per-class maximum-likelihood moments.

use crate::error::Error;
use crate::learners::require_both_classes;

#[derive(Debug, Clone, PartialEq)]
pub struct NbParams {
    /// Added to every per-class variance as a fraction of the largest
    /// pooled feature variance, keeping log densities finite when a
    /// feature is constant within a class.
    pub var_smoothing: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams { var_smoothing: 1e-9 }
    }
}

#[derive(Debug, Clone)]
pub struct NbModel {
    pub n_features: usize,
    log_prior: [f64; 2],
    // index 0 = negative class, 1 = positive class
    means: [Vec<f64>; 2],
    vars: [Vec<f64>; 2],
}

/// Population (divide by n) moments per class; smoothing is
/// `var_smoothing` times the largest population variance over the whole
/// training matrix.
pub fn train(x: &[Vec<f64>], y: &[bool], params: &NbParams) -> Result<NbModel, Error> {
    require_both_classes(y)?;
    let p = x[0].len();
    let n = x.len() as f64;

    let mut counts = [0usize; 2];
    let mut sums = [vec![0.0; p], vec![0.0; p]];
    for (row, &label) in x.iter().zip(y) {
        let c = usize::from(label);
        counts[c] += 1;
        for (acc, v) in sums[c].iter_mut().zip(row) {
            *acc += v;
        }
    }
    let means = [
        sums[0].iter().map(|s| s / counts[0] as f64).collect::<Vec<f64>>(),
        sums[1].iter().map(|s| s / counts[1] as f64).collect::<Vec<f64>>(),
    ];

    let mut sq = [vec![0.0; p], vec![0.0; p]];
    for (row, &label) in x.iter().zip(y) {
        let c = usize::from(label);
        for j in 0..p {
            let d = row[j] - means[c][j];
            sq[c][j] += d * d;
        }
    }

    // Pooled variance of each feature over all rows, for the smoothing scale.
    let mut max_pooled = 0.0f64;
    for j in 0..p {
        let mean = x.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        max_pooled = max_pooled.max(var);
    }
    let eps = params.var_smoothing * max_pooled;

    let vars = [
        sq[0].iter().map(|s| s / counts[0] as f64 + eps).collect::<Vec<f64>>(),
        sq[1].iter().map(|s| s / counts[1] as f64 + eps).collect::<Vec<f64>>(),
    ];
    for side in &vars {
        for &v in side {
            if !(v > 0.0) {
                return Err(Error::ConstantInput);
            }
        }
    }

    Ok(NbModel {
        n_features: p,
        log_prior: [
            (counts[0] as f64 / n).ln(),
            (counts[1] as f64 / n).ln(),
        ],
        means,
        vars,
    })
}

impl NbModel {
    /// Posterior of the positive class, normalized in log space.
    pub fn scores(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter()
            .map(|row| {
                let lp = [self.log_joint(row, 0), self.log_joint(row, 1)];
                let m = lp[0].max(lp[1]);
                let e0 = (lp[0] - m).exp();
                let e1 = (lp[1] - m).exp();
                e1 / (e0 + e1)
            })
            .collect()
    }

    fn log_joint(&self, row: &[f64], c: usize) -> f64 {
        let mut acc = self.log_prior[c];
        for j in 0..self.n_features {
            let var = self.vars[c][j];
            let d = row[j] - self.means[c][j];
            acc += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - d * d / (2.0 * var);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_unit_variance_classes_give_logistic_posterior() {
        // Classes {0,2} and {4,6}: both have ML variance 1, means 1 and
        // 5. At x = 4 the log-likelihood gap is 4, so the positive
        // posterior is 1/(1+e^-4); at x = 2 it mirrors to 1/(1+e^4).
        let x = vec![vec![0.0], vec![2.0], vec![4.0], vec![6.0]];
        let y = vec![false, false, true, true];
        let model = train(&x, &y, &NbParams::default()).unwrap();
        let s = model.scores(&[vec![4.0], vec![2.0]]);
        let hi = 1.0 / (1.0 + (-4.0f64).exp());
        assert!((s[0] - hi).abs() < 1e-6, "got {}", s[0]);
        assert!((s[1] - (1.0 - hi)).abs() < 1e-6, "got {}", s[1]);
        assert!((hi - 0.982).abs() < 1e-3);
    }

    #[test]
    fn population_variance_is_used() {
        let x = vec![vec![0.0], vec![2.0], vec![10.0], vec![14.0]];
        let y = vec![false, false, true, true];
        let model = train(&x, &y, &NbParams::default()).unwrap();
        // class 0: mean 1, population var 1 (+eps); sample var would be 2.
        assert!((model.means[0][0] - 1.0).abs() < 1e-12);
        assert!((model.vars[0][0] - 1.0).abs() < 1e-6);
        assert!((model.vars[1][0] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        let y = vec![true, true];
        assert!(matches!(
            train(&x, &y, &NbParams::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn all_constant_features_are_rejected() {
        // Every feature identical in every row leaves nothing to smooth
        // against: max pooled variance is zero.
        let x = vec![vec![3.0, 3.0], vec![3.0, 3.0], vec![3.0, 3.0]];
        let y = vec![false, true, true];
        assert!(matches!(
            train(&x, &y, &NbParams::default()),
            Err(Error::ConstantInput)
        ));
    }

    #[test]
    fn prior_shifts_scores_toward_majority() {
        let x = vec![vec![0.0], vec![0.2], vec![0.4], vec![1.0]];
        let y = vec![false, false, false, true];
        let model = train(&x, &y, &NbParams::default()).unwrap();
        // Far from both classes the prior dominates; log_prior encodes 3:1.
        assert!((model.log_prior[0] - (0.75f64).ln()).abs() < 1e-12);
        assert!((model.log_prior[1] - (0.25f64).ln()).abs() < 1e-12);
    }
}
