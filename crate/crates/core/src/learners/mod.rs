//! Nine binary classifiers behind one contract: train on scaled features,
//! produce scores in [0, 1] and hard labels via a score threshold.
//!
//! All of the fitting math lives in this crate; no external ML code is
//! used. Models are immutable once trained and safe to share across
//! threads. Training is deterministic under (spec, data, seed).

pub mod boosting;
pub mod extra_trees;
pub mod knn;
pub mod logistic;
pub mod mlp;
pub mod naive_bayes;
pub mod svm;
pub mod tree;

mod forest;
pub use forest::{ForestModel, ForestParams};

use crate::error::Error;

pub use boosting::{GbModel, GbParams};
pub use extra_trees::{EtModel, EtParams};
pub use knn::{KnnModel, KnnParams};
pub use logistic::{LogisticModel, LrParams};
pub use mlp::{MlpModel, MlpParams};
pub use naive_bayes::{NbModel, NbParams};
pub use svm::{SvmModel, SvmParams};
pub use tree::{SplitCriterion, TreeModel, TreeParams};

/// Algorithm tags in canonical report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Algorithm {
    NaiveBayes,
    LogisticRegression,
    Knn,
    DecisionTree,
    RandomForest,
    ExtraTrees,
    GradientBoosting,
    SvmRbf,
    Mlp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 9] = [
        Algorithm::NaiveBayes,
        Algorithm::LogisticRegression,
        Algorithm::Knn,
        Algorithm::DecisionTree,
        Algorithm::RandomForest,
        Algorithm::ExtraTrees,
        Algorithm::GradientBoosting,
        Algorithm::SvmRbf,
        Algorithm::Mlp,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::NaiveBayes => "naive_bayes",
            Algorithm::LogisticRegression => "logistic_regression",
            Algorithm::Knn => "knn",
            Algorithm::DecisionTree => "decision_tree",
            Algorithm::RandomForest => "random_forest",
            Algorithm::ExtraTrees => "extra_trees",
            Algorithm::GradientBoosting => "gradient_boosting",
            Algorithm::SvmRbf => "svm_rbf",
            Algorithm::Mlp => "mlp",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Algorithm> {
        Algorithm::ALL.into_iter().find(|a| a.tag() == tag)
    }
}

/// Algorithm choice plus its full hyperparameter set.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgoParams {
    NaiveBayes(NbParams),
    LogisticRegression(LrParams),
    Knn(KnnParams),
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    ExtraTrees(EtParams),
    GradientBoosting(GbParams),
    SvmRbf(SvmParams),
    Mlp(MlpParams),
}

/// A complete training recipe: hyperparameters plus the seed that drives
/// every random draw the algorithm makes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub seed: u64,
    pub params: AlgoParams,
}

impl ModelSpec {
    /// The tuned defaults each algorithm ships with.
    pub fn default_for(alg: Algorithm, seed: u64) -> ModelSpec {
        let params = match alg {
            Algorithm::NaiveBayes => AlgoParams::NaiveBayes(NbParams::default()),
            Algorithm::LogisticRegression => AlgoParams::LogisticRegression(LrParams::default()),
            Algorithm::Knn => AlgoParams::Knn(KnnParams::default()),
            Algorithm::DecisionTree => AlgoParams::DecisionTree(TreeParams::default()),
            Algorithm::RandomForest => AlgoParams::RandomForest(ForestParams::default()),
            Algorithm::ExtraTrees => AlgoParams::ExtraTrees(EtParams::default()),
            Algorithm::GradientBoosting => AlgoParams::GradientBoosting(GbParams::default()),
            Algorithm::SvmRbf => AlgoParams::SvmRbf(SvmParams::default()),
            Algorithm::Mlp => AlgoParams::Mlp(MlpParams::default()),
        };
        ModelSpec { seed, params }
    }

    pub fn algorithm(&self) -> Algorithm {
        match &self.params {
            AlgoParams::NaiveBayes(_) => Algorithm::NaiveBayes,
            AlgoParams::LogisticRegression(_) => Algorithm::LogisticRegression,
            AlgoParams::Knn(_) => Algorithm::Knn,
            AlgoParams::DecisionTree(_) => Algorithm::DecisionTree,
            AlgoParams::RandomForest(_) => Algorithm::RandomForest,
            AlgoParams::ExtraTrees(_) => Algorithm::ExtraTrees,
            AlgoParams::GradientBoosting(_) => Algorithm::GradientBoosting,
            AlgoParams::SvmRbf(_) => Algorithm::SvmRbf,
            AlgoParams::Mlp(_) => Algorithm::Mlp,
        }
    }

    /// Rejects incomplete or out-of-range hyperparameters.
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::Config(msg));
        match &self.params {
            AlgoParams::NaiveBayes(p) => {
                if !(p.var_smoothing > 0.0) {
                    return bad(format!("naive_bayes var_smoothing {} must be > 0", p.var_smoothing));
                }
            }
            AlgoParams::LogisticRegression(p) => {
                if !(p.c > 0.0) {
                    return bad(format!("logistic_regression c {} must be > 0", p.c));
                }
                if p.max_iters == 0 {
                    return bad("logistic_regression max_iters must be >= 1".into());
                }
                if !(p.grad_tol > 0.0) {
                    return bad(format!("logistic_regression grad_tol {} must be > 0", p.grad_tol));
                }
            }
            AlgoParams::Knn(p) => {
                if p.k == 0 {
                    return bad("knn k must be >= 1".into());
                }
            }
            AlgoParams::DecisionTree(p) => {
                if p.max_depth == 0 {
                    return bad("decision_tree max_depth must be >= 1".into());
                }
                if p.min_samples_split < 2 {
                    return bad("decision_tree min_samples_split must be >= 2".into());
                }
            }
            AlgoParams::RandomForest(p) => {
                if p.n_estimators == 0 || p.max_depth == 0 || p.max_features == 0 {
                    return bad("random_forest sizes must be >= 1".into());
                }
                if p.min_samples_split < 2 {
                    return bad("random_forest min_samples_split must be >= 2".into());
                }
            }
            AlgoParams::ExtraTrees(p) => {
                if p.n_estimators == 0 || p.min_samples_leaf == 0 {
                    return bad("extra_trees sizes must be >= 1".into());
                }
                if p.min_samples_split < 2 {
                    return bad("extra_trees min_samples_split must be >= 2".into());
                }
            }
            AlgoParams::GradientBoosting(p) => {
                if !(p.learning_rate > 0.0) || p.max_depth == 0 || p.n_rounds == 0 {
                    return bad("gradient_boosting learning_rate/depth/rounds out of range".into());
                }
                if !(p.subsample > 0.0 && p.subsample <= 1.0) {
                    return bad(format!("gradient_boosting subsample {} must be in (0,1]", p.subsample));
                }
                if !(p.colsample_bytree > 0.0 && p.colsample_bytree <= 1.0) {
                    return bad(format!(
                        "gradient_boosting colsample_bytree {} must be in (0,1]",
                        p.colsample_bytree
                    ));
                }
                if !(p.gamma >= 0.0) || !(p.lambda >= 0.0) {
                    return bad("gradient_boosting gamma/lambda must be >= 0".into());
                }
            }
            AlgoParams::SvmRbf(p) => {
                if !(p.c > 0.0) {
                    return bad(format!("svm_rbf c {} must be > 0", p.c));
                }
                if let Some(g) = p.gamma {
                    if !(g > 0.0) {
                        return bad(format!("svm_rbf gamma {} must be > 0", g));
                    }
                }
                if !(p.tol > 0.0) || p.max_iters == 0 {
                    return bad("svm_rbf tol/max_iters out of range".into());
                }
            }
            AlgoParams::Mlp(p) => {
                if p.hidden == 0 {
                    return bad("mlp hidden must be >= 1".into());
                }
                if !(p.learning_rate > 0.0) {
                    return bad(format!("mlp learning_rate {} must be > 0", p.learning_rate));
                }
            }
        }
        Ok(())
    }

    /// Compact `key=value` rendering for search logs and manifests.
    pub fn params_string(&self) -> String {
        match &self.params {
            AlgoParams::NaiveBayes(p) => format!("var_smoothing={}", p.var_smoothing),
            AlgoParams::LogisticRegression(p) => format!("c={}", p.c),
            AlgoParams::Knn(p) => format!("k={}", p.k),
            AlgoParams::DecisionTree(p) => format!(
                "max_depth={} criterion={} min_samples_split={}",
                p.max_depth,
                p.criterion.name(),
                p.min_samples_split
            ),
            AlgoParams::RandomForest(p) => format!(
                "n_estimators={} max_depth={} max_features={} min_samples_split={} bootstrap={}",
                p.n_estimators, p.max_depth, p.max_features, p.min_samples_split, p.bootstrap
            ),
            AlgoParams::ExtraTrees(p) => format!(
                "n_estimators={} min_samples_split={} min_samples_leaf={}",
                p.n_estimators, p.min_samples_split, p.min_samples_leaf
            ),
            AlgoParams::GradientBoosting(p) => format!(
                "learning_rate={} max_depth={} gamma={} subsample={} colsample_bytree={} n_rounds={}",
                p.learning_rate, p.max_depth, p.gamma, p.subsample, p.colsample_bytree, p.n_rounds
            ),
            AlgoParams::SvmRbf(p) => match p.gamma {
                Some(g) => format!("c={} gamma={}", p.c, g),
                None => format!("c={} gamma=scale", p.c),
            },
            AlgoParams::Mlp(p) => format!(
                "hidden={} learning_rate={} epochs={}",
                p.hidden, p.learning_rate, p.epochs
            ),
        }
    }

    /// Fits this spec to the (already scaled) training data.
    pub fn train(&self, x: &[Vec<f64>], y: &[bool]) -> Result<TrainedModel, Error> {
        self.validate()?;
        check_xy(x, y)?;
        Ok(match &self.params {
            AlgoParams::NaiveBayes(p) => TrainedModel::NaiveBayes(naive_bayes::train(x, y, p)?),
            AlgoParams::LogisticRegression(p) => {
                TrainedModel::LogisticRegression(logistic::train(x, y, p)?)
            }
            AlgoParams::Knn(p) => TrainedModel::Knn(knn::train(x, y, p)?),
            AlgoParams::DecisionTree(p) => TrainedModel::DecisionTree(tree::train(x, y, p)?),
            AlgoParams::RandomForest(p) => {
                TrainedModel::RandomForest(forest::train(x, y, p, self.seed)?)
            }
            AlgoParams::ExtraTrees(p) => {
                TrainedModel::ExtraTrees(extra_trees::train(x, y, p, self.seed)?)
            }
            AlgoParams::GradientBoosting(p) => {
                TrainedModel::GradientBoosting(boosting::train(x, y, p, self.seed)?)
            }
            AlgoParams::SvmRbf(p) => TrainedModel::SvmRbf(svm::train(x, y, p)?),
            AlgoParams::Mlp(p) => TrainedModel::Mlp(mlp::train(x, y, p, self.seed)?),
        })
    }
}

/// A fitted classifier. Prediction is defined for any feature matrix of
/// the width the model was trained on.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    NaiveBayes(NbModel),
    LogisticRegression(LogisticModel),
    Knn(KnnModel),
    DecisionTree(TreeModel),
    RandomForest(ForestModel),
    ExtraTrees(EtModel),
    GradientBoosting(GbModel),
    SvmRbf(SvmModel),
    Mlp(MlpModel),
}

impl TrainedModel {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            TrainedModel::NaiveBayes(_) => Algorithm::NaiveBayes,
            TrainedModel::LogisticRegression(_) => Algorithm::LogisticRegression,
            TrainedModel::Knn(_) => Algorithm::Knn,
            TrainedModel::DecisionTree(_) => Algorithm::DecisionTree,
            TrainedModel::RandomForest(_) => Algorithm::RandomForest,
            TrainedModel::ExtraTrees(_) => Algorithm::ExtraTrees,
            TrainedModel::GradientBoosting(_) => Algorithm::GradientBoosting,
            TrainedModel::SvmRbf(_) => Algorithm::SvmRbf,
            TrainedModel::Mlp(_) => Algorithm::Mlp,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::NaiveBayes(m) => m.n_features,
            TrainedModel::LogisticRegression(m) => m.n_features,
            TrainedModel::Knn(m) => m.n_features,
            TrainedModel::DecisionTree(m) => m.n_features,
            TrainedModel::RandomForest(m) => m.n_features,
            TrainedModel::ExtraTrees(m) => m.n_features,
            TrainedModel::GradientBoosting(m) => m.n_features,
            TrainedModel::SvmRbf(m) => m.n_features,
            TrainedModel::Mlp(m) => m.n_features,
        }
    }

    /// False except for an SVM fit that hit its iteration cap.
    pub fn convergence_warning(&self) -> bool {
        match self {
            TrainedModel::SvmRbf(m) => !m.converged,
            _ => false,
        }
    }

    /// Positive-class scores, always finite and in [0, 1].
    pub fn predict_score(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, Error> {
        check_width(x, self.n_features())?;
        let scores = match self {
            TrainedModel::NaiveBayes(m) => m.scores(x),
            TrainedModel::LogisticRegression(m) => m.scores(x),
            TrainedModel::Knn(m) => m.scores(x),
            TrainedModel::DecisionTree(m) => m.scores(x),
            TrainedModel::RandomForest(m) => m.scores(x),
            TrainedModel::ExtraTrees(m) => m.scores(x),
            TrainedModel::GradientBoosting(m) => m.scores(x),
            TrainedModel::SvmRbf(m) => m.scores(x),
            TrainedModel::Mlp(m) => m.scores(x),
        };
        debug_assert!(scores.iter().all(|s| s.is_finite() && (0.0..=1.0).contains(s)));
        Ok(scores)
    }

    /// Hard labels: score >= threshold. KNN resolves an exact split vote
    /// (score equal to the 0.5 threshold) toward the nearest neighbor's
    /// label so k-even predictions stay deterministic and data-driven.
    pub fn predict(&self, x: &[Vec<f64>], threshold: f64) -> Result<Vec<bool>, Error> {
        let scores = self.predict_score(x)?;
        if let TrainedModel::Knn(m) = self {
            return Ok(x
                .iter()
                .zip(&scores)
                .map(|(q, s)| {
                    if *s == 0.5 && threshold == 0.5 {
                        m.tie_break_label(q)
                    } else {
                        *s >= threshold
                    }
                })
                .collect());
        }
        Ok(scores.iter().map(|s| *s >= threshold).collect())
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    // Split on sign to avoid overflow in exp for large |z|.
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow; cross-entropy is softplus(z) - t*z.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Shared training-input validation: rows nonempty, rectangular, and
/// matching the label vector.
pub(crate) fn check_xy(x: &[Vec<f64>], y: &[bool]) -> Result<(), Error> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let first = x.first().ok_or(Error::EmptySamples)?;
    if first.is_empty() {
        return Err(Error::EmptySamples);
    }
    for row in x {
        if row.len() != first.len() {
            return Err(Error::WidthMismatch {
                expected: first.len(),
                got: row.len(),
            });
        }
    }
    Ok(())
}

pub(crate) fn check_width(x: &[Vec<f64>], expected: usize) -> Result<(), Error> {
    for row in x {
        if row.len() != expected {
            return Err(Error::WidthMismatch {
                expected,
                got: row.len(),
            });
        }
    }
    Ok(())
}

pub(crate) fn require_both_classes(y: &[bool]) -> Result<(), Error> {
    let pos = y.iter().filter(|v| **v).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob_data() -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..10 {
            let t = f64::from(i) * 0.02;
            x.push(vec![0.1 + t, 0.2 + t]);
            y.push(false);
            x.push(vec![0.8 + t, 0.9 + t]);
            y.push(true);
        }
        (x, y)
    }

    #[test]
    fn score_equal_to_threshold_predicts_positive() {
        // A naive Bayes fit on symmetric data scores the midpoint at 0.5.
        let x = vec![vec![0.0], vec![2.0], vec![4.0], vec![6.0]];
        let y = vec![false, false, true, true];
        let spec = ModelSpec::default_for(Algorithm::NaiveBayes, 0);
        let model = spec.train(&x, &y).unwrap();
        let s = model.predict_score(&[vec![3.0]]).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-12);
        assert_eq!(model.predict(&[vec![3.0]], 0.5).unwrap(), vec![true]);
    }

    #[test]
    fn narrower_queries_are_width_mismatches() {
        let (x, y) = blob_data();
        let model = ModelSpec::default_for(Algorithm::Knn, 0).train(&x, &y).unwrap();
        let err = model.predict_score(&[vec![1.0]]).unwrap_err();
        match err {
            Error::WidthMismatch { expected, got } => {
                assert_eq!((expected, got), (2, 1));
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn every_algorithm_scores_within_unit_interval_on_its_training_set() {
        let (x, y) = blob_data();
        for alg in Algorithm::ALL {
            let model = ModelSpec::default_for(alg, 3).train(&x, &y).unwrap();
            let scores = model.predict_score(&x).unwrap();
            assert!(
                scores.iter().all(|s| (0.0..=1.0).contains(s) && s.is_finite()),
                "{} scored outside [0,1]",
                alg.tag()
            );
        }
    }

    #[test]
    fn empty_training_input_is_rejected() {
        let spec = ModelSpec::default_for(Algorithm::DecisionTree, 0);
        assert!(matches!(spec.train(&[], &[]), Err(Error::EmptySamples)));
    }

    #[test]
    fn tags_round_trip() {
        for alg in Algorithm::ALL {
            assert_eq!(Algorithm::from_tag(alg.tag()), Some(alg));
        }
        assert_eq!(Algorithm::from_tag("nope"), None);
    }
}
