//! Splits, cross-validation, hyperparameter search, and the reported
//! metrics: accuracy, Wald interval, ROC curve, AUC.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::dataset::ScalerParams;
use crate::error::Error;
use crate::learners::{KnnParams, ModelSpec, AlgoParams};
use crate::rng::stream;

/// Index partition for one train/test experiment.
#[derive(Debug, Clone)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub stratified: bool,
}

/// Stratified shuffle split. The test set holds ceil(fraction * n) rows:
/// floor-proportional per label, with the leftover row going to the
/// larger class (the negative class on a tie).
pub fn train_test_split(
    n: usize,
    test_fraction: f64,
    seed: u64,
    labels: &[bool],
) -> Result<SplitPlan, Error> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::BadFraction {
            fraction: test_fraction,
        });
    }
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: labels.len(),
        });
    }
    let mut pos: Vec<usize> = (0..n).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| !labels[i]).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClassStratify);
    }

    let test_total = (test_fraction * n as f64).ceil() as usize;
    let mut test_pos = test_total * pos.len() / n;
    let mut test_neg = test_total * neg.len() / n;
    if test_pos + test_neg < test_total {
        // Exactly one leftover row; floors lose less than one between them.
        if pos.len() > neg.len() {
            test_pos += 1;
        } else {
            test_neg += 1;
        }
    }

    pos.shuffle(&mut stream(seed, "split_pos"));
    neg.shuffle(&mut stream(seed, "split_neg"));

    let mut test_indices: Vec<usize> = pos[..test_pos]
        .iter()
        .chain(&neg[..test_neg])
        .copied()
        .collect();
    let mut train_indices: Vec<usize> = pos[test_pos..]
        .iter()
        .chain(&neg[test_neg..])
        .copied()
        .collect();
    test_indices.sort_unstable();
    train_indices.sort_unstable();

    Ok(SplitPlan {
        train_indices,
        test_indices,
        seed,
        stratified: true,
    })
}

/// Validation folds that partition 0..n-1 with sizes differing by at
/// most one; the first n % k folds take the extra row.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, Error> {
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    if k == 0 {
        return Err(Error::KTooLarge { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, "kfold"));

    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold: Vec<usize> = order[at..at + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        at += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone)]
pub struct CvScore {
    pub mean: f64,
    pub fold_scores: Vec<f64>,
}

/// Mean validation accuracy over k folds. Features arrive raw; the
/// scaler is refit on each fold's training rows so no test information
/// leaks into the transform.
pub fn cross_val_score(
    spec: &ModelSpec,
    x: &[Vec<f64>],
    y: &[bool],
    k: usize,
) -> Result<CvScore, Error> {
    let folds = kfold_indices(x.len(), k, spec.seed)?;
    let mut fold_scores = Vec::with_capacity(k);
    for fold in &folds {
        let in_fold = |i: &usize| fold.binary_search(i).is_ok();
        let train_rows: Vec<usize> = (0..x.len()).filter(|i| !in_fold(i)).collect();

        let train_raw: Vec<Vec<f64>> = train_rows.iter().map(|&i| x[i].clone()).collect();
        let valid_raw: Vec<Vec<f64>> = fold.iter().map(|&i| x[i].clone()).collect();
        let scaler = ScalerParams::fit_matrix(&train_raw)?;
        let train_x = scaler.transform_matrix(&train_raw)?;
        let valid_x = scaler.transform_matrix(&valid_raw)?;
        let train_y: Vec<bool> = train_rows.iter().map(|&i| y[i]).collect();
        let valid_y: Vec<bool> = fold.iter().map(|&i| y[i]).collect();

        let model = spec.train(&train_x, &train_y)?;
        let predicted = model.predict(&valid_x, 0.5)?;
        fold_scores.push(accuracy(&predicted, &valid_y)?);
    }
    let mean = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
    Ok(CvScore { mean, fold_scores })
}

/// One evaluated candidate in a search.
#[derive(Debug, Clone)]
pub struct SearchRecord {
    pub params: String,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: ModelSpec,
    pub best_score: f64,
    pub log: Vec<SearchRecord>,
}

pub enum SearchSpace<'a> {
    /// Pre-expanded candidate list, evaluated in order.
    Grid(Vec<ModelSpec>),
    /// Seeded sampler invoked n_draws times.
    Random {
        n_draws: usize,
        sampler: Box<dyn FnMut(&mut ChaCha8Rng) -> ModelSpec + 'a>,
    },
}

/// Evaluates every candidate by k-fold CV and keeps the first best
/// (strict improvement only, so ties go to the earliest candidate).
pub fn hyperparameter_search(
    space: SearchSpace,
    x: &[Vec<f64>],
    y: &[bool],
    k: usize,
    seed: u64,
) -> Result<SearchOutcome, Error> {
    let candidates: Vec<ModelSpec> = match space {
        SearchSpace::Grid(c) => c,
        SearchSpace::Random {
            n_draws,
            mut sampler,
        } => {
            let mut rng = stream(seed, "search");
            (0..n_draws).map(|_| sampler(&mut rng)).collect()
        }
    };
    if candidates.is_empty() {
        return Err(Error::EmptySpace);
    }

    let mut log = Vec::with_capacity(candidates.len());
    let mut best: Option<(ModelSpec, f64)> = None;
    for spec in candidates {
        let cv = cross_val_score(&spec, x, y, k)?;
        log.push(SearchRecord {
            params: spec.params_string(),
            score: cv.mean,
        });
        if best.as_ref().is_none_or(|(_, s)| cv.mean > *s) {
            best = Some((spec, cv.mean));
        }
    }
    let (best, best_score) = best.expect("nonempty candidate list");
    Ok(SearchOutcome {
        best,
        best_score,
        log,
    })
}

/// Position of the elbow in an error curve: the first point after which
/// the improvement falls below 10% of the total drop. A flat or rising
/// curve elbows at the start; a curve that keeps improving elbows at
/// the end.
pub fn elbow_choose(errors: &[f64]) -> usize {
    if errors.len() < 2 {
        return 0;
    }
    let total = errors[0] - errors[errors.len() - 1];
    if total <= 0.0 {
        return 0;
    }
    for i in 0..errors.len() - 1 {
        if errors[i] - errors[i + 1] < 0.1 * total {
            return i;
        }
    }
    errors.len() - 1
}

/// CV error per k in 1..=k_max, then the elbow rule. Returns the chosen
/// k and the (k, error) curve for the log.
pub fn elbow_knn(
    x: &[Vec<f64>],
    y: &[bool],
    k_max: usize,
    folds: usize,
    seed: u64,
) -> Result<(usize, Vec<(usize, f64)>), Error> {
    let mut curve = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let spec = ModelSpec {
            seed,
            params: AlgoParams::Knn(KnnParams { k }),
        };
        let cv = cross_val_score(&spec, x, y, folds)?;
        curve.push((k, 1.0 - cv.mean));
    }
    let errors: Vec<f64> = curve.iter().map(|(_, e)| *e).collect();
    let chosen = curve[elbow_choose(&errors)].0;
    Ok((chosen, curve))
}

pub fn accuracy(predicted: &[bool], actual: &[bool]) -> Result<f64, Error> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::EmptySamples);
    }
    let hits = predicted
        .iter()
        .zip(actual)
        .filter(|(p, a)| p == a)
        .count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Wald half-width z * sqrt(score(1-score)/n).
pub fn wald_ci(score: f64, n_test: usize, z: f64) -> Result<f64, Error> {
    if !(0.0..=1.0).contains(&score) || !score.is_finite() {
        return Err(Error::BadScore { score });
    }
    if n_test == 0 {
        return Err(Error::Config("wald_ci needs n_test >= 1".into()));
    }
    Ok(z * (score * (1.0 - score) / n_test as f64).sqrt())
}

/// ROC by descending-score sweep with tied scores collapsed into one
/// step, plus trapezoidal AUC. Counts stay integers until the final
/// division, which makes the AUC equal the Mann-Whitney concordance
/// probability bit for bit.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<(Vec<(f64, f64)>, f64), Error> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let p = labels.iter().filter(|l| **l).count();
    let n = labels.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));

    // Cumulative integer (fp, tp) after each distinct-score group.
    let mut points_int: Vec<(u64, u64)> = vec![(0, 0)];
    let mut fp = 0u64;
    let mut tp = 0u64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        points_int.push((fp, tp));
        i = j;
    }

    let mut numerator = 0u64; // 2 * area in count units
    for w in points_int.windows(2) {
        let (fp0, tp0) = w[0];
        let (fp1, tp1) = w[1];
        numerator += (fp1 - fp0) * (tp1 + tp0);
    }
    let auc = numerator as f64 / (2 * p as u64 * n as u64) as f64;

    let points = points_int
        .into_iter()
        .map(|(f, t)| (f as f64 / n as f64, t as f64 / p as f64))
        .collect();
    Ok((points, auc))
}

/// Everything reported per algorithm for one train/test experiment.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub algorithm: &'static str,
    pub spec: ModelSpec,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub ci_half_width: f64,
    pub roc_points: Vec<(f64, f64)>,
    pub auc: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub warning: Option<String>,
}

/// Trains the given recipe and measures it on the held-out rows.
/// Inputs are already scaled; `threshold` cuts scores into labels and
/// `z` sets the interval width.
pub fn evaluate_model(
    spec: &ModelSpec,
    train_x: &[Vec<f64>],
    train_y: &[bool],
    test_x: &[Vec<f64>],
    test_y: &[bool],
    threshold: f64,
    z: f64,
) -> Result<EvalReport, Error> {
    let model = spec.train(train_x, train_y)?;
    let train_pred = model.predict(train_x, threshold)?;
    let test_pred = model.predict(test_x, threshold)?;
    let train_accuracy = accuracy(&train_pred, train_y)?;
    let test_accuracy = accuracy(&test_pred, test_y)?;
    let ci_half_width = wald_ci(test_accuracy, test_y.len(), z)?;
    let (roc_points, auc) = roc_auc(&model.predict_score(test_x)?, test_y)?;

    let mut tp = 0;
    let mut fp = 0;
    let mut tn = 0;
    let mut fn_ = 0;
    for (pred, &actual) in test_pred.iter().zip(test_y) {
        match (pred, actual) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }

    let warning = model
        .convergence_warning()
        .then(|| "iteration cap reached before convergence".to_string());

    Ok(EvalReport {
        algorithm: spec.algorithm().tag(),
        spec: spec.clone(),
        train_accuracy,
        test_accuracy,
        ci_half_width,
        roc_points,
        auc,
        tp,
        fp,
        tn,
        fn_,
        warning,
    })
}
