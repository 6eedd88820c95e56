//! Shared helpers for the integration suites: snapshot-rooted configs,
//! seeded random problem instances, and the independent oracles the
//! learner implementations are checked against.

// Each test binary compiles this module separately and uses a subset.
#![allow(dead_code, unused_imports)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use maskbench::config::RunConfig;
use maskbench::learners::{
    logistic, AlgoParams, Algorithm, ForestParams, KnnParams, LrParams, MlpParams, ModelSpec,
    SplitCriterion, TrainedModel, TreeParams,
};

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("workspace root")
}

/// Default config with the snapshot inputs resolved to absolute paths,
/// so tests do not depend on the process working directory.
pub fn snapshot_config() -> RunConfig {
    let root = workspace_root();
    let abs = |rel: &str| root.join(rel).display().to_string();
    let mut cfg = RunConfig::default();
    cfg.inputs.cases = abs(&cfg.inputs.cases);
    cfg.inputs.deaths = abs(&cfg.inputs.deaths);
    cfg.inputs.census = abs(&cfg.inputs.census);
    cfg.inputs.mask = abs(&cfg.inputs.mask);
    cfg
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random rectangular problem with both classes present. Features land
/// in [0, 1] like scaled pipeline data; positives are shifted so the
/// instance carries some signal.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    n_range: (usize, usize),
    p_range: (usize, usize),
) -> (Vec<Vec<f64>>, Vec<bool>) {
    let n = rng.gen_range(n_range.0..=n_range.1).max(2);
    let p = rng.gen_range(p_range.0..=p_range.1).max(1);
    loop {
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let label = rng.gen_bool(0.5);
            let shift = if label { 0.25 } else { 0.0 };
            x.push((0..p).map(|_| rng.gen_range(0.0..0.75) + shift).collect());
            y.push(label);
        }
        if y.iter().any(|v| *v) && y.iter().any(|v| !*v) {
            return (x, y);
        }
    }
}

/// Oracle (a): AUC must equal brute-force Mann-Whitney concordance with
/// ties counted half, bit for bit. Returns failure descriptions.
pub fn auc_mann_whitney_failures(trials: usize, seed: u64) -> Vec<String> {
    let mut r = rng(seed);
    let mut failures = Vec::new();
    for t in 0..trials {
        let n = r.gen_range(2..=20);
        let (scores, labels) = loop {
            // Half the trials draw from a coarse grid to force ties.
            let coarse = r.gen_bool(0.5);
            let scores: Vec<f64> = (0..n)
                .map(|_| {
                    if coarse {
                        f64::from(r.gen_range(0..5)) / 4.0
                    } else {
                        r.gen_range(0.0..1.0)
                    }
                })
                .collect();
            let labels: Vec<bool> = (0..n).map(|_| r.gen_bool(0.5)).collect();
            if labels.iter().any(|l| *l) && labels.iter().any(|l| !*l) {
                break (scores, labels);
            }
        };

        let (points, auc) = maskbench::eval::roc_auc(&scores, &labels).unwrap();
        let p = labels.iter().filter(|l| **l).count() as u64;
        let q = labels.len() as u64 - p;
        let mut numerator = 0u64; // 2*concordant + ties
        for (i, &si) in scores.iter().enumerate() {
            if !labels[i] {
                continue;
            }
            for (j, &sj) in scores.iter().enumerate() {
                if labels[j] {
                    continue;
                }
                if si > sj {
                    numerator += 2;
                } else if si == sj {
                    numerator += 1;
                }
            }
        }
        let expected = numerator as f64 / (2 * p * q) as f64;
        if auc != expected {
            failures.push(format!("trial {t}: auc {auc} != mann-whitney {expected}"));
        }
        if points.first() != Some(&(0.0, 0.0)) || points.last() != Some(&(1.0, 1.0)) {
            failures.push(format!("trial {t}: roc endpoints {points:?}"));
        }
    }
    failures
}

/// Oracle (b): a single-tree, all-features, no-bootstrap forest must
/// score identically to the plain decision tree.
pub fn rf_equals_dt_failures(trials: usize, seed: u64) -> Vec<String> {
    let mut r = rng(seed);
    let mut failures = Vec::new();
    for t in 0..trials {
        let (x, y) = random_instance(&mut r, (4, 40), (1, 5));
        let p = x[0].len();
        let depth = r.gen_range(1..=6);

        let tree = ModelSpec {
            seed: 0,
            params: AlgoParams::DecisionTree(TreeParams {
                max_depth: depth,
                criterion: SplitCriterion::Gini,
                min_samples_split: 2,
            }),
        };
        let forest = ModelSpec {
            seed: t as u64,
            params: AlgoParams::RandomForest(ForestParams {
                n_estimators: 1,
                max_depth: depth,
                max_features: p,
                min_samples_split: 2,
                bootstrap: false,
            }),
        };
        let ts = tree.train(&x, &y).unwrap().predict_score(&x).unwrap();
        let fs = forest.train(&x, &y).unwrap().predict_score(&x).unwrap();
        if ts != fs {
            failures.push(format!("trial {t}: forest scores diverge from tree"));
        }
    }
    failures
}

fn central_difference(mut f: impl FnMut(f64) -> f64, at: f64, h: f64) -> f64 {
    (f(at + h) - f(at - h)) / (2.0 * h)
}

fn rel_gap(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

/// Oracle (c), logistic half: analytic gradient vs central differences.
pub fn lr_gradient_failures(trials: usize, seed: u64) -> Vec<String> {
    let mut r = rng(seed);
    let mut failures = Vec::new();
    for t in 0..trials {
        let (x, y) = random_instance(&mut r, (3, 25), (1, 4));
        let p = x[0].len();
        let w: Vec<f64> = (0..p).map(|_| r.gen_range(-1.0..1.0)).collect();
        let b = r.gen_range(-1.0..1.0);
        let c = *[1.0, 100.0, 1000.0].get(r.gen_range(0..3)).unwrap();

        let (gw, gb) = logistic::grad(&x, &y, &w, b, c);
        let h = 1e-6;
        for j in 0..p {
            let numeric = central_difference(
                |v| {
                    let mut wj = w.clone();
                    wj[j] = v;
                    logistic::loss(&x, &y, &wj, b, c)
                },
                w[j],
                h,
            );
            if rel_gap(gw[j], numeric) > 1e-4 {
                failures.push(format!("trial {t}: dL/dw[{j}] {} vs {numeric}", gw[j]));
            }
        }
        let numeric = central_difference(|v| logistic::loss(&x, &y, &w, v, c), b, h);
        if rel_gap(gb, numeric) > 1e-4 {
            failures.push(format!("trial {t}: dL/db {gb} vs {numeric}"));
        }
    }
    failures
}

/// Oracle (c), network half: grad_vec vs central differences through
/// the flattened parameter vector.
pub fn mlp_gradient_failures(trials: usize, seed: u64) -> Vec<String> {
    let mut failures = Vec::new();
    let mut r = rng(seed);
    for t in 0..trials {
        let (x, y) = random_instance(&mut r, (3, 12), (1, 3));
        let spec = ModelSpec {
            seed: t as u64,
            params: AlgoParams::Mlp(MlpParams {
                hidden: 4,
                learning_rate: 0.01,
                epochs: 0,
            }),
        };
        let TrainedModel::Mlp(mut model) = spec.train(&x, &y).unwrap() else {
            unreachable!()
        };
        // Nudge away from the ReLU kink so the numeric derivative is
        // well defined at every coordinate.
        let theta: Vec<f64> = model
            .params_vec()
            .iter()
            .map(|v| v + 0.05)
            .collect();
        model.set_params(&theta);

        let analytic = model.grad_vec(&x, &y);
        let h = 1e-6;
        for i in 0..theta.len() {
            let numeric = central_difference(
                |v| {
                    let mut probe = theta.clone();
                    probe[i] = v;
                    let mut m = model.clone();
                    m.set_params(&probe);
                    m.loss(&x, &y)
                },
                theta[i],
                h,
            );
            if rel_gap(analytic[i], numeric) > 1e-4 {
                failures.push(format!(
                    "trial {t}: dL/dtheta[{i}] {} vs {numeric}",
                    analytic[i]
                ));
            }
        }
    }
    failures
}

/// Oracle (d): KNN scores and labels vs an independent all-pairs scan.
pub fn knn_bruteforce_failures(trials: usize, seed: u64) -> Vec<String> {
    let mut r = rng(seed);
    let mut failures = Vec::new();
    for t in 0..trials {
        let (x, y) = random_instance(&mut r, (3, 30), (1, 4));
        let k = r.gen_range(1..=x.len());
        let spec = ModelSpec {
            seed: 0,
            params: AlgoParams::Knn(KnnParams { k }),
        };
        let model = spec.train(&x, &y).unwrap();

        let queries: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..x[0].len()).map(|_| r.gen_range(0.0..1.0)).collect())
            .collect();
        let scores = model.predict_score(&queries).unwrap();
        let labels = model.predict(&queries, 0.5).unwrap();

        for (qi, q) in queries.iter().enumerate() {
            let mut dist: Vec<(f64, usize)> = x
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    let d2: f64 = row.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d2, i)
                })
                .collect();
            dist.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let votes = dist[..k].iter().filter(|(_, i)| y[*i]).count();
            let expected_score = votes as f64 / k as f64;
            let expected_label = if expected_score == 0.5 {
                y[dist[0].1]
            } else {
                expected_score >= 0.5
            };
            if scores[qi] != expected_score {
                failures.push(format!(
                    "trial {t} query {qi}: score {} vs {expected_score}",
                    scores[qi]
                ));
            }
            if labels[qi] != expected_label {
                failures.push(format!(
                    "trial {t} query {qi}: label {} vs {expected_label}",
                    labels[qi]
                ));
            }
        }
    }
    failures
}

/// Trains one default-parameter model per algorithm on a fresh split
/// and returns (tag, test accuracy) pairs; the workhorse behind the
/// robustness acceptance check.
pub fn default_run_accuracies(
    samples: &[maskbench::dataset::LabeledSample],
    seed: u64,
) -> Vec<(&'static str, f64)> {
    use maskbench::dataset::ScalerParams;
    use maskbench::eval::{accuracy, train_test_split};
    use maskbench::rng::derive_seed;

    let labels: Vec<bool> = samples.iter().map(|s| s.label.is_increase()).collect();
    let raw: Vec<Vec<f64>> = samples.iter().map(|s| s.features.to_vec()).collect();
    let plan = train_test_split(samples.len(), 0.2, seed, &labels).unwrap();
    let take = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<bool>) {
        (
            idx.iter().map(|&i| raw[i].clone()).collect(),
            idx.iter().map(|&i| labels[i]).collect(),
        )
    };
    let (train_raw, train_y) = take(&plan.train_indices);
    let (test_raw, test_y) = take(&plan.test_indices);
    let scaler = ScalerParams::fit_matrix(&train_raw).unwrap();
    let train_x = scaler.transform_matrix(&train_raw).unwrap();
    let test_x = scaler.transform_matrix(&test_raw).unwrap();

    Algorithm::ALL
        .into_iter()
        .map(|alg| {
            let spec = ModelSpec::default_for(alg, derive_seed(seed, alg.tag()));
            let model = spec.train(&train_x, &train_y).unwrap();
            let acc = accuracy(&model.predict(&test_x, 0.5).unwrap(), &test_y).unwrap();
            (alg.tag(), acc)
        })
        .collect()
}
