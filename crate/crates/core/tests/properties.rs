//! Randomized invariants over the pure pipeline functions and the
//! learner contract. Anything asserted here must hold for every input
//! the generators can produce, not just the pinned snapshot.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::Rng as _;

use maskbench::dataset::{
    build_labeled_dataset, daily_from_cumulative, describe_dataset, label_from_delta,
    pearson_correlation, DeltaClass, Label, LabeledSample, ScalerParams,
};
use maskbench::eval::{kfold_indices, roc_auc, train_test_split, wald_ci};
use maskbench::ingest::{
    join_records, parse_census_covariates, parse_county_timeseries, parse_mask_survey, ValueKind,
};
use maskbench::learners::{AlgoParams, Algorithm, KnnParams, ModelSpec};
use maskbench::synth::{
    generate_synthetic_dataset, write_input_files, SynthSpec, SYNTH_STATE,
};

fn sample_from(features: [f64; 8], dr_delta: f64) -> LabeledSample {
    LabeledSample {
        fips: "99001".into(),
        features,
        dr_delta,
        label: if dr_delta > 0.0 {
            Label::Increase
        } else {
            Label::Decrease
        },
    }
}

proptest! {
    #[test]
    fn daily_prefix_sums_rebuild_an_anomaly_free_series(
        start in 0u64..1000,
        increments in prop::collection::vec(0u64..500, 1..60),
    ) {
        let mut cumulative = vec![start];
        for d in &increments {
            cumulative.push(cumulative.last().unwrap() + d);
        }
        let (daily, anomalies) = daily_from_cumulative(&cumulative).unwrap();
        prop_assert_eq!(anomalies, 0);
        prop_assert_eq!(&daily, &increments);
        let mut rebuilt = start;
        for d in &daily {
            rebuilt += d;
        }
        prop_assert_eq!(rebuilt, *cumulative.last().unwrap());
    }

    #[test]
    fn label_class_tracks_the_delta_sign(delta in -200.0f64..200.0) {
        let expected = if delta > 0.0 {
            DeltaClass::Increase
        } else if delta < 0.0 {
            DeltaClass::Decrease
        } else {
            DeltaClass::NoChange
        };
        prop_assert_eq!(label_from_delta(delta), expected);
    }

    #[test]
    fn scaler_keeps_fit_rows_in_unit_interval_and_preserves_order(
        rows in prop::collection::vec(
            prop::collection::vec(-1e3f64..1e3, 3),
            2..25,
        ),
    ) {
        let params = ScalerParams::fit_matrix(&rows).unwrap();
        let scaled = params.transform_matrix(&rows).unwrap();
        for row in &scaled {
            for v in row {
                prop_assert!((0.0..=1.0).contains(v), "scaled value {v} outside [0,1]");
            }
        }
        for j in 0..3 {
            for a in 0..rows.len() {
                for b in 0..rows.len() {
                    if rows[a][j] < rows[b][j] {
                        prop_assert!(scaled[a][j] <= scaled[b][j]);
                    }
                    if rows[a][j] == rows[b][j] {
                        prop_assert_eq!(scaled[a][j], scaled[b][j]);
                    }
                }
            }
        }
    }

    #[test]
    fn degenerate_features_scale_to_zero(
        constant in -50.0f64..50.0,
        n in 2usize..20,
    ) {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![constant, i as f64]).collect();
        let params = ScalerParams::fit_matrix(&rows).unwrap();
        let scaled = params.transform_matrix(&rows).unwrap();
        prop_assert!(scaled.iter().all(|r| r[0] == 0.0));
    }

    #[test]
    fn pearson_is_symmetric_and_respects_affine_maps(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..30),
        a in 0.1f64..10.0,
        b in -20.0f64..20.0,
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(x.iter().any(|v| *v != x[0]));
        prop_assume!(y.iter().any(|v| *v != y[0]));

        let r = pearson_correlation(&x, &y).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r) || r.abs() < 1.0 + 1e-12);
        prop_assert_eq!(r, pearson_correlation(&y, &x).unwrap());

        let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        prop_assert!((pearson_correlation(&ax, &y).unwrap() - r).abs() < 1e-9);
        let nx: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert!((pearson_correlation(&nx, &y).unwrap() + r).abs() < 1e-9);
    }

    #[test]
    fn describe_quantiles_are_ordered(
        values in prop::collection::vec(-1e4f64..1e4, 1..50),
    ) {
        let samples: Vec<LabeledSample> = values
            .iter()
            .map(|&v| sample_from([v, -v, v * 2.0, 1.0, 2.0, 3.0, 4.0, 5.0], v + 0.5))
            .collect();
        let table = describe_dataset(&samples).unwrap();
        prop_assert_eq!(table.count, samples.len());
        for c in 0..table.columns.len() {
            prop_assert!(table.min[c] <= table.q25[c]);
            prop_assert!(table.q25[c] <= table.q50[c]);
            prop_assert!(table.q50[c] <= table.q75[c]);
            prop_assert!(table.q75[c] <= table.max[c]);
            prop_assert!(table.std[c] >= 0.0);
        }
    }

    #[test]
    fn split_partitions_exactly_and_stratifies(
        labels in prop::collection::vec(any::<bool>(), 3..150),
        fraction in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        prop_assume!(labels.iter().any(|l| *l) && labels.iter().any(|l| !*l));
        let n = labels.len();
        let plan = train_test_split(n, fraction, seed, &labels).unwrap();

        let mut all: Vec<usize> = plan
            .train_indices
            .iter()
            .chain(&plan.test_indices)
            .copied()
            .collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<usize>>());

        let expected_test = (fraction * n as f64).ceil() as usize;
        prop_assert_eq!(plan.test_indices.len(), expected_test);

        // Class shares in the test set stay within one row of exact
        // proportionality.
        let pos_total = labels.iter().filter(|l| **l).count();
        let pos_test = plan.test_indices.iter().filter(|&&i| labels[i]).count();
        let exact = expected_test as f64 * pos_total as f64 / n as f64;
        prop_assert!((pos_test as f64 - exact).abs() <= 1.0 + 1e-9);
    }

    #[test]
    fn kfold_partitions_with_balanced_sizes(
        n in 2usize..120,
        k in 2usize..10,
        seed in any::<u64>(),
    ) {
        prop_assume!(k <= n);
        let folds = kfold_indices(n, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);

        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<usize>>());

        let ceil = n.div_ceil(k);
        let floor = n / k;
        for (i, fold) in folds.iter().enumerate() {
            let expected = if i < n % k { ceil } else { floor };
            prop_assert_eq!(fold.len(), expected);
        }
    }

    #[test]
    fn wald_is_symmetric_and_shrinks_with_n(
        score in 0.0f64..=1.0,
        n1 in 1usize..500,
        extra in 1usize..500,
    ) {
        let a = wald_ci(score, n1, 1.96).unwrap();
        let b = wald_ci(1.0 - score, n1, 1.96).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        let wider_n = wald_ci(score, n1 + extra, 1.96).unwrap();
        prop_assert!(wider_n <= a);
    }

    #[test]
    fn roc_auc_ignores_monotone_rescaling_and_flips_with_labels(
        raw in prop::collection::vec((0u8..9, any::<bool>()), 2..40),
    ) {
        let scores: Vec<f64> = raw.iter().map(|(s, _)| f64::from(*s) / 8.0).collect();
        let labels: Vec<bool> = raw.iter().map(|(_, l)| *l).collect();
        prop_assume!(labels.iter().any(|l| *l) && labels.iter().any(|l| !*l));

        let (points, auc) = roc_auc(&scores, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&auc));
        prop_assert_eq!(points.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(points.last().copied(), Some((1.0, 1.0)));

        // Dyadic affine map: exact in f64, preserves order and ties.
        let mapped: Vec<f64> = scores.iter().map(|s| s * 0.5 + 0.25).collect();
        let (mapped_points, mapped_auc) = roc_auc(&mapped, &labels).unwrap();
        prop_assert_eq!(auc, mapped_auc);
        prop_assert_eq!(points, mapped_points);

        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        let (_, flipped_auc) = roc_auc(&scores, &flipped).unwrap();
        prop_assert!((auc + flipped_auc - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_round_trips_through_toml(
        seed in 0u64..(i64::MAX as u64),
        window in 1u32..120,
        fraction in 0.05f64..0.95,
    ) {
        let cfg = maskbench::config::RunConfig {
            seed,
            window_days: window,
            test_fraction: fraction,
            ..maskbench::config::RunConfig::default()
        };
        let text = toml::to_string(&cfg).unwrap();
        let back: maskbench::config::RunConfig = toml::from_str(&text).unwrap();
        prop_assert_eq!(cfg, back);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn every_learner_scores_random_data_inside_unit_interval(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let (x, y) = common::random_instance(&mut r, (9, 20), (1, 3));
        for alg in Algorithm::ALL {
            let model = ModelSpec::default_for(alg, seed).train(&x, &y).unwrap();
            let scores = model.predict_score(&x).unwrap();
            prop_assert!(
                scores.iter().all(|s| s.is_finite() && (0.0..=1.0).contains(s)),
                "{} out of range", alg.tag()
            );
        }
    }

    #[test]
    fn training_row_order_does_not_change_order_free_predictions(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut r = common::rng(seed);
        let (x, y) = common::random_instance(&mut r, (8, 20), (1, 3));
        let queries: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..x[0].len()).map(|_| r.gen_range(0.0..1.0)).collect())
            .collect();

        let mut order: Vec<usize> = (0..x.len()).collect();
        order.shuffle(&mut r);
        let xp: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
        let yp: Vec<bool> = order.iter().map(|&i| y[i]).collect();

        for alg in [
            Algorithm::NaiveBayes,
            Algorithm::LogisticRegression,
            Algorithm::Knn,
            Algorithm::SvmRbf,
        ] {
            let spec = ModelSpec::default_for(alg, 3);
            let base = spec.train(&x, &y).unwrap();
            let perm = spec.train(&xp, &yp).unwrap();
            let base_scores = base.predict_score(&queries).unwrap();
            let perm_scores = perm.predict_score(&queries).unwrap();
            let base_labels = base.predict(&queries, 0.5).unwrap();
            let perm_labels = perm.predict(&queries, 0.5).unwrap();

            for qi in 0..queries.len() {
                // Summation reorder and the SVM's stopping tolerance
                // move scores by small amounts; a query that close to
                // the threshold cannot pin down its label.
                let slack = if alg == Algorithm::SvmRbf { 2e-2 } else { 1e-7 };
                prop_assert!(
                    (base_scores[qi] - perm_scores[qi]).abs() <= slack,
                    "{} score moved {} under row permutation",
                    alg.tag(),
                    (base_scores[qi] - perm_scores[qi]).abs()
                );
                if (base_scores[qi] - 0.5).abs() > slack {
                    prop_assert_eq!(
                        base_labels[qi],
                        perm_labels[qi],
                        "{} flipped a confident prediction",
                        alg.tag()
                    );
                }
            }
        }
    }

    #[test]
    fn knn_with_distinct_distances_is_exactly_permutation_invariant(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut r = common::rng(seed);
        let (x, y) = common::random_instance(&mut r, (9, 15), (2, 2));
        let queries: Vec<Vec<f64>> = (0..5)
            .map(|_| vec![r.gen_range(0.0..1.0), r.gen_range(0.0..1.0)])
            .collect();
        // Continuous draws make exact distance ties vanishingly rare;
        // verify anyway so the exact-equality claim is sound.
        for q in &queries {
            let mut d: Vec<f64> = x
                .iter()
                .map(|row| row.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum())
                .collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assume!(d.windows(2).all(|w| w[0] != w[1]));
        }

        let mut order: Vec<usize> = (0..x.len()).collect();
        order.shuffle(&mut r);
        let xp: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
        let yp: Vec<bool> = order.iter().map(|&i| y[i]).collect();

        let spec = ModelSpec {
            seed: 0,
            params: AlgoParams::Knn(KnnParams { k: 4 }),
        };
        let base = spec.train(&x, &y).unwrap();
        let perm = spec.train(&xp, &yp).unwrap();
        prop_assert_eq!(
            base.predict_score(&queries).unwrap(),
            perm.predict_score(&queries).unwrap()
        );
        prop_assert_eq!(
            base.predict(&queries, 0.5).unwrap(),
            perm.predict(&queries, 0.5).unwrap()
        );
    }

    #[test]
    fn synthetic_records_survive_the_file_round_trip(
        n in 4usize..24,
        balance in 0.2f64..0.8,
        noisy in any::<bool>(),
        noise_level in 0.05f64..0.5,
        seed in any::<u64>(),
    ) {
        let noise = if noisy { noise_level } else { 0.0 };
        let spec = SynthSpec {
            n_counties: n,
            class_balance: balance,
            noise_scale: noise,
            seed,
            ..SynthSpec::default()
        };
        let (records, truth) = generate_synthetic_dataset(&spec).unwrap();
        prop_assert_eq!(records.len(), n);

        let dir = tempfile::tempdir().unwrap();
        write_input_files(dir.path(), &records).unwrap();
        let read = |name: &str| std::fs::read_to_string(dir.path().join(name)).unwrap();
        let cases = parse_county_timeseries(&read("cases.csv"), ValueKind::Cases).unwrap();
        let deaths = parse_county_timeseries(&read("deaths.csv"), ValueKind::Deaths).unwrap();
        let census = parse_census_covariates(&read("census.csv")).unwrap();
        let mask = parse_mask_survey(&read("mask.csv")).unwrap();
        let states: BTreeSet<String> = [SYNTH_STATE.to_string()].into();
        let (joined, missing) = join_records(&cases, &deaths, &census, &mask, &states).unwrap();

        prop_assert!(missing.is_empty());
        prop_assert_eq!(&joined, &records);

        // Labeling the round-tripped records reproduces the generator's
        // truth whenever nothing blurred the windows.
        if noise == 0.0 {
            let build = build_labeled_dataset(&joined, &SynthSpec::intervention()).unwrap();
            prop_assert_eq!(build.samples.len(), truth.len());
            for (sample, (fips, label)) in build.samples.iter().zip(&truth) {
                prop_assert_eq!(&sample.fips, fips);
                prop_assert_eq!(sample.label, *label);
            }
        }
    }
}
