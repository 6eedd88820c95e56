//! Learner and metric implementations checked against independent
//! reference computations: brute-force Mann-Whitney for AUC, the plain
//! decision tree for the degenerate forest, central finite differences
//! for both gradient-trained models, and an all-pairs scan for KNN.

mod common;

fn assert_clean(failures: Vec<String>) {
    assert!(
        failures.is_empty(),
        "{} oracle mismatches:\n{}",
        failures.len(),
        failures.join("\n")
    );
}

#[test]
fn auc_equals_mann_whitney_on_200_random_instances() {
    assert_clean(common::auc_mann_whitney_failures(200, 11));
}

#[test]
fn degenerate_forest_equals_decision_tree_on_50_random_instances() {
    assert_clean(common::rf_equals_dt_failures(50, 12));
}

#[test]
fn logistic_gradient_matches_central_differences_on_50_random_instances() {
    assert_clean(common::lr_gradient_failures(50, 13));
}

#[test]
fn mlp_gradient_matches_central_differences_on_50_random_instances() {
    assert_clean(common::mlp_gradient_failures(50, 14));
}

#[test]
fn knn_matches_brute_force_scan_on_50_random_instances() {
    assert_clean(common::knn_bruteforce_failures(50, 15));
}
