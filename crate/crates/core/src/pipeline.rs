//! Stage orchestration behind the CLI. Each stage is a strict superset
//! of the previous one: ingest -> build-dataset -> evaluate -> report.
//! Everything downstream of the input files is a pure function of the
//! config, so rerunning a stage rewrites identical artifacts.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::dataset::{
    build_labeled_dataset, describe_dataset, fit_scaler, group_means, pearson_correlation,
    state_summary, DatasetBuild, DescribeTable, GroupMeans, LabeledSample, StateSummaryRow,
    FEATURE_NAMES,
};
use crate::error::Error;
use crate::eval::{
    elbow_knn, evaluate_model, hyperparameter_search, train_test_split, EvalReport, SearchRecord,
    SearchSpace, SplitPlan,
};
use crate::ingest::{
    join_records, parse_census_covariates, parse_county_timeseries, parse_mask_survey,
    CountyRecord, MissingCounty, ValueKind,
};
use crate::learners::{
    Algorithm, AlgoParams, EtParams, ForestParams, GbParams, KnnParams, LrParams, ModelSpec,
    SvmParams, TreeParams,
};
use crate::report::{self, InputDigest, RunManifest};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    BuildDataset,
    /// Default hyperparameters, no search.
    Evaluate,
    /// Tuned run: hyperparameter search, then the full artifact set.
    Report,
}

pub struct IngestProducts {
    pub records: Vec<CountyRecord>,
    pub missing: Vec<MissingCounty>,
    pub digests: BTreeMap<&'static str, InputDigest>,
}

pub struct DatasetProducts {
    pub ingest: IngestProducts,
    pub build: DatasetBuild,
    pub describe: DescribeTable,
    /// Pearson r of each raw feature against the delta, in feature
    /// order. NaN marks a constant feature.
    pub correlations: Vec<(String, f64)>,
    pub states: Vec<StateSummaryRow>,
    pub groups: GroupMeans,
}

pub struct EvalProducts {
    pub dataset: DatasetProducts,
    pub split: SplitPlan,
    /// Canonical algorithm order, filtered by the config.
    pub reports: Vec<EvalReport>,
    /// Search logs for the algorithms that ran a search (tuned runs).
    pub search_logs: Vec<(&'static str, Vec<SearchRecord>)>,
}

fn read_input(path: &str) -> Result<(String, InputDigest), Error> {
    let p = Path::new(path);
    let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
    let digest = InputDigest {
        path: path.to_string(),
        sha256: format!("{:x}", Sha256::digest(text.as_bytes())),
    };
    Ok((text, digest))
}

pub fn run_ingest(cfg: &RunConfig) -> Result<IngestProducts, Error> {
    let (cases_text, cases_digest) = read_input(&cfg.inputs.cases)?;
    let (deaths_text, deaths_digest) = read_input(&cfg.inputs.deaths)?;
    let (census_text, census_digest) = read_input(&cfg.inputs.census)?;
    let (mask_text, mask_digest) = read_input(&cfg.inputs.mask)?;

    let cases = parse_county_timeseries(&cases_text, ValueKind::Cases)?;
    let deaths = parse_county_timeseries(&deaths_text, ValueKind::Deaths)?;
    let census = parse_census_covariates(&census_text)?;
    let mask = parse_mask_survey(&mask_text)?;
    let states: BTreeSet<String> = cfg.states.iter().cloned().collect();
    let (records, missing) = join_records(&cases, &deaths, &census, &mask, &states)?;

    let mut digests = BTreeMap::new();
    digests.insert("cases", cases_digest);
    digests.insert("deaths", deaths_digest);
    digests.insert("census", census_digest);
    digests.insert("mask", mask_digest);
    Ok(IngestProducts {
        records,
        missing,
        digests,
    })
}

pub fn run_build(cfg: &RunConfig) -> Result<DatasetProducts, Error> {
    let ingest = run_ingest(cfg)?;
    let intervention = cfg.intervention()?;
    let build = build_labeled_dataset(&ingest.records, &intervention)?;
    let describe = describe_dataset(&build.samples)?;
    let correlations = feature_correlations(&build.samples)?;
    let states = state_summary(&ingest.records, &intervention)?;
    let groups = group_means(&build.samples)?;
    Ok(DatasetProducts {
        ingest,
        build,
        describe,
        correlations,
        states,
        groups,
    })
}

fn feature_correlations(samples: &[LabeledSample]) -> Result<Vec<(String, f64)>, Error> {
    let deltas: Vec<f64> = samples.iter().map(|s| s.dr_delta).collect();
    let mut rows = Vec::with_capacity(FEATURE_NAMES.len());
    for (j, name) in FEATURE_NAMES.iter().enumerate() {
        let column: Vec<f64> = samples.iter().map(|s| s.features[j]).collect();
        let r = match pearson_correlation(&column, &deltas) {
            Ok(r) => r,
            Err(Error::ConstantInput) => f64::NAN,
            Err(e) => return Err(e),
        };
        rows.push((name.to_string(), r));
    }
    Ok(rows)
}

pub fn run_eval(cfg: &RunConfig, tuned: bool) -> Result<EvalProducts, Error> {
    let dataset = run_build(cfg)?;
    let samples = &dataset.build.samples;
    let labels: Vec<bool> = samples.iter().map(|s| s.label.is_increase()).collect();
    let raw: Vec<Vec<f64>> = samples.iter().map(|s| s.features.to_vec()).collect();

    let split = train_test_split(samples.len(), cfg.test_fraction, cfg.seed, &labels)?;
    let take = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<bool>) {
        (
            idx.iter().map(|&i| raw[i].clone()).collect(),
            idx.iter().map(|&i| labels[i]).collect(),
        )
    };
    let (train_raw, train_y) = take(&split.train_indices);
    let (test_raw, test_y) = take(&split.test_indices);

    let train_samples: Vec<LabeledSample> = split
        .train_indices
        .iter()
        .map(|&i| samples[i].clone())
        .collect();
    let scaler = fit_scaler(&train_samples)?;
    let train_x = scaler.transform_matrix(&train_raw)?;
    let test_x = scaler.transform_matrix(&test_raw)?;

    let mut reports = Vec::new();
    let mut search_logs = Vec::new();
    for alg in cfg.selected_algorithms() {
        let alg_seed = derive_seed(cfg.seed, alg.tag());
        let spec = if tuned {
            let (spec, log) = tune(cfg, alg, alg_seed, &train_raw, &train_y)?;
            if let Some(log) = log {
                search_logs.push((alg.tag(), log));
            }
            spec
        } else {
            ModelSpec::default_for(alg, alg_seed)
        };
        reports.push(evaluate_model(
            &spec,
            &train_x,
            &train_y,
            &test_x,
            &test_y,
            cfg.threshold,
            cfg.z,
        )?);
    }

    Ok(EvalProducts {
        dataset,
        split,
        reports,
        search_logs,
    })
}

/// Picks each algorithm's hyperparameters on the training rows only.
/// All searches cross-validate raw features (the fold scaler is refit
/// inside), so the held-out rows never influence the choice.
fn tune(
    cfg: &RunConfig,
    alg: Algorithm,
    alg_seed: u64,
    train_raw: &[Vec<f64>],
    train_y: &[bool],
) -> Result<(ModelSpec, Option<Vec<SearchRecord>>), Error> {
    let s = &cfg.search;
    let spec_of = |params: AlgoParams| ModelSpec {
        seed: alg_seed,
        params,
    };

    let grid: Vec<ModelSpec> = match alg {
        // No search space: these run their fixed defaults.
        Algorithm::NaiveBayes | Algorithm::Mlp => {
            return Ok((ModelSpec::default_for(alg, alg_seed), None));
        }
        Algorithm::Knn => {
            let (k, curve) = elbow_knn(train_raw, train_y, s.knn_k_max, cfg.k_folds, alg_seed)?;
            let log = curve
                .into_iter()
                .map(|(k, err)| SearchRecord {
                    params: format!("k={k}"),
                    score: 1.0 - err,
                })
                .collect();
            let spec = spec_of(AlgoParams::Knn(KnnParams { k }));
            return Ok((spec, Some(log)));
        }
        Algorithm::GradientBoosting => {
            let ranges = s.clone();
            let sampler = move |rng: &mut rand_chacha::ChaCha8Rng| {
                use rand::Rng;
                // Draw order is part of the reproducibility contract.
                let learning_rate =
                    rng.gen_range(ranges.gb_learning_rate[0]..=ranges.gb_learning_rate[1]);
                let max_depth = rng.gen_range(ranges.gb_depth[0]..=ranges.gb_depth[1]);
                let gamma = rng.gen_range(ranges.gb_gamma[0]..=ranges.gb_gamma[1]);
                let subsample = rng.gen_range(ranges.gb_subsample[0]..=ranges.gb_subsample[1]);
                let colsample_bytree =
                    rng.gen_range(ranges.gb_colsample[0]..=ranges.gb_colsample[1]);
                let n_rounds = rng.gen_range(ranges.gb_rounds[0]..=ranges.gb_rounds[1]);
                ModelSpec {
                    seed: alg_seed,
                    params: AlgoParams::GradientBoosting(GbParams {
                        learning_rate,
                        max_depth,
                        gamma,
                        subsample,
                        colsample_bytree,
                        lambda: 1.0,
                        n_rounds,
                    }),
                }
            };
            let outcome = hyperparameter_search(
                SearchSpace::Random {
                    n_draws: s.gb_draws,
                    sampler: Box::new(sampler),
                },
                train_raw,
                train_y,
                cfg.k_folds,
                derive_seed(cfg.seed, "search_gb"),
            )?;
            return Ok((outcome.best, Some(outcome.log)));
        }
        Algorithm::LogisticRegression => s
            .lr_c
            .iter()
            .map(|&c| {
                spec_of(AlgoParams::LogisticRegression(LrParams {
                    c,
                    ..LrParams::default()
                }))
            })
            .collect(),
        Algorithm::DecisionTree => s
            .dt_depth
            .iter()
            .map(|&max_depth| {
                spec_of(AlgoParams::DecisionTree(TreeParams {
                    max_depth,
                    ..TreeParams::default()
                }))
            })
            .collect(),
        Algorithm::RandomForest => s
            .rf_depth
            .iter()
            .map(|&max_depth| {
                spec_of(AlgoParams::RandomForest(ForestParams {
                    max_depth,
                    ..ForestParams::default()
                }))
            })
            .collect(),
        Algorithm::ExtraTrees => s
            .et_min_samples_leaf
            .iter()
            .map(|&min_samples_leaf| {
                spec_of(AlgoParams::ExtraTrees(EtParams {
                    min_samples_leaf,
                    ..EtParams::default()
                }))
            })
            .collect(),
        Algorithm::SvmRbf => s
            .svm_c
            .iter()
            .map(|&c| {
                spec_of(AlgoParams::SvmRbf(SvmParams {
                    c,
                    ..SvmParams::default()
                }))
            })
            .collect(),
    };

    let outcome = hyperparameter_search(
        SearchSpace::Grid(grid),
        train_raw,
        train_y,
        cfg.k_folds,
        alg_seed,
    )?;
    Ok((outcome.best, Some(outcome.log)))
}

/// What the CLI prints after a stage: join coverage, label balance, and
/// the per-algorithm headline numbers.
pub struct StageSummary {
    pub joined: usize,
    pub missing: usize,
    pub samples: usize,
    pub decrease: usize,
    pub increase: usize,
    pub no_change: usize,
    pub lines: Vec<String>,
}

/// Runs a stage and writes its artifact set under `out_dir`.
pub fn run_stage(cfg: &RunConfig, out_dir: &Path, stage: Stage) -> Result<StageSummary, Error> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let tuned = stage == Stage::Report;
    let mut summary = StageSummary {
        joined: 0,
        missing: 0,
        samples: 0,
        decrease: 0,
        increase: 0,
        no_change: 0,
        lines: Vec::new(),
    };

    // Each arm computes exactly as much as its stage needs; the write
    // set grows with the stage.
    enum Products {
        Ingest(IngestProducts),
        Dataset(DatasetProducts),
        Eval(EvalProducts),
    }
    let products = match stage {
        Stage::Ingest => Products::Ingest(run_ingest(cfg)?),
        Stage::BuildDataset => Products::Dataset(run_build(cfg)?),
        Stage::Evaluate | Stage::Report => Products::Eval(run_eval(cfg, tuned)?),
    };
    let ingest = match &products {
        Products::Ingest(i) => i,
        Products::Dataset(d) => &d.ingest,
        Products::Eval(e) => &e.dataset.ingest,
    };
    let dataset = match &products {
        Products::Ingest(_) => None,
        Products::Dataset(d) => Some(d),
        Products::Eval(e) => Some(&e.dataset),
    };
    let eval = match &products {
        Products::Eval(e) => Some(e),
        _ => None,
    };

    summary.joined = ingest.records.len();
    summary.missing = ingest.missing.len();
    report::write_artifact(
        out_dir,
        "missing_counties.csv",
        &report::missing_counties_csv(&ingest.missing),
    )?;

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION"),
        tuned,
        config: cfg,
        inputs: &ingest.digests,
    };
    report::write_artifact(out_dir, "run_manifest.toml", &report::manifest_toml(&manifest)?)?;

    if let Some(d) = dataset {
        summary.samples = d.build.samples.len();
        summary.decrease = d.build.class_counts.decrease;
        summary.increase = d.build.class_counts.increase;
        summary.no_change = d.build.class_counts.no_change;
        report::write_artifact(out_dir, "dataset.csv", &report::dataset_csv(&d.build.samples))?;
        report::write_artifact(out_dir, "map_data.csv", &report::map_data_csv(&d.build.all_deltas))?;
        report::write_artifact(out_dir, "describe.csv", &report::describe_csv(&d.describe))?;
        report::write_artifact(
            out_dir,
            "correlations.csv",
            &report::correlations_csv(&d.correlations),
        )?;
        report::write_artifact(
            out_dir,
            "state_summary.csv",
            &report::state_summary_csv(&d.states),
        )?;
        report::write_artifact(out_dir, "group_means.csv", &report::group_means_csv(&d.groups))?;
    }

    if let Some(e) = eval {
        report::write_artifact(out_dir, "accuracies.csv", &report::accuracies_csv(&e.reports))?;
        report::write_artifact(out_dir, "eval_detail.csv", &report::eval_detail_csv(&e.reports))?;
        for r in &e.reports {
            report::write_artifact(
                out_dir,
                &format!("roc_{}.csv", r.algorithm),
                &report::roc_csv(&r.roc_points),
            )?;
        }
        for (tag, log) in &e.search_logs {
            report::write_artifact(
                out_dir,
                &format!("search_log_{tag}.csv"),
                &report::search_log_csv(log),
            )?;
        }
        for r in &e.reports {
            let mut line = format!(
                "{}: test {:.3} train {:.3} ci +/-{:.3} auc {:.3}",
                r.algorithm, r.test_accuracy, r.train_accuracy, r.ci_half_width, r.auc
            );
            if let Some(w) = &r.warning {
                line.push_str(&format!(" ({w})"));
            }
            summary.lines.push(line);
        }
    }

    Ok(summary)
}
