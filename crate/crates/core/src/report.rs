//! Renders every artifact the CLI writes. All output here is plain text
//! built from already-computed values; byte-identical input state must
//! produce byte-identical files, so nothing in this module consults the
//! clock, the environment, or iteration order of unordered containers.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::dataset::{
    DescribeTable, GroupMeans, LabeledSample, StateSummaryRow, FEATURE_NAMES,
};
use crate::error::Error;
use crate::eval::{EvalReport, SearchRecord};
use crate::ingest::MissingCounty;

/// Shortest decimal that parses back to the identical f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Nearest integer percent, for the headline accuracy table.
fn pct(v: f64) -> i64 {
    (100.0 * v).round() as i64
}

pub fn write_artifact(dir: &Path, name: &str, text: &str) -> Result<(), Error> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// The labeled samples in source units, one county per row.
pub fn dataset_csv(samples: &[LabeledSample]) -> String {
    let mut out = String::from(
        "fips,population,median_income,education_level,mask_never,mask_rarely,\
         mask_sometimes,mask_frequently,mask_always,dr_delta,label\n",
    );
    for s in samples {
        out.push_str(&s.fips);
        for f in s.features {
            out.push(',');
            out.push_str(&fmt_f64(f));
        }
        out.push(',');
        out.push_str(&fmt_f64(s.dr_delta));
        out.push(',');
        out.push_str(s.label.name());
        out.push('\n');
    }
    out
}

/// Every joined county's delta, including the zero-delta counties that
/// the learning set drops. This is the choropleth input.
pub fn map_data_csv(all_deltas: &[(String, f64)]) -> String {
    let mut out = String::from("fips,dr_delta\n");
    for (fips, delta) in all_deltas {
        out.push_str(&format!("{fips},{}\n", fmt_f64(*delta)));
    }
    out
}

pub fn describe_csv(table: &DescribeTable) -> String {
    let mut out = String::from("statistic");
    for c in &table.columns {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    let rows: [(&str, &[f64]); 7] = [
        ("mean", &table.mean),
        ("std", &table.std),
        ("min", &table.min),
        ("25%", &table.q25),
        ("50%", &table.q50),
        ("75%", &table.q75),
        ("max", &table.max),
    ];
    out.push_str("count");
    for _ in &table.columns {
        out.push_str(&format!(",{}", table.count));
    }
    out.push('\n');
    for (name, vals) in rows {
        out.push_str(name);
        for v in vals {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn correlations_csv(rows: &[(String, f64)]) -> String {
    let mut out = String::from("feature,correlation\n");
    for (name, r) in rows {
        out.push_str(&format!("{name},{}\n", fmt_f64(*r)));
    }
    out
}

pub fn state_summary_csv(rows: &[StateSummaryRow]) -> String {
    let mut out = String::from(
        "state,death_ratio_before,death_ratio_after,pct_change,cases_change,deaths_change\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.state,
            fmt_f64(r.ratio_before),
            fmt_f64(r.ratio_after),
            r.pct_change,
            fmt_f64(r.cases_change),
            fmt_f64(r.deaths_change)
        ));
    }
    out
}

pub fn group_means_csv(means: &GroupMeans) -> String {
    let mut out = String::from("feature,decrease_mean,increase_mean\n");
    for (j, name) in FEATURE_NAMES.iter().enumerate() {
        out.push_str(&format!(
            "{name},{},{}\n",
            fmt_f64(means.decrease[j]),
            fmt_f64(means.increase[j])
        ));
    }
    out
}

pub fn missing_counties_csv(missing: &[MissingCounty]) -> String {
    let mut out = String::from("fips,missing_sources\n");
    for m in missing {
        out.push_str(&format!("{},{}\n", m.fips, m.missing_sources.join(";")));
    }
    out
}

/// Headline table: integer percents, worst test accuracy first, ties by
/// tag so the order never depends on input order.
pub fn accuracies_csv(reports: &[EvalReport]) -> String {
    let mut sorted: Vec<&EvalReport> = reports.iter().collect();
    sorted.sort_by(|a, b| {
        a.test_accuracy
            .partial_cmp(&b.test_accuracy)
            .expect("finite accuracy")
            .then_with(|| a.algorithm.cmp(b.algorithm))
    });
    let mut out = String::from("algorithm,test_pct,train_pct,ci_pct\n");
    for r in sorted {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.algorithm,
            pct(r.test_accuracy),
            pct(r.train_accuracy),
            pct(r.ci_half_width)
        ));
    }
    out
}

/// Full-precision companion to accuracies.csv, ordered by tag.
pub fn eval_detail_csv(reports: &[EvalReport]) -> String {
    let mut sorted: Vec<&EvalReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.algorithm);
    let mut out = String::from(
        "algorithm,test_accuracy,train_accuracy,ci_half_width,auc,tp,fp,tn,fn,params,notes\n",
    );
    for r in sorted {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.algorithm,
            fmt_f64(r.test_accuracy),
            fmt_f64(r.train_accuracy),
            fmt_f64(r.ci_half_width),
            fmt_f64(r.auc),
            r.tp,
            r.fp,
            r.tn,
            r.fn_,
            r.spec.params_string(),
            r.warning.as_deref().unwrap_or("")
        ));
    }
    out
}

pub fn roc_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("fpr,tpr\n");
    for (fpr, tpr) in points {
        out.push_str(&format!("{},{}\n", fmt_f64(*fpr), fmt_f64(*tpr)));
    }
    out
}

pub fn search_log_csv(log: &[SearchRecord]) -> String {
    let mut out = String::from("params,cv_accuracy\n");
    for rec in log {
        out.push_str(&format!("{},{}\n", rec.params, fmt_f64(rec.score)));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// What produced the artifact directory: tool version, the fully
/// resolved config, and a digest of each input file. Deliberately no
/// timestamps and no output paths, so reruns stay byte-identical.
#[derive(Serialize)]
pub struct RunManifest<'a> {
    pub version: &'static str,
    pub tuned: bool,
    pub config: &'a RunConfig,
    pub inputs: &'a BTreeMap<&'static str, InputDigest>,
}

pub fn manifest_toml(manifest: &RunManifest) -> Result<String, Error> {
    toml::to_string(manifest).map_err(|e| Error::Config(format!("manifest serialization: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Label;
    use crate::learners::{Algorithm, ModelSpec};

    fn report_with(tag: &'static str, test: f64, train: f64) -> EvalReport {
        EvalReport {
            algorithm: tag,
            spec: ModelSpec::default_for(Algorithm::from_tag(tag).unwrap(), 0),
            train_accuracy: train,
            test_accuracy: test,
            ci_half_width: 0.25,
            roc_points: vec![(0.0, 0.0), (1.0, 1.0)],
            auc: 0.5,
            tp: 1,
            fp: 2,
            tn: 3,
            fn_: 4,
            warning: None,
        }
    }

    #[test]
    fn floats_render_shortest_and_round_trip() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(1.0), "1");
        let v = 2.0f64 / 3.0;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn accuracies_sort_ascending_by_test_then_tag() {
        let reports = vec![
            report_with("mlp", 0.75, 0.9),
            report_with("knn", 0.5, 0.8),
            report_with("decision_tree", 0.75, 0.85),
        ];
        let text = accuracies_csv(&reports);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "algorithm,test_pct,train_pct,ci_pct");
        assert_eq!(lines[1], "knn,50,80,25");
        assert_eq!(lines[2], "decision_tree,75,85,25");
        assert_eq!(lines[3], "mlp,75,90,25");
    }

    #[test]
    fn dataset_rows_render_in_source_units() {
        let samples = vec![LabeledSample {
            fips: "06001".into(),
            features: [1500000.0, 62000.5, 88.1, 2.5, 3.0, 7.25, 20.0, 67.25],
            dr_delta: -1.75,
            label: Label::Decrease,
        }];
        let text = dataset_csv(&samples);
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "06001,1500000,62000.5,88.1,2.5,3,7.25,20,67.25,-1.75,decrease"
        );
    }

    #[test]
    fn missing_sources_join_with_semicolons() {
        let rows = vec![MissingCounty {
            fips: "41069".into(),
            missing_sources: vec!["census", "mask"],
        }];
        assert_eq!(
            missing_counties_csv(&rows),
            "fips,missing_sources\n41069,census;mask\n"
        );
    }

    #[test]
    fn manifest_is_valid_toml_without_clock_fields() {
        let cfg = RunConfig::default();
        let mut inputs = BTreeMap::new();
        inputs.insert(
            "cases",
            InputDigest {
                path: "data/snapshot/covid_confirmed_usafacts.csv".into(),
                sha256: "00".repeat(32),
            },
        );
        let manifest = RunManifest {
            version: "0.1.0",
            tuned: true,
            config: &cfg,
            inputs: &inputs,
        };
        let text = manifest_toml(&manifest).unwrap();
        assert!(text.starts_with("version = \"0.1.0\""));
        assert!(!text.contains("time"));
        assert!(!text.contains("date = "));
        let parsed: toml::Table = text.parse().unwrap();
        assert_eq!(
            parsed["config"]["seed"].as_integer(),
            Some(cfg.seed as i64)
        );
        assert_eq!(
            parsed["inputs"]["cases"]["sha256"].as_str().unwrap().len(),
            64
        );
    }

    #[test]
    fn roc_and_search_logs_have_stable_headers() {
        assert_eq!(roc_csv(&[(0.0, 0.5)]), "fpr,tpr\n0,0.5\n");
        let log = vec![SearchRecord {
            params: "k=3".into(),
            score: 0.8125,
        }];
        assert_eq!(search_log_csv(&log), "params,cv_accuracy\nk=3,0.8125\n");
    }
}
